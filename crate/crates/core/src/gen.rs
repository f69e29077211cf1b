//! Seeded random combinational circuit generator.
//!
//! Produces benchmark-shaped DAGs for experiments: a layer of primary
//! inputs, a budget of logic gates with recency-biased fanin selection
//! (so depth grows with size instead of producing a shallow soup), and
//! primary outputs on every sink. Same config, same circuit, always.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::netlist::{GateId, GateKind, Netlist, NetlistBuilder};

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub inputs: usize,
    pub gates: usize,
    pub min_outputs: usize,
    pub seed: u64,
}

impl GenConfig {
    pub fn new(inputs: usize, gates: usize, seed: u64) -> Self {
        GenConfig { inputs, gates, min_outputs: 1, seed }
    }
}

const KIND_WEIGHTS: &[(GateKind, u32)] = &[
    (GateKind::And, 3),
    (GateKind::Nand, 3),
    (GateKind::Or, 3),
    (GateKind::Nor, 2),
    (GateKind::Xor, 2),
    (GateKind::Xnor, 1),
    (GateKind::Not, 2),
];

pub fn random_netlist(cfg: &GenConfig) -> Result<Netlist> {
    if cfg.inputs == 0 {
        return Err(Error::Invalid("generator needs at least one input".into()));
    }
    if cfg.gates == 0 {
        return Err(Error::Invalid("generator needs a positive gate budget".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut b = NetlistBuilder::new();
    let mut nodes: Vec<GateId> = Vec::with_capacity(cfg.inputs + cfg.gates);
    for i in 0..cfg.inputs {
        nodes.push(b.input(&format!("x{i}"))?);
    }

    let total_weight: u32 = KIND_WEIGHTS.iter().map(|&(_, w)| w).sum();
    for i in 0..cfg.gates {
        let mut pick = rng.gen_range(0..total_weight);
        let mut kind = GateKind::And;
        for &(k, w) in KIND_WEIGHTS {
            if pick < w {
                kind = k;
                break;
            }
            pick -= w;
        }
        let arity = match kind {
            GateKind::Not => 1,
            // Mostly 2-input cells with the occasional wide AND/OR-family gate.
            GateKind::And | GateKind::Nand | GateKind::Or | GateKind::Nor
                if rng.gen_bool(0.15) =>
            {
                3
            }
            _ => 2,
        };
        let mut fanins = Vec::with_capacity(arity);
        let mut guard = 0;
        while fanins.len() < arity {
            let cand = pick_recent(&nodes, &mut rng);
            if !fanins.contains(&cand) {
                fanins.push(cand);
            } else if guard > 16 {
                // Tiny node pools can exhaust distinct choices; scan instead.
                if let Some(&other) = nodes.iter().rev().find(|n| !fanins.contains(n)) {
                    fanins.push(other);
                } else {
                    break;
                }
            }
            guard += 1;
        }
        if fanins.len() < kind.arity().0 {
            kind = GateKind::Not;
            fanins.truncate(1);
        }
        nodes.push(b.gate_named(kind, fanins, &format!("g{i}"))?);
    }

    // Every gate nothing reads becomes an output port; thin circuits get
    // extra ports on random internal gates to hit the minimum.
    let mut read: Vec<bool> = vec![false; nodes.len()];
    let n = b.build()?;
    let mut b = NetlistBuilder::from_netlist(&n);
    for (_, g) in n.gates() {
        for f in &g.fanins {
            read[f.index()] = true;
        }
    }
    let mut ports: Vec<GateId> = nodes
        .iter()
        .copied()
        .filter(|id| !read[id.index()] && n.gate(*id).kind.is_logic())
        .collect();
    let mut extra: Vec<GateId> = nodes
        .iter()
        .copied()
        .filter(|id| read[id.index()] && n.gate(*id).kind.is_logic())
        .collect();
    extra.shuffle(&mut rng);
    while ports.len() < cfg.min_outputs.min(nodes.len()) {
        match extra.pop() {
            Some(id) => ports.push(id),
            None => break,
        }
    }
    for (i, id) in ports.iter().enumerate() {
        b.output(&format!("y{i}"), *id)?;
    }
    b.build()
}

/// Index biased towards recently created nodes, which stretches the DAG
/// into something with real logic depth.
fn pick_recent(nodes: &[GateId], rng: &mut ChaCha8Rng) -> GateId {
    let x: f64 = rng.gen::<f64>();
    let biased = x * x;
    let from_end = (biased * nodes.len() as f64) as usize;
    nodes[nodes.len() - 1 - from_end.min(nodes.len() - 1)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::write_bench;

    #[test]
    fn same_seed_same_circuit() {
        let cfg = GenConfig::new(8, 120, 7);
        let a = write_bench(&random_netlist(&cfg).unwrap());
        let b = write_bench(&random_netlist(&cfg).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_differ() {
        let a = write_bench(&random_netlist(&GenConfig::new(8, 120, 1)).unwrap());
        let b = write_bench(&random_netlist(&GenConfig::new(8, 120, 2)).unwrap());
        assert_ne!(a, b);
    }

    #[test]
    fn respects_budget_and_output_floor() {
        let mut cfg = GenConfig::new(10, 300, 42);
        cfg.min_outputs = 6;
        let n = random_netlist(&cfg).unwrap();
        assert_eq!(n.logic_gate_count(), 300);
        assert_eq!(n.primary_inputs().len(), 10);
        assert!(n.primary_outputs().len() >= 6);
    }

    #[test]
    fn grows_real_depth() {
        let n = random_netlist(&GenConfig::new(8, 400, 3)).unwrap();
        let mut depth = vec![0usize; n.len()];
        let mut max = 0;
        for &id in n.topological_order() {
            let g = n.gate(id);
            if g.kind.is_logic() {
                let d = g.fanins.iter().map(|f| depth[f.index()]).max().unwrap_or(0) + 1;
                depth[id.index()] = d;
                max = max.max(d);
            }
        }
        assert!(max >= 10, "depth {max} is too shallow for 400 gates");
    }
}
