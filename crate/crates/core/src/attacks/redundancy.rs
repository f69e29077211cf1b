//! Redundancy counting: pin a key bit, then count stuck-at faults that
//! provably cannot be detected. Wrong key constants freeze nets, and
//! frozen nets breed undetectable faults, so the bit whose pinned copy is
//! *less* redundant is the likelier correct one.

use crate::error::{Error, Result};
use crate::fault::{classify_faults, FaultConfig, FaultOutcome};
use crate::netlist::{KeyMapping, Netlist};
use crate::rewrite::constant_propagate;

use super::{finish, AttackReport, KeyGuess};

/// Proven-redundant fault counts for both values of one key input. Other
/// key inputs stay free (the attacker does not know them), so they are
/// simply part of each fault's input support. Faults whose support
/// exceeds `cone_limit` are skipped, never counted.
pub fn redundancy_counts(
    n: &Netlist,
    key_name: &str,
    cone_limit: usize,
) -> Result<(usize, usize)> {
    let count = |bit: bool| -> Result<usize> {
        let pinned = constant_propagate(n, &[(key_name, bit)])?;
        let cfg = FaultConfig { patterns: 256, seed: 0xFA, exhaustive_limit: cone_limit };
        let statuses = classify_faults(&pinned, None, &cfg)?;
        Ok(statuses.iter().filter(|s| s.outcome == FaultOutcome::Undetectable).count())
    };
    Ok((count(false)?, count(true)?))
}

pub fn redundancy_attack(
    target: &Netlist,
    truth: &KeyMapping,
    cone_limit: usize,
) -> Result<AttackReport> {
    if cone_limit < 1 {
        return Err(Error::Invalid("cone limit must be at least 1".into()));
    }
    let mut guesses = Vec::new();
    for &key in target.key_inputs() {
        let key_name = target.name_of(key).to_string();
        let (r0, r1) = redundancy_counts(target, &key_name, cone_limit)?;
        let guess = match r0.cmp(&r1) {
            std::cmp::Ordering::Greater => Some(true),
            std::cmp::Ordering::Less => Some(false),
            std::cmp::Ordering::Equal => None,
        };
        guesses.push(KeyGuess {
            key: key_name,
            guess,
            truth: false,
            correct: false,
            confidence: r0.abs_diff(r1) as f64,
            stage: "redundancy",
        });
    }
    finish(guesses, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_netlist, GenConfig};
    use crate::lock::{insert_key_gate, lock_rll, KeyGateKind, Palette};
    use crate::netlist::{GateId, GateKind, NetlistBuilder};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    /// Naive reference: evaluate the whole netlist per input assignment,
    /// once clean and once with the fault forced, over every assignment.
    fn eval(n: &Netlist, inputs: &HashMap<GateId, bool>, force: Option<(GateId, bool)>) -> Vec<bool> {
        let mut v = vec![false; n.len()];
        for &id in n.topological_order() {
            let g = n.gate(id);
            let f = |i: usize| v[g.fanins[i].index()];
            let all = || g.fanins.iter().all(|x| v[x.index()]);
            let any = || g.fanins.iter().any(|x| v[x.index()]);
            let parity = || g.fanins.iter().filter(|x| v[x.index()]).count() % 2 == 1;
            let val = match g.kind {
                GateKind::Input => inputs[&id],
                GateKind::Output | GateKind::Buf => f(0),
                GateKind::Not => !f(0),
                GateKind::And => all(),
                GateKind::Nand => !all(),
                GateKind::Or => any(),
                GateKind::Nor => !any(),
                GateKind::Xor => parity(),
                GateKind::Xnor => !parity(),
                GateKind::Const0 => false,
                GateKind::Const1 => true,
            };
            v[id.index()] = match force {
                Some((site, bit)) if site == id => bit,
                _ => val,
            };
        }
        v
    }

    fn oracle_redundant(n: &Netlist) -> usize {
        let inputs: Vec<GateId> =
            n.primary_inputs().iter().chain(n.key_inputs()).copied().collect();
        assert!(inputs.len() <= 12, "oracle is exhaustive");
        let outputs: Vec<GateId> =
            n.ids().filter(|&id| n.gate(id).kind == GateKind::Output).collect();
        let sites: Vec<GateId> =
            n.ids().filter(|&id| n.gate(id).kind != GateKind::Output).collect();
        let mut redundant = 0usize;
        for &site in &sites {
            for stuck in [false, true] {
                let mut detected = false;
                for pattern in 0..(1u32 << inputs.len()) {
                    let assign: HashMap<GateId, bool> = inputs
                        .iter()
                        .enumerate()
                        .map(|(i, &id)| (id, pattern >> i & 1 == 1))
                        .collect();
                    let good = eval(n, &assign, None);
                    let bad = eval(n, &assign, Some((site, stuck)));
                    if outputs.iter().any(|&o| good[o.index()] != bad[o.index()]) {
                        detected = true;
                        break;
                    }
                }
                if !detected {
                    redundant += 1;
                }
            }
        }
        redundant
    }

    #[test]
    fn counts_match_the_exhaustive_oracle() {
        let n = random_netlist(&GenConfig::new(5, 40, 2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = lock_rll(&n, 2, &Palette::cl_v2(), &mut rng).unwrap();
        for key_name in rec.mapping.names() {
            let (r0, r1) = redundancy_counts(&rec.locked, key_name, 12).unwrap();
            for (bit, expected) in [(false, r0), (true, r1)] {
                let pinned = constant_propagate(&rec.locked, &[(key_name, bit)]).unwrap();
                assert_eq!(
                    oracle_redundant(&pinned),
                    expected,
                    "key {key_name} bit {bit}"
                );
            }
        }
    }

    #[test]
    fn stuck_and_cone_points_to_the_transparent_bit() {
        let n = random_netlist(&GenConfig::new(6, 50, 5)).unwrap();
        let sites = crate::lock::lockable_nets(&n);
        let mut b = NetlistBuilder::from_netlist(&n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let correct = insert_key_gate(&mut b, sites[4], KeyGateKind::And, "k0", &mut rng).unwrap();
        assert!(correct, "AND key-gates are transparent at 1");
        let locked = b.build().unwrap();
        let truth = KeyMapping::new(vec![("k0".into(), true)]).unwrap();
        let (r0, r1) = redundancy_counts(&locked, "k0", 12).unwrap();
        assert!(r0 > r1, "the stuck cone must breed redundancy: {r0} vs {r1}");
        let report = redundancy_attack(&locked, &truth, 12).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.guesses[0].guess, Some(true));
    }

    #[test]
    fn xnor_family_symmetry_forces_abstention() {
        // Fanout-free tree: either constant leaves a wire or an inverter,
        // every fault stays testable both ways, so the rule cannot decide.
        // (Reconvergent circuits can break the tie, which is exactly how the
        // attack earns its nonzero accuracy elsewhere.)
        let mut b = NetlistBuilder::new();
        let a = b.input("a").unwrap();
        let c = b.input("c").unwrap();
        let d = b.input("d").unwrap();
        let e = b.input("e").unwrap();
        let n1 = b.gate_named(GateKind::And, vec![a, c], "n1").unwrap();
        let n2 = b.gate_named(GateKind::Or, vec![d, e], "n2").unwrap();
        let top = b.gate_anon(GateKind::Xor, vec![n1, n2]);
        b.output("y", top).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let c0 = insert_key_gate(&mut b, n1, KeyGateKind::Xor, "k0", &mut rng).unwrap();
        let c1 = insert_key_gate(&mut b, n2, KeyGateKind::Xnor, "k1", &mut rng).unwrap();
        let locked = b.build().unwrap();
        let truth = KeyMapping::new(vec![("k0".into(), c0), ("k1".into(), c1)]).unwrap();
        let report = redundancy_attack(&locked, &truth, 12).unwrap();
        assert!(report.guesses.iter().all(|g| g.guess.is_none()));
        assert_eq!(report.accuracy, 0.0);
    }

    #[test]
    fn zero_cone_limit_is_refused() {
        let n = random_netlist(&GenConfig::new(5, 30, 1)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rec = lock_rll(&n, 2, &Palette::xnor(), &mut rng).unwrap();
        assert!(matches!(
            redundancy_attack(&rec.locked, &rec.mapping, 0),
            Err(Error::Invalid(_))
        ));
    }
}
