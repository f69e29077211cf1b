//! Single stuck-at fault analysis.
//!
//! A fault site is any non-marker gate, stuck at 0 or at 1. Detection runs
//! in two phases: bit-parallel random patterns with resimulation restricted
//! to the site's transitive fanout, then an exhaustive pass over each
//! remaining fault's structural input support (inputs outside the support
//! cannot influence the difference, so fixing them to 0 loses nothing).
//! Faults whose support exceeds the exhaustive limit stay unknown.

use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::error::Result;
use crate::netlist::{GateId, GateKind, KeyMapping, Netlist};
use crate::sim::{mask, simulate, PatternBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaultOutcome {
    Detected,
    Undetectable,
    Unknown,
}

#[derive(Debug, Clone, Copy)]
pub struct FaultStatus {
    pub site: GateId,
    pub stuck: bool,
    pub outcome: FaultOutcome,
}

#[derive(Debug, Clone, Copy)]
pub struct FaultConfig {
    /// Random patterns for the sampling phase.
    pub patterns: usize,
    pub seed: u64,
    /// Exhaustive resolution cap: faults whose input support has more than
    /// this many members are left unknown.
    pub exhaustive_limit: usize,
}

impl Default for FaultConfig {
    fn default() -> Self {
        FaultConfig { patterns: 1024, seed: 1, exhaustive_limit: 16 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultReport {
    pub total: usize,
    pub detected: usize,
    pub undetectable: usize,
    pub unknown: usize,
}

impl FaultReport {
    /// Detected over all sites.
    pub fn fault_coverage(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.detected as f64 / self.total as f64
        }
    }

    /// Detected over testable sites; proven-undetectable and unresolved
    /// sites leave the denominator.
    pub fn test_coverage(&self) -> f64 {
        let denom = self.total - self.undetectable - self.unknown;
        if denom == 0 {
            1.0
        } else {
            self.detected as f64 / denom as f64
        }
    }
}

/// Structural input support per gate, as bitsets over input slots
/// (primary inputs first, then any free key inputs).
pub(crate) struct SupportTable {
    words: usize,
    bits: Vec<u64>,
}

impl SupportTable {
    pub(crate) fn build(n: &Netlist, include_keys: bool) -> SupportTable {
        let mut slot = vec![usize::MAX; n.len()];
        let mut slots = 0usize;
        for &pi in n.primary_inputs() {
            slot[pi.index()] = slots;
            slots += 1;
        }
        if include_keys {
            for &k in n.key_inputs() {
                slot[k.index()] = slots;
                slots += 1;
            }
        }
        let words = slots.div_ceil(64);
        let mut bits = vec![0u64; n.len() * words.max(1)];
        let words = words.max(1);
        for &id in n.topological_order() {
            let g = n.gate(id);
            let base = id.index() * words;
            if slot[id.index()] != usize::MAX {
                let s = slot[id.index()];
                bits[base + s / 64] |= 1u64 << (s % 64);
                continue;
            }
            for f in &g.fanins {
                let fb = f.index() * words;
                for w in 0..words {
                    let v = bits[fb + w];
                    bits[base + w] |= v;
                }
            }
        }
        SupportTable { words, bits }
    }

    pub(crate) fn union_into(&self, id: GateId, acc: &mut [u64]) {
        let base = id.index() * self.words;
        for (w, a) in acc.iter_mut().enumerate().take(self.words) {
            *a |= self.bits[base + w];
        }
    }

    pub(crate) fn words(&self) -> usize {
        self.words
    }
}

pub fn fault_coverage(n: &Netlist, key: Option<&KeyMapping>, cfg: &FaultConfig) -> Result<FaultReport> {
    let statuses = classify_faults(n, key, cfg)?;
    let mut report = FaultReport { total: statuses.len(), detected: 0, undetectable: 0, unknown: 0 };
    for s in &statuses {
        match s.outcome {
            FaultOutcome::Detected => report.detected += 1,
            FaultOutcome::Undetectable => report.undetectable += 1,
            FaultOutcome::Unknown => report.unknown += 1,
        }
    }
    Ok(report)
}

pub fn classify_faults(
    n: &Netlist,
    key: Option<&KeyMapping>,
    cfg: &FaultConfig,
) -> Result<Vec<FaultStatus>> {
    if let Some(k) = key {
        k.check_covers(n)?;
    }
    let free_keys = key.is_none();
    let slots = n.primary_inputs().len() + if free_keys { n.key_inputs().len() } else { 0 };

    let mut topo_pos = vec![0usize; n.len()];
    for (pos, &id) in n.topological_order().iter().enumerate() {
        topo_pos[id.index()] = pos;
    }

    // Per site: fanout cone in topological order, plus the output markers
    // inside it. Sites with no reachable output can never be observed.
    let sites: Vec<GateId> =
        n.ids().filter(|&id| !n.is_output_marker(id)).collect();
    let mut cones: Vec<Vec<GateId>> = Vec::with_capacity(sites.len());
    let mut cone_pos: Vec<Vec<GateId>> = Vec::with_capacity(sites.len());
    for &site in &sites {
        let mut cone: Vec<GateId> = n.transitive_fanout(site).into_iter().collect();
        cone.sort_by_key(|g| topo_pos[g.index()]);
        let pos = cone.iter().copied().filter(|&g| n.is_output_marker(g)).collect();
        cones.push(cone);
        cone_pos.push(pos);
    }

    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Open,
        Detected,
        Dead,
    }
    // Fault index: 2 * site_pos + stuck_bit.
    let mut state = vec![State::Open; sites.len() * 2];
    for (i, pos) in cone_pos.iter().enumerate() {
        if pos.is_empty() {
            state[2 * i] = State::Dead;
            state[2 * i + 1] = State::Dead;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut in_cone = vec![false; n.len()];
    let mut faulty = vec![0u64; n.len()];

    let mut blocks = cfg.patterns.div_ceil(64);
    let mut left = cfg.patterns;
    while blocks > 0 {
        let width = left.clamp(1, 64);
        let block = PatternBlock::random_narrow(slots, width, &mut rng);
        let good = simulate(n, &block, key)?;
        let m = mask(width);
        for (i, &site) in sites.iter().enumerate() {
            for stuck in 0..2 {
                if state[2 * i + stuck] != State::Open {
                    continue;
                }
                let forced = if stuck == 1 { !0u64 } else { 0u64 };
                if (good[site.index()] ^ forced) & m == 0 {
                    continue;
                }
                if resim_detects(n, &good, &cones[i], &cone_pos[i], site, forced, m, &mut in_cone, &mut faulty) {
                    state[2 * i + stuck] = State::Detected;
                }
            }
        }
        blocks -= 1;
        left = left.saturating_sub(width);
    }

    // Exhaustive phase over structural support.
    let support = SupportTable::build(n, free_keys);
    let mut statuses = Vec::with_capacity(sites.len() * 2);
    for (i, &site) in sites.iter().enumerate() {
        for stuck in 0..2 {
            let outcome = match state[2 * i + stuck] {
                State::Detected => FaultOutcome::Detected,
                State::Dead => FaultOutcome::Undetectable,
                State::Open => {
                    let forced = if stuck == 1 { !0u64 } else { 0u64 };
                    exhaustive_outcome(
                        n,
                        key,
                        slots,
                        &support,
                        &cones[i],
                        &cone_pos[i],
                        site,
                        forced,
                        cfg.exhaustive_limit,
                        &mut in_cone,
                        &mut faulty,
                    )?
                }
            };
            statuses.push(FaultStatus { site, stuck: stuck == 1, outcome });
        }
    }
    Ok(statuses)
}

#[allow(clippy::too_many_arguments)]
fn resim_detects(
    n: &Netlist,
    good: &[u64],
    cone: &[GateId],
    outputs: &[GateId],
    site: GateId,
    forced: u64,
    m: u64,
    in_cone: &mut [bool],
    faulty: &mut [u64],
) -> bool {
    resim_diff_bits(n, good, cone, outputs, site, forced, m, in_cone, faulty) != 0
}

/// Resimulates the fanout cone with the site forced to `forced` and counts
/// the (pattern, output) bits that differ from the fault-free run. The
/// cone must be in topological order; `in_cone` and `faulty` are caller
/// scratch sized to the netlist.
#[allow(clippy::too_many_arguments)]
pub(crate) fn resim_diff_bits(
    n: &Netlist,
    good: &[u64],
    cone: &[GateId],
    outputs: &[GateId],
    site: GateId,
    forced: u64,
    m: u64,
    in_cone: &mut [bool],
    faulty: &mut [u64],
) -> u64 {
    in_cone[site.index()] = true;
    faulty[site.index()] = forced;
    for &g in cone {
        in_cone[g.index()] = true;
    }
    let read = |lanes: &[u64], in_c: &[bool], f: GateId| {
        if in_c[f.index()] {
            lanes[f.index()]
        } else {
            good[f.index()]
        }
    };
    for &gid in cone {
        let g = n.gate(gid);
        let v = match g.kind {
            GateKind::Input | GateKind::Const0 | GateKind::Const1 => good[gid.index()],
            GateKind::Buf | GateKind::Output => read(faulty, in_cone, g.fanins[0]),
            GateKind::Not => !read(faulty, in_cone, g.fanins[0]),
            GateKind::And => g.fanins.iter().fold(!0u64, |a, f| a & read(faulty, in_cone, *f)),
            GateKind::Nand => !g.fanins.iter().fold(!0u64, |a, f| a & read(faulty, in_cone, *f)),
            GateKind::Or => g.fanins.iter().fold(0u64, |a, f| a | read(faulty, in_cone, *f)),
            GateKind::Nor => !g.fanins.iter().fold(0u64, |a, f| a | read(faulty, in_cone, *f)),
            GateKind::Xor => g.fanins.iter().fold(0u64, |a, f| a ^ read(faulty, in_cone, *f)),
            GateKind::Xnor => !g.fanins.iter().fold(0u64, |a, f| a ^ read(faulty, in_cone, *f)),
        };
        faulty[gid.index()] = v;
    }
    let diff: u64 = outputs
        .iter()
        .map(|po| ((faulty[po.index()] ^ good[po.index()]) & m).count_ones() as u64)
        .sum();
    in_cone[site.index()] = false;
    for &g in cone {
        in_cone[g.index()] = false;
    }
    diff
}

const BROADCAST: [u64; 6] = [
    0xAAAA_AAAA_AAAA_AAAA,
    0xCCCC_CCCC_CCCC_CCCC,
    0xF0F0_F0F0_F0F0_F0F0,
    0xFF00_FF00_FF00_FF00,
    0xFFFF_0000_FFFF_0000,
    0xFFFF_FFFF_0000_0000,
];

#[allow(clippy::too_many_arguments)]
fn exhaustive_outcome(
    n: &Netlist,
    key: Option<&KeyMapping>,
    slots: usize,
    support: &SupportTable,
    cone: &[GateId],
    outputs: &[GateId],
    site: GateId,
    forced: u64,
    limit: usize,
    in_cone: &mut [bool],
    faulty: &mut [u64],
) -> Result<FaultOutcome> {
    let mut acc = vec![0u64; support.words()];
    for &po in outputs {
        support.union_into(po, &mut acc);
    }
    let members: Vec<usize> = (0..slots).filter(|s| (acc[s / 64] >> (s % 64)) & 1 == 1).collect();
    if members.len() > limit {
        return Ok(FaultOutcome::Unknown);
    }
    let s = members.len();
    let blocks: u64 = if s <= 6 { 1 } else { 1u64 << (s - 6) };
    let width = if s >= 6 { 64 } else { 1usize << s };
    let m = mask(width);
    for chunk in 0..blocks {
        let mut lanes = vec![0u64; slots];
        for (i, &slot) in members.iter().enumerate() {
            lanes[slot] = if i < 6 {
                BROADCAST[i]
            } else if (chunk >> (i - 6)) & 1 == 1 {
                !0
            } else {
                0
            };
        }
        let block = PatternBlock::from_lanes(lanes, width);
        let good = simulate(n, &block, key)?;
        if (good[site.index()] ^ forced) & m == 0 {
            continue;
        }
        if resim_detects(n, &good, cone, outputs, site, forced, m, in_cone, faulty) {
            return Ok(FaultOutcome::Detected);
        }
    }
    Ok(FaultOutcome::Undetectable)
}
