//! Key-gate insertion and the three classic locking schemes.
//!
//! A key-gate splices a new key input into an existing net: XOR/XNOR and
//! AND/OR as single gates whose correct key bit is the identity element,
//! and three 2:1 multiplexer composites built from primitives where the
//! false path carries the inverted net. Schemes differ only in how they
//! pick nets: RLL uniformly at random, FLL by simulated fault impact,
//! SLL by greedy pairwise interference.

use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fault::resim_diff_bits;
use crate::netlist::{GateId, GateKind, KeyMapping, Netlist, NetlistBuilder};
use crate::sim::{mask, simulate, PatternBlock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KeyGateKind {
    Xor,
    Xnor,
    And,
    Or,
    MuxAndOr,
    MuxNand,
    MuxNor,
}

impl KeyGateKind {
    pub const ALL: [KeyGateKind; 7] = [
        KeyGateKind::Xor,
        KeyGateKind::Xnor,
        KeyGateKind::And,
        KeyGateKind::Or,
        KeyGateKind::MuxAndOr,
        KeyGateKind::MuxNand,
        KeyGateKind::MuxNor,
    ];

    pub fn label(self) -> &'static str {
        match self {
            KeyGateKind::Xor => "XOR",
            KeyGateKind::Xnor => "XNOR",
            KeyGateKind::And => "AND",
            KeyGateKind::Or => "OR",
            KeyGateKind::MuxAndOr => "MUX_ANDOR",
            KeyGateKind::MuxNand => "MUX_NAND",
            KeyGateKind::MuxNor => "MUX_NOR",
        }
    }

    pub fn parse(s: &str) -> Option<KeyGateKind> {
        KeyGateKind::ALL.iter().copied().find(|k| k.label().eq_ignore_ascii_case(s))
    }

    /// The key value that makes the gate transparent, when it does not
    /// depend on the multiplexer leg assignment.
    pub fn fixed_correct_bit(self) -> Option<bool> {
        match self {
            KeyGateKind::Xor | KeyGateKind::Or => Some(false),
            KeyGateKind::Xnor | KeyGateKind::And => Some(true),
            _ => None,
        }
    }

    pub fn is_mux(self) -> bool {
        matches!(self, KeyGateKind::MuxAndOr | KeyGateKind::MuxNand | KeyGateKind::MuxNor)
    }
}

/// The key-gate kinds a scheme may draw from. The stock palettes: plain
/// XOR/XNOR, and four compound mixes that add multiplexer composites,
/// then XOR/XNOR, then AND/OR.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Palette {
    kinds: Vec<KeyGateKind>,
}

impl Palette {
    pub fn new(kinds: &[KeyGateKind]) -> Result<Palette> {
        let mut v: Vec<KeyGateKind> = kinds.to_vec();
        v.sort();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Invalid("palette must hold at least one key-gate kind".into()));
        }
        Ok(Palette { kinds: v })
    }

    pub fn xnor() -> Palette {
        Palette::new(&[KeyGateKind::Xor, KeyGateKind::Xnor]).unwrap()
    }

    pub fn cl_v1() -> Palette {
        Palette::new(&[KeyGateKind::MuxAndOr, KeyGateKind::MuxNand]).unwrap()
    }

    pub fn cl_v2() -> Palette {
        Palette::new(&[KeyGateKind::MuxAndOr, KeyGateKind::MuxNand, KeyGateKind::MuxNor]).unwrap()
    }

    pub fn cl_v3() -> Palette {
        let mut kinds = Palette::cl_v2().kinds;
        kinds.extend([KeyGateKind::Xor, KeyGateKind::Xnor]);
        Palette::new(&kinds).unwrap()
    }

    pub fn cl_v4() -> Palette {
        let mut kinds = Palette::cl_v3().kinds;
        kinds.extend([KeyGateKind::And, KeyGateKind::Or]);
        Palette::new(&kinds).unwrap()
    }

    pub fn parse(s: &str) -> Result<Palette> {
        match s.to_ascii_lowercase().as_str() {
            "xnor" | "x(n)or" => Ok(Palette::xnor()),
            "cl_v1" => Ok(Palette::cl_v1()),
            "cl_v2" => Ok(Palette::cl_v2()),
            "cl_v3" => Ok(Palette::cl_v3()),
            "cl_v4" => Ok(Palette::cl_v4()),
            other => Err(Error::Invalid(format!("unknown palette `{other}`"))),
        }
    }

    pub fn label(&self) -> &'static str {
        for (name, p) in [
            ("xnor", Palette::xnor()),
            ("cl_v1", Palette::cl_v1()),
            ("cl_v2", Palette::cl_v2()),
            ("cl_v3", Palette::cl_v3()),
            ("cl_v4", Palette::cl_v4()),
        ] {
            if p.kinds == self.kinds {
                return name;
            }
        }
        "custom"
    }

    pub fn kinds(&self) -> &[KeyGateKind] {
        &self.kinds
    }

    pub fn contains(&self, kind: KeyGateKind) -> bool {
        self.kinds.contains(&kind)
    }

    fn pick(&self, rng: &mut ChaCha8Rng) -> KeyGateKind {
        self.kinds[rng.gen_range(0..self.kinds.len())]
    }
}

/// Key-gate placement heuristic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Random net selection.
    Rll,
    /// Fault-impact ranking: nets whose stuck-at faults flip the most
    /// output bits first.
    Fll,
    /// Greedy pairwise interference: prefer nets inside already-placed
    /// sites' cones. X(N)OR gates only.
    Sll,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Rll, Scheme::Fll, Scheme::Sll];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Rll => "rll",
            Scheme::Fll => "fll",
            Scheme::Sll => "sll",
        }
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        Scheme::ALL.into_iter().find(|x| x.label() == s)
    }
}

/// Fault-simulation budget used when a caller dispatches FLL through
/// [`lock_with`] without choosing its own pattern count.
pub const FLL_DEFAULT_PATTERNS: usize = 256;

/// Dispatches to the scheme's locker. SLL is defined over X(N)OR gates
/// only, so any other palette is rejected rather than silently ignored.
pub fn lock_with(
    n: &Netlist,
    scheme: Scheme,
    k: usize,
    palette: &Palette,
    rng: &mut ChaCha8Rng,
) -> Result<LockRecord> {
    match scheme {
        Scheme::Rll => lock_rll(n, k, palette, rng),
        Scheme::Fll => lock_fll(n, k, palette, rng, FLL_DEFAULT_PATTERNS),
        Scheme::Sll => {
            if palette.kinds() != Palette::xnor().kinds() {
                return Err(Error::Invalid(format!(
                    "sll places X(N)OR gates only, palette `{}` is not compatible",
                    palette.label()
                )));
            }
            lock_sll(n, k, rng)
        }
    }
}

#[derive(Debug, Clone)]
pub struct LockSite {
    pub key: String,
    pub net: GateId,
    pub net_name: Option<String>,
    pub kind: KeyGateKind,
    pub correct: bool,
}

#[derive(Debug, Clone)]
pub struct LockRecord {
    pub locked: Netlist,
    pub mapping: KeyMapping,
    pub sites: Vec<LockSite>,
}

/// Splices one key-gate onto `net` inside an ongoing edit. Every existing
/// consumer of the net, port markers included, is re-pointed to the
/// key-gate output; for named internal nets the key-gate output takes over
/// the net's name so downstream textual references stay stable. Returns
/// the correct key bit.
pub fn insert_key_gate(
    b: &mut NetlistBuilder,
    net: GateId,
    kind: KeyGateKind,
    key_name: &str,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let g = b.gate(net);
    if g.kind == GateKind::Output {
        return Err(Error::NotLockable("a port marker is not a net".into()));
    }
    if g.kind == GateKind::Input && g.name.as_deref().map(crate::netlist::is_key_name) == Some(true)
    {
        return Err(Error::NotLockable("key inputs cannot be locked".into()));
    }

    let key = b.key_input(key_name)?;
    // Primary inputs keep their names (they are interface); internal nets
    // hand their name to the key-gate output.
    let stolen =
        if b.gate(net).kind == GateKind::Input { None } else { b.steal_name(net) };

    let (out, correct, members): (GateId, bool, Vec<GateId>) = match kind {
        KeyGateKind::Xor => {
            let out = b.gate_anon(GateKind::Xor, vec![net, key]);
            (out, false, vec![out])
        }
        KeyGateKind::Xnor => {
            let out = b.gate_anon(GateKind::Xnor, vec![net, key]);
            (out, true, vec![out])
        }
        KeyGateKind::And => {
            let out = b.gate_anon(GateKind::And, vec![net, key]);
            (out, true, vec![out])
        }
        KeyGateKind::Or => {
            let out = b.gate_anon(GateKind::Or, vec![net, key]);
            (out, false, vec![out])
        }
        _ => {
            let inv = b.gate_anon(GateKind::Not, vec![net]);
            // Select value 1 always picks the first leg; the uninverted
            // net lands on a random leg and the correct bit follows it.
            let swap: bool = rng.gen();
            let (t, f) = if swap { (inv, net) } else { (net, inv) };
            let correct = !swap;
            let ns = b.gate_anon(GateKind::Not, vec![key]);
            let (g1, g2, out) = match kind {
                KeyGateKind::MuxAndOr => {
                    let g1 = b.gate_anon(GateKind::And, vec![key, t]);
                    let g2 = b.gate_anon(GateKind::And, vec![ns, f]);
                    (g1, g2, b.gate_anon(GateKind::Or, vec![g1, g2]))
                }
                KeyGateKind::MuxNand => {
                    let g1 = b.gate_anon(GateKind::Nand, vec![key, t]);
                    let g2 = b.gate_anon(GateKind::Nand, vec![ns, f]);
                    (g1, g2, b.gate_anon(GateKind::Nand, vec![g1, g2]))
                }
                KeyGateKind::MuxNor => {
                    let g1 = b.gate_anon(GateKind::Nor, vec![t, ns]);
                    let g2 = b.gate_anon(GateKind::Nor, vec![f, key]);
                    (g1, g2, b.gate_anon(GateKind::Nor, vec![g1, g2]))
                }
                _ => unreachable!(),
            };
            (out, correct, vec![inv, ns, g1, g2, out])
        }
    };

    b.replace_uses(net, out, &members);
    if let Some(name) = stolen {
        b.name_gate(out, &name)?;
    }
    Ok(correct)
}

/// Nets a locking scheme may pick: not a marker, not a key input, not part
/// of an existing key-gate structure (no key input within two fanin steps),
/// not directly driving an output port, and actually consumed by something.
/// Ascending gate-id order.
pub fn lockable_nets(n: &Netlist) -> Vec<GateId> {
    n.ids()
        .filter(|&id| {
            let g = n.gate(id);
            if g.kind == GateKind::Output || n.is_key_input(id) {
                return false;
            }
            if n.fanouts(id).is_empty() {
                return false;
            }
            if n.fanouts(id).iter().any(|&f| n.is_output_marker(f)) {
                return false;
            }
            let near_key = g.fanins.iter().any(|&f| {
                n.is_key_input(f) || n.gate(f).fanins.iter().any(|&ff| n.is_key_input(ff))
            });
            !near_key
        })
        .collect()
}

pub fn lock_rll(n: &Netlist, k: usize, palette: &Palette, rng: &mut ChaCha8Rng) -> Result<LockRecord> {
    let candidates = lockable_nets(n);
    if candidates.len() < k {
        return Err(Error::TooFewLockableNets { requested: k, available: candidates.len() });
    }
    let picks = rand::seq::index::sample(rng, candidates.len(), k);
    let sites: Vec<(GateId, KeyGateKind)> =
        picks.iter().map(|i| (candidates[i], palette.pick(rng))).collect();
    lock_at_sites(n, &sites, rng)
}

pub fn lock_fll(
    n: &Netlist,
    k: usize,
    palette: &Palette,
    rng: &mut ChaCha8Rng,
    n_patterns: usize,
) -> Result<LockRecord> {
    let candidates = lockable_nets(n);
    if candidates.len() < k {
        return Err(Error::TooFewLockableNets { requested: k, available: candidates.len() });
    }
    if n_patterns == 0 {
        return Err(Error::EmptyPatterns);
    }
    let ranked = rank_by_fault_impact(n, &candidates, rng, n_patterns)?;
    let sites: Vec<(GateId, KeyGateKind)> =
        ranked[..k].iter().map(|&id| (id, palette.pick(rng))).collect();
    lock_at_sites(n, &sites, rng)
}

/// Candidates ordered by descending fault impact: the number of
/// (pattern, output) bit flips caused by forcing the net to 0 plus forcing
/// it to 1 across random patterns. Ties fall back to gate id.
fn rank_by_fault_impact(
    n: &Netlist,
    candidates: &[GateId],
    rng: &mut ChaCha8Rng,
    n_patterns: usize,
) -> Result<Vec<GateId>> {
    let mut topo_pos = vec![0usize; n.len()];
    for (pos, &id) in n.topological_order().iter().enumerate() {
        topo_pos[id.index()] = pos;
    }
    let cones: Vec<(Vec<GateId>, Vec<GateId>)> = candidates
        .iter()
        .map(|&c| {
            let mut cone: Vec<GateId> = n.transitive_fanout(c).into_iter().collect();
            cone.sort_by_key(|g| topo_pos[g.index()]);
            let outs = cone.iter().copied().filter(|&g| n.is_output_marker(g)).collect();
            (cone, outs)
        })
        .collect();

    let slots = n.primary_inputs().len() + n.key_inputs().len();
    let mut scores = vec![0u64; candidates.len()];
    let mut in_cone = vec![false; n.len()];
    let mut faulty = vec![0u64; n.len()];
    let mut left = n_patterns;
    while left > 0 {
        let width = left.min(64);
        let block = PatternBlock::random_narrow(slots, width, rng);
        let good = simulate(n, &block, None)?;
        let m = mask(width);
        for (i, &c) in candidates.iter().enumerate() {
            let (cone, outs) = &cones[i];
            scores[i] +=
                resim_diff_bits(n, &good, cone, outs, c, 0, m, &mut in_cone, &mut faulty);
            scores[i] +=
                resim_diff_bits(n, &good, cone, outs, c, !0, m, &mut in_cone, &mut faulty);
        }
        left -= width;
    }
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(scores[i]), candidates[i]));
    Ok(order.into_iter().map(|i| candidates[i]).collect())
}

pub fn lock_sll(n: &Netlist, k: usize, rng: &mut ChaCha8Rng) -> Result<LockRecord> {
    let palette = Palette::xnor();
    let candidates = lockable_nets(n);
    if candidates.len() < k {
        return Err(Error::TooFewLockableNets { requested: k, available: candidates.len() });
    }
    // Interference proxy: how many already-placed sites live in this
    // candidate's combined fanin/fanout cone. Membership is symmetric.
    let cones: Vec<HashSet<GateId>> = candidates
        .iter()
        .map(|&c| {
            let mut s = n.transitive_fanin(c);
            s.extend(n.transitive_fanout(c));
            s
        })
        .collect();
    let mut pool: Vec<usize> = (0..candidates.len()).collect();
    let mut placed: Vec<GateId> = Vec::with_capacity(k);
    let mut sites = Vec::with_capacity(k);
    for _ in 0..k {
        let best = pool
            .iter()
            .map(|&i| placed.iter().filter(|p| cones[i].contains(p)).count())
            .max()
            .unwrap();
        let tied: Vec<usize> =
            pool.iter().copied().filter(|&i| {
                placed.iter().filter(|p| cones[i].contains(p)).count() == best
            }).collect();
        let chosen = tied[rng.gen_range(0..tied.len())];
        pool.retain(|&i| i != chosen);
        placed.push(candidates[chosen]);
        sites.push((candidates[chosen], palette.pick(rng)));
    }
    lock_at_sites(n, &sites, rng)
}

fn lock_at_sites(
    n: &Netlist,
    sites: &[(GateId, KeyGateKind)],
    rng: &mut ChaCha8Rng,
) -> Result<LockRecord> {
    let start = n.max_key_index().map(|m| m + 1).unwrap_or(0);
    let mut b = NetlistBuilder::from_netlist(n);
    let mut entries = Vec::with_capacity(sites.len());
    let mut out_sites = Vec::with_capacity(sites.len());
    for (i, &(net, kind)) in sites.iter().enumerate() {
        let key = format!("k{}", start + i);
        let net_name = n.gate(net).name.clone();
        let correct = insert_key_gate(&mut b, net, kind, &key, rng)?;
        entries.push((key.clone(), correct));
        out_sites.push(LockSite { key, net, net_name, kind, correct });
    }
    Ok(LockRecord { locked: b.build()?, mapping: KeyMapping::new(entries)?, sites: out_sites })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::{parse_bench, write_bench};
    use crate::sim::equivalence_exhaustive;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn two_gate() -> Netlist {
        parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nu = NAND(a, b)\ny = BUF(u)\n").unwrap()
    }

    #[test]
    fn every_kind_is_transparent_under_its_correct_bit() {
        for kind in KeyGateKind::ALL {
            for seed in 0..4 {
                let n = two_gate();
                let mut b = NetlistBuilder::from_netlist(&n);
                let net = n.find("u").unwrap();
                let correct =
                    insert_key_gate(&mut b, net, kind, "k0", &mut rng(seed)).unwrap();
                let locked = b.build().unwrap();
                let good = KeyMapping::from_packed(&["k0"], correct as u64).unwrap();
                assert!(
                    equivalence_exhaustive(&locked, &n, Some(&good), None).unwrap(),
                    "{kind:?} seed {seed} not transparent"
                );
                if let Some(fixed) = kind.fixed_correct_bit() {
                    assert_eq!(correct, fixed);
                }
            }
        }
    }

    #[test]
    fn mux_kinds_complement_under_the_wrong_bit() {
        // The false path is the inverted net, so the wrong select bit
        // complements the locked net on every pattern.
        for kind in [KeyGateKind::MuxAndOr, KeyGateKind::MuxNand, KeyGateKind::MuxNor] {
            for seed in 0..4 {
                let n = two_gate();
                let mut b = NetlistBuilder::from_netlist(&n);
                let net = n.find("u").unwrap();
                let correct =
                    insert_key_gate(&mut b, net, kind, "k0", &mut rng(seed)).unwrap();
                let locked = b.build().unwrap();
                let wrong = KeyMapping::from_packed(&["k0"], !correct as u64).unwrap();
                let inverted =
                    parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nu = AND(a, b)\ny = BUF(u)\n")
                        .unwrap();
                assert!(
                    equivalence_exhaustive(&locked, &inverted, Some(&wrong), None).unwrap(),
                    "{kind:?} seed {seed} wrong bit is not a clean complement"
                );
            }
        }
    }

    #[test]
    fn and_kind_forces_constant_under_wrong_bit() {
        let n = two_gate();
        let mut b = NetlistBuilder::from_netlist(&n);
        let net = n.find("u").unwrap();
        insert_key_gate(&mut b, net, KeyGateKind::And, "k0", &mut rng(0)).unwrap();
        let locked = b.build().unwrap();
        let wrong = KeyMapping::from_packed(&["k0"], 0).unwrap();
        let zero = parse_bench("INPUT(a)\nINPUT(b)\nOUTPUT(y)\nc = CONST0()\ny = BUF(c)\n").unwrap();
        assert!(equivalence_exhaustive(&locked, &zero, Some(&wrong), None).unwrap());
    }

    #[test]
    fn key_gate_output_takes_over_the_net_name() {
        let n = two_gate();
        let mut b = NetlistBuilder::from_netlist(&n);
        let net = n.find("u").unwrap();
        insert_key_gate(&mut b, net, KeyGateKind::Xor, "k0", &mut rng(0)).unwrap();
        let locked = b.build().unwrap();
        let u = locked.find("u").unwrap();
        assert_eq!(locked.gate(u).kind, GateKind::Xor, "name must follow the spliced net");
        assert_ne!(u, net);
        // The original driver survives under a fresh name and feeds the key-gate.
        assert!(locked.gate(u).fanins.contains(&net));
        assert_eq!(locked.gate(net).kind, GateKind::Nand);
    }

    #[test]
    fn locking_a_primary_input_keeps_its_name() {
        let n = two_gate();
        let mut b = NetlistBuilder::from_netlist(&n);
        let a = n.find("a").unwrap();
        insert_key_gate(&mut b, a, KeyGateKind::Xnor, "k0", &mut rng(1)).unwrap();
        let locked = b.build().unwrap();
        assert_eq!(locked.find("a"), Some(a));
        assert!(locked.is_key_input(locked.find("k0").unwrap()));
        let good = KeyMapping::from_packed(&["k0"], 1).unwrap();
        assert!(equivalence_exhaustive(&locked, &n, Some(&good), None).unwrap());
    }

    #[test]
    fn rll_is_deterministic_and_respects_the_palette() {
        let n = crate::gen::random_netlist(&crate::gen::GenConfig::new(8, 120, 5)).unwrap();
        let a = lock_rll(&n, 16, &Palette::cl_v3(), &mut rng(9)).unwrap();
        let b = lock_rll(&n, 16, &Palette::cl_v3(), &mut rng(9)).unwrap();
        assert_eq!(write_bench(&a.locked), write_bench(&b.locked));
        assert_eq!(a.mapping, b.mapping);
        assert_eq!(a.sites.len(), 16);
        assert_eq!(a.locked.key_inputs().len(), 16);
        let nets: HashSet<GateId> = a.sites.iter().map(|s| s.net).collect();
        assert_eq!(nets.len(), 16, "sites must be distinct");
        for (i, site) in a.sites.iter().enumerate() {
            assert_eq!(site.key, format!("k{i}"));
            assert!(Palette::cl_v3().contains(site.kind));
        }
        assert!(equivalence_exhaustive(&a.locked, &n, Some(&a.mapping), None).unwrap());
    }

    #[test]
    fn rll_zero_keys_is_the_identity() {
        let n = two_gate();
        let rec = lock_rll(&n, 0, &Palette::xnor(), &mut rng(3)).unwrap();
        assert!(rec.mapping.is_empty());
        assert_eq!(write_bench(&rec.locked), write_bench(&n));
    }

    #[test]
    fn rll_rejects_oversized_requests() {
        let n = two_gate();
        match lock_rll(&n, 50, &Palette::xnor(), &mut rng(0)) {
            Err(Error::TooFewLockableNets { requested: 50, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn xnor_palette_without_resynthesis_leaks_the_key() {
        let n = crate::gen::random_netlist(&crate::gen::GenConfig::new(8, 150, 2)).unwrap();
        let rec = lock_rll(&n, 24, &Palette::xnor(), &mut rng(4)).unwrap();
        for site in &rec.sites {
            let kg = rec.locked.key_gate(rec.locked.find(&site.key).unwrap()).unwrap();
            let guess = match rec.locked.gate(kg).kind {
                GateKind::Xor => false,
                GateKind::Xnor => true,
                other => panic!("unexpected key-gate kind {other:?}"),
            };
            assert_eq!(Some(guess), rec.mapping.get(&site.key));
        }
    }

    /// Exhaustive-pattern flip count for forcing one net to 0 and to 1,
    /// evaluated with a scalar walker independent of the lane machinery.
    fn brute_force_impact(n: &Netlist, net: GateId) -> u64 {
        let pis = n.primary_inputs().len();
        let mut score = 0u64;
        for pattern in 0..(1u32 << pis) {
            let eval = |force: Option<bool>| -> Vec<bool> {
                let mut v = vec![false; n.len()];
                for (i, &pi) in n.primary_inputs().iter().enumerate() {
                    v[pi.index()] = (pattern >> i) & 1 == 1;
                }
                for &id in n.topological_order() {
                    let g = n.gate(id);
                    let ins: Vec<bool> = g.fanins.iter().map(|f| v[f.index()]).collect();
                    v[id.index()] = match g.kind {
                        GateKind::Input => v[id.index()],
                        GateKind::Output | GateKind::Buf => ins[0],
                        GateKind::Not => !ins[0],
                        GateKind::Const0 => false,
                        GateKind::Const1 => true,
                        GateKind::And => ins.iter().all(|&x| x),
                        GateKind::Nand => !ins.iter().all(|&x| x),
                        GateKind::Or => ins.iter().any(|&x| x),
                        GateKind::Nor => !ins.iter().any(|&x| x),
                        GateKind::Xor => ins.iter().fold(false, |a, &x| a ^ x),
                        GateKind::Xnor => !ins.iter().fold(false, |a, &x| a ^ x),
                    };
                    if id == net {
                        if let Some(f) = force {
                            v[id.index()] = f;
                        }
                    }
                }
                n.primary_outputs().iter().map(|po| v[po.index()]).collect()
            };
            let base = eval(None);
            for forced in [false, true] {
                let got = eval(Some(forced));
                score += base.iter().zip(&got).filter(|(a, b)| a != b).count() as u64;
            }
        }
        score
    }

    #[test]
    fn fll_ranking_matches_the_exhaustive_impact_oracle() {
        // fat reaches three ports, thin one; cold's cone dies before any
        // port. Gaps are wide enough that sampled ranking must agree.
        let text = "INPUT(a)\nINPUT(b)\nINPUT(c)\nOUTPUT(y1)\nOUTPUT(y2)\nOUTPUT(y3)\nOUTPUT(y4)\n\
                    fat = NAND(a, b)\nthin = NAND(b, c)\ncold = OR(a, c)\n\
                    y1 = XOR(fat, c)\ny2 = XNOR(fat, b)\ny4 = XOR(fat, b)\ny3 = XOR(thin, a)\n\
                    dead = NAND(cold, b)\n";
        let n = parse_bench(text).unwrap();
        let candidates = lockable_nets(&n);
        let mut oracle: Vec<(GateId, u64)> =
            candidates.iter().map(|&c| (c, brute_force_impact(&n, c))).collect();
        oracle.sort_by_key(|&(id, s)| (std::cmp::Reverse(s), id));
        let fat = n.find("fat").unwrap();
        let cold = n.find("cold").unwrap();
        assert_eq!(oracle[0].0, fat, "oracle: {oracle:?}");
        assert_eq!(oracle.last().unwrap(), &(cold, 0), "oracle: {oracle:?}");
        let want: Vec<GateId> = oracle[..3].iter().map(|&(id, _)| id).collect();

        let rec = lock_fll(&n, 3, &Palette::xnor(), &mut rng(6), 512).unwrap();
        let got: Vec<GateId> = rec.sites.iter().map(|s| s.net).collect();
        assert_eq!(got, want);
        assert!(equivalence_exhaustive(&rec.locked, &n, Some(&rec.mapping), None).unwrap());
    }

    #[test]
    fn sll_never_splits_across_disconnected_chains() {
        // Two disjoint cones. Wherever the first (random) site lands, the
        // greedy second pick must share its cone, so both sites always sit
        // in the same chain.
        let text = "INPUT(a)\nINPUT(b)\nOUTPUT(y1)\nOUTPUT(y2)\n\
                    c1 = NOT(a)\nc2 = NAND(c1, a)\ny1 = BUF(c2)\n\
                    d1 = NOT(b)\nd2 = NOR(d1, b)\ny2 = BUF(d2)\n";
        let n = parse_bench(text).unwrap();
        let chain1: HashSet<&str> = ["a", "c1", "c2"].into();
        let chain2: HashSet<&str> = ["b", "d1", "d2"].into();
        for seed in 0..8 {
            let rec = lock_sll(&n, 2, &mut rng(seed)).unwrap();
            let names: HashSet<&str> =
                rec.sites.iter().map(|s| s.net_name.as_deref().unwrap()).collect();
            assert!(
                names.is_subset(&chain1) || names.is_subset(&chain2),
                "seed {seed} split across chains: {names:?}"
            );
            assert!(equivalence_exhaustive(&rec.locked, &n, Some(&rec.mapping), None).unwrap());
            for site in &rec.sites {
                assert!(matches!(site.kind, KeyGateKind::Xor | KeyGateKind::Xnor));
            }
        }
    }

    #[test]
    fn relocking_continues_key_numbering() {
        let n = crate::gen::random_netlist(&crate::gen::GenConfig::new(8, 120, 8)).unwrap();
        let first = lock_rll(&n, 4, &Palette::xnor(), &mut rng(1)).unwrap();
        let second = lock_rll(&first.locked, 4, &Palette::xnor(), &mut rng(2)).unwrap();
        let names: Vec<&str> = second.mapping.names().collect();
        assert_eq!(names, vec!["k4", "k5", "k6", "k7"]);
        assert_eq!(second.locked.key_inputs().len(), 8);
    }

    #[test]
    fn lockable_nets_skip_key_structures_and_port_drivers() {
        let n = two_gate();
        let rec = lock_rll(&n, 1, &Palette::cl_v1(), &mut rng(5)).unwrap();
        let pool = lockable_nets(&rec.locked);
        let kg = rec.locked.key_gate(rec.locked.find("k0").unwrap()).unwrap();
        assert!(!pool.contains(&kg));
        for &id in &pool {
            assert!(!rec.locked.fanouts(id).iter().any(|&f| rec.locked.is_output_marker(f)));
        }
    }

    #[test]
    fn palette_parse_round_trips() {
        for name in ["xnor", "cl_v1", "cl_v2", "cl_v3", "cl_v4"] {
            let p = Palette::parse(name).unwrap();
            assert_eq!(p.label(), name);
        }
        assert!(Palette::parse("frob").is_err());
        assert!(Palette::new(&[]).is_err());
    }
}
