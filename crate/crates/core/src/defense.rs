//! Confusion-driven locking: half the key budget goes in through a normal
//! scheme, a rewrite pass runs, and the observed local transformations are
//! harvested into a change dictionary. The second half is then placed so
//! that every new key-gate's surroundings imitate either a structure the
//! rewrite demonstrably produces (so it looks like it changed when it
//! never did) or a structure one registered rewrite rule away from a
//! never-changed shape (so a later optimization flips its apparent
//! history). Change-prediction models trained on rewrite behavior then see
//! identical subgraphs carrying contradictory labels.

use std::collections::HashSet;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::features::{build_dictionary, extract_samples, ChangeDictionary};
use crate::lock::{
    insert_key_gate, lock_with, lockable_nets, KeyGateKind, LockRecord, LockSite, Palette, Scheme,
};
use crate::netlist::{GateId, GateKind, KeyMapping, Netlist, NetlistBuilder};
use crate::rewrite::resynthesize;
use crate::sim::{simulate, PatternBlock};

#[derive(Debug, Clone)]
pub struct UnsailConfig {
    /// Total key bits; split evenly between the two phases.
    pub k: usize,
    pub scheme: Scheme,
    pub palette: Palette,
    /// Rewrite effort for the harvesting pass. Zero changes nothing and
    /// therefore cannot produce a dictionary.
    pub effort: usize,
    pub seed: u64,
    /// Keep inserting at already-matched templates when fresh ones run out.
    pub fill_up: bool,
}

impl UnsailConfig {
    pub fn new(k: usize, scheme: Scheme, palette: Palette, effort: usize, seed: u64) -> UnsailConfig {
        UnsailConfig { k, scheme, palette, effort, seed, fill_up: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementMethod {
    /// Site reproduces a dictionary entry's post-rewrite shape.
    Dictionary,
    /// Site is one rewrite rule away from a never-changed shape.
    UnchangedTarget,
    /// Second-pass insertion reusing an already-matched template.
    FillUp,
}

/// How one confusion key-gate found its home.
#[derive(Debug, Clone)]
pub struct Placement {
    pub key: String,
    pub method: PlacementMethod,
    /// The imitated type sequence (a dictionary post-sequence or a member
    /// of the unchanged set).
    pub seq: Vec<GateKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct InjectionStats {
    pub dictionary_matched: usize,
    pub u_targeted: usize,
    pub fill_up: usize,
}

impl InjectionStats {
    pub fn total(&self) -> usize {
        self.dictionary_matched + self.u_targeted + self.fill_up
    }
}

#[derive(Debug, Clone)]
pub struct UnsailOutcome {
    /// Final locked netlist, full key mapping, all sites both phases.
    pub record: LockRecord,
    pub dictionary: ChangeDictionary,
    /// First-phase locked netlist before the rewrite ran: the ground
    /// truth for which key neighborhoods the rewrite actually changed.
    pub phase1: Netlist,
    /// The netlist as it stood when the confusion gates went in (first
    /// phase locked, then rewritten): the reference point for analyzing
    /// what the defense changed.
    pub staged: Netlist,
    pub placements: Vec<Placement>,
}

pub fn injection_stats(outcome: &UnsailOutcome) -> InjectionStats {
    let mut s = InjectionStats::default();
    for p in &outcome.placements {
        match p.method {
            PlacementMethod::Dictionary => s.dictionary_matched += 1,
            PlacementMethod::UnchangedTarget => s.u_targeted += 1,
            PlacementMethod::FillUp => s.fill_up += 1,
        }
    }
    s
}

// ---------------------------------------------------------------------
// Insertion shapes
// ---------------------------------------------------------------------

/// What physically goes onto a net.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Shape {
    Plain(KeyGateKind),
    /// `NOT(root(net, key))`: shows `root` to a structural scan while
    /// computing the opposite function. One inverter-absorption rule away
    /// from the plain gate of the opposite kind.
    Expanded(GateKind),
    /// Multiplexer composite built with the key inverter created last, so
    /// the key's newest consumer (the sampled root) is the inverter. This
    /// is how rewritten first-phase composites usually read, since merging
    /// tends to eat the select leg before the inverter.
    MuxNsLast(KeyGateKind),
}

/// What happens after the probe shape is confirmed at a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Commit {
    SameAsProbe,
    /// Commit the expanded form of the opposite root: the absorb rule maps
    /// it onto exactly the probed (unchanged-set) shape.
    ExpandedFlip,
    /// Commit the probe shape with a double inverter on its output: the
    /// double-negation rule maps it back onto the probed shape.
    ProbeThenDoubleNot,
}

struct Template {
    seq: Vec<GateKind>,
    from_dict: bool,
    weight: usize,
    options: Vec<(Shape, Commit)>,
}

/// Shapes whose key-gate sample root equals `root`, preferred order.
fn dict_shapes(root: GateKind) -> Vec<(Shape, Commit)> {
    use GateKind::*;
    let shapes: Vec<Shape> = match root {
        Xor => vec![Shape::Plain(KeyGateKind::Xor), Shape::Expanded(Xor)],
        Xnor => vec![Shape::Plain(KeyGateKind::Xnor), Shape::Expanded(Xnor)],
        And => vec![Shape::Plain(KeyGateKind::And), Shape::Plain(KeyGateKind::MuxAndOr)],
        Or => vec![Shape::Plain(KeyGateKind::Or)],
        Nand => vec![Shape::Plain(KeyGateKind::MuxNand)],
        Nor => vec![Shape::Plain(KeyGateKind::MuxNor)],
        Not => vec![
            Shape::MuxNsLast(KeyGateKind::MuxAndOr),
            Shape::MuxNsLast(KeyGateKind::MuxNand),
            Shape::MuxNsLast(KeyGateKind::MuxNor),
        ],
        _ => vec![],
    };
    shapes.into_iter().map(|s| (s, Commit::SameAsProbe)).collect()
}

/// For unchanged-set targets the probe must be the plain shape (the rule
/// application has to land exactly on the probed structure); the commit
/// then disguises it.
fn u_shapes(root: GateKind) -> Vec<(Shape, Commit)> {
    use GateKind::*;
    match root {
        Xor => vec![(Shape::Plain(KeyGateKind::Xor), Commit::ExpandedFlip)],
        Xnor => vec![(Shape::Plain(KeyGateKind::Xnor), Commit::ExpandedFlip)],
        And => vec![
            (Shape::Plain(KeyGateKind::And), Commit::ProbeThenDoubleNot),
            (Shape::Plain(KeyGateKind::MuxAndOr), Commit::ProbeThenDoubleNot),
        ],
        Or => vec![(Shape::Plain(KeyGateKind::Or), Commit::ProbeThenDoubleNot)],
        Nand => vec![(Shape::Plain(KeyGateKind::MuxNand), Commit::ProbeThenDoubleNot)],
        Nor => vec![(Shape::Plain(KeyGateKind::MuxNor), Commit::ProbeThenDoubleNot)],
        _ => vec![],
    }
}

fn flip_xor(root: GateKind) -> GateKind {
    match root {
        GateKind::Xor => GateKind::Xnor,
        GateKind::Xnor => GateKind::Xor,
        _ => unreachable!("only X(N)OR shapes expand"),
    }
}

/// The key-gate kind a site record carries, by function.
fn functional_kind(shape: Shape) -> KeyGateKind {
    match shape {
        Shape::Plain(k) | Shape::MuxNsLast(k) => k,
        Shape::Expanded(GateKind::Xor) => KeyGateKind::Xnor,
        Shape::Expanded(GateKind::Xnor) => KeyGateKind::Xor,
        Shape::Expanded(_) => unreachable!(),
    }
}

fn insert_expanded(
    b: &mut NetlistBuilder,
    net: GateId,
    root: GateKind,
    key_name: &str,
) -> Result<bool> {
    let key = b.key_input(key_name)?;
    let stolen = if b.gate(net).kind == GateKind::Input { None } else { b.steal_name(net) };
    let inner = b.gate_anon(root, vec![net, key]);
    let out = b.gate_anon(GateKind::Not, vec![inner]);
    b.replace_uses(net, out, &[inner]);
    if let Some(name) = stolen {
        b.name_gate(out, &name)?;
    }
    // NOT over XOR computes XNOR: transparent at 1. And vice versa.
    Ok(root == GateKind::Xor)
}

/// Same function and leg randomization as the stock composite insertion,
/// but the key inverter is the structure's newest key consumer.
fn insert_mux_ns_last(
    b: &mut NetlistBuilder,
    net: GateId,
    kind: KeyGateKind,
    key_name: &str,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    let key = b.key_input(key_name)?;
    let stolen = if b.gate(net).kind == GateKind::Input { None } else { b.steal_name(net) };
    let inv = b.gate_anon(GateKind::Not, vec![net]);
    let swap: bool = rng.gen();
    let (t, f) = if swap { (inv, net) } else { (net, inv) };
    let correct = !swap;
    let (g1, ns, g2, out) = match kind {
        KeyGateKind::MuxAndOr => {
            let g1 = b.gate_anon(GateKind::And, vec![key, t]);
            let ns = b.gate_anon(GateKind::Not, vec![key]);
            let g2 = b.gate_anon(GateKind::And, vec![ns, f]);
            (g1, ns, g2, b.gate_anon(GateKind::Or, vec![g1, g2]))
        }
        KeyGateKind::MuxNand => {
            let g1 = b.gate_anon(GateKind::Nand, vec![key, t]);
            let ns = b.gate_anon(GateKind::Not, vec![key]);
            let g2 = b.gate_anon(GateKind::Nand, vec![ns, f]);
            (g1, ns, g2, b.gate_anon(GateKind::Nand, vec![g1, g2]))
        }
        KeyGateKind::MuxNor => {
            let g2 = b.gate_anon(GateKind::Nor, vec![f, key]);
            let ns = b.gate_anon(GateKind::Not, vec![key]);
            let g1 = b.gate_anon(GateKind::Nor, vec![t, ns]);
            (g1, ns, g2, b.gate_anon(GateKind::Nor, vec![g1, g2]))
        }
        _ => return Err(Error::Invalid("inverter-last form exists for composites only".into())),
    };
    b.replace_uses(net, out, &[inv, g1, ns, g2, out]);
    if let Some(name) = stolen {
        b.name_gate(out, &name)?;
    }
    Ok(correct)
}

fn apply_shape(
    b: &mut NetlistBuilder,
    net: GateId,
    shape: Shape,
    key_name: &str,
    rng: &mut ChaCha8Rng,
) -> Result<bool> {
    match shape {
        Shape::Plain(kind) => insert_key_gate(b, net, kind, key_name, rng),
        Shape::Expanded(root) => insert_expanded(b, net, root, key_name),
        Shape::MuxNsLast(kind) => insert_mux_ns_last(b, net, kind, key_name, rng),
    }
}

/// Feeds `out` through two fresh inverters, moving its name (and all its
/// consumers) to the far end.
fn wrap_double_not(b: &mut NetlistBuilder, out: GateId) -> Result<()> {
    let stolen = b.steal_name(out);
    let n1 = b.gate_anon(GateKind::Not, vec![out]);
    let n2 = b.gate_anon(GateKind::Not, vec![n1]);
    b.replace_uses(out, n2, &[n1]);
    if let Some(name) = stolen {
        b.name_gate(n2, &name)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------
// Site scanning
// ---------------------------------------------------------------------

/// The sub-3 type sequence a named key's gate shows.
fn kg_sample(n: &Netlist, key_name: &str) -> Result<Vec<GateKind>> {
    let key = n.find(key_name).ok_or_else(|| Error::UnknownSignal(key_name.to_string()))?;
    let kg = n.key_gate(key)?;
    Ok(n.neighborhood(kg, 3)?.into_iter().map(|id| n.gate(id).kind).collect())
}

/// Everything inside any existing key-gate's size-6 region, plus the key
/// inputs themselves. Phase-two insertions keep out so no earlier
/// key-gate's recorded sample shifts under them.
fn protected_regions(n: &Netlist) -> Result<HashSet<GateId>> {
    let mut p = HashSet::new();
    for &k in n.key_inputs() {
        let kg = n.key_gate(k)?;
        p.extend(n.neighborhood(kg, 6)?);
        p.insert(k);
    }
    Ok(p)
}

/// Cheap structural check before paying for a probe insertion: position 0
/// is the shape's root by construction; position 1 is the inserted
/// structure's single internal fanout for composite shapes, or the net's
/// lowest-id surviving consumer for plain single gates.
fn prefilter(work: &Netlist, net: GateId, shape: Shape, seq: &[GateKind]) -> bool {
    let predicted = match shape {
        Shape::Plain(KeyGateKind::MuxAndOr) => GateKind::Or,
        Shape::Plain(KeyGateKind::MuxNand) => GateKind::Nand,
        Shape::Plain(KeyGateKind::MuxNor) => GateKind::Nor,
        Shape::MuxNsLast(KeyGateKind::MuxAndOr) => GateKind::And,
        Shape::MuxNsLast(KeyGateKind::MuxNand) => GateKind::Nand,
        Shape::MuxNsLast(KeyGateKind::MuxNor) => GateKind::Nor,
        Shape::MuxNsLast(_) => return false,
        Shape::Expanded(_) => GateKind::Not,
        Shape::Plain(_) => match work.logic_fanouts(net).next() {
            Some(c) => work.gate(c).kind,
            None => return false,
        },
    };
    seq[1] == predicted
}

pub fn unsail_lock(n: &Netlist, cfg: &UnsailConfig) -> Result<UnsailOutcome> {
    if cfg.k == 0 || !cfg.k.is_multiple_of(2) {
        return Err(Error::OddKeyCount(cfg.k));
    }
    let half = cfg.k / 2;

    // Phase one: ordinary locking, then the rewrite whose behavior the
    // confusion gates will imitate.
    let mut rng1 = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 1));
    let phase1 = lock_with(n, cfg.scheme, half, &cfg.palette, &mut rng1)?;
    let staged = resynthesize(&phase1.locked, cfg.effort, derive_seed(cfg.seed, 2))?;
    let pre = extract_samples(&phase1.locked, &[3])?;
    let post = extract_samples(&staged, &[3])?;
    let dictionary = build_dictionary(&pre, &post)?;
    if dictionary.is_empty() {
        return Err(Error::EmptyDictionary);
    }

    // Dictionary templates first, strongest evidence leading; then the
    // unchanged-set targets. Entry iteration is already sequence-ordered,
    // and the sort is stable.
    let mut templates: Vec<Template> = Vec::new();
    for (seq, pres) in dictionary.entries() {
        let options = dict_shapes(seq[0]);
        if seq.len() == 3 && !options.is_empty() {
            let weight = pres.values().sum();
            templates.push(Template { seq: seq.clone(), from_dict: true, weight, options });
        }
    }
    templates.sort_by_key(|t| std::cmp::Reverse(t.weight));
    for seq in dictionary.unchanged() {
        let options = u_shapes(seq[0]);
        if seq.len() == 3 && !options.is_empty() {
            templates.push(Template { seq: seq.clone(), from_dict: false, weight: 0, options });
        }
    }

    let mut sites = lockable_nets(&staged);
    let mut rng2 = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, 3));
    sites.shuffle(&mut rng2);

    let next_key = staged.max_key_index().map(|m| m + 1).unwrap_or(0);
    let mut work = staged.clone();
    let mut protected = protected_regions(&work)?;
    let mut consumed: HashSet<GateId> = HashSet::new();
    let mut used = vec![false; templates.len()];
    let mut placements = Vec::with_capacity(half);
    let mut phase2_sites: Vec<LockSite> = Vec::with_capacity(half);
    let mut phase2_bits: Vec<(String, bool)> = Vec::with_capacity(half);

    // fill_up pass reuses matched templates; the main pass spends each
    // template once so the imitations stay diverse.
    for fill_pass in [false, true] {
        if !fill_pass && placements.len() == half {
            break;
        }
        if fill_pass && (!cfg.fill_up || placements.len() == half) {
            break;
        }
        'sites: for &w in &sites {
            if placements.len() == half {
                break;
            }
            if consumed.contains(&w)
                || protected.contains(&w)
                || work.logic_fanouts(w).any(|c| protected.contains(&c))
            {
                continue;
            }
            for ti in 0..templates.len() {
                if used[ti] != fill_pass {
                    continue;
                }
                let t = &templates[ti];
                for &(shape, commit) in &t.options {
                    if !prefilter(&work, w, shape, &t.seq) {
                        continue;
                    }
                    let key_name = format!("k{}", next_key + placements.len());
                    // Probe and commit replay the same stream so composite
                    // leg swaps cannot diverge between them.
                    let shape_seed = derive_seed(cfg.seed, 0x9000 + (next_key + placements.len()) as u64);
                    let mut pb = NetlistBuilder::from_netlist(&work);
                    let mut prng = ChaCha8Rng::seed_from_u64(shape_seed);
                    if apply_shape(&mut pb, w, shape, &key_name, &mut prng).is_err() {
                        continue;
                    }
                    let probed = match pb.build() {
                        Ok(p) => p,
                        Err(_) => continue,
                    };
                    if kg_sample(&probed, &key_name)? != t.seq {
                        continue;
                    }

                    let commit_shape = match commit {
                        Commit::SameAsProbe | Commit::ProbeThenDoubleNot => shape,
                        Commit::ExpandedFlip => Shape::Expanded(flip_xor(t.seq[0])),
                    };
                    let net_name = work.gate(w).name.clone();
                    let mut cb = NetlistBuilder::from_netlist(&work);
                    let mut crng = ChaCha8Rng::seed_from_u64(shape_seed);
                    let bit = apply_shape(&mut cb, w, commit_shape, &key_name, &mut crng)?;
                    if commit == Commit::ProbeThenDoubleNot {
                        let structure_out = GateId(cb.len() as u32 - 1);
                        wrap_double_not(&mut cb, structure_out)?;
                    }
                    work = cb.build()?;

                    consumed.insert(w);
                    let key_id = work.find(&key_name).expect("key just inserted");
                    let kg = work.key_gate(key_id)?;
                    protected.extend(work.neighborhood(kg, 6)?);
                    protected.insert(key_id);
                    phase2_sites.push(LockSite {
                        key: key_name.clone(),
                        net: w,
                        net_name,
                        kind: functional_kind(commit_shape),
                        correct: bit,
                    });
                    phase2_bits.push((key_name.clone(), bit));
                    placements.push(Placement {
                        key: key_name,
                        method: if fill_pass {
                            PlacementMethod::FillUp
                        } else if t.from_dict {
                            PlacementMethod::Dictionary
                        } else {
                            PlacementMethod::UnchangedTarget
                        },
                        seq: t.seq.clone(),
                    });
                    used[ti] = true;
                    continue 'sites;
                }
            }
        }
    }

    if placements.len() < half {
        return Err(Error::InsufficientSites { placed: placements.len(), needed: half });
    }

    let mut entries: Vec<(String, bool)> =
        phase1.mapping.iter().map(|(k, b)| (k.to_string(), b)).collect();
    entries.extend(phase2_bits);
    let mapping = KeyMapping::new(entries)?;
    let mut all_sites = phase1.sites;
    all_sites.extend(phase2_sites);

    debug_assert!(correct_key_preserved(n, &work, &mapping), "confusion pass broke the function");

    Ok(UnsailOutcome {
        record: LockRecord { locked: work, mapping, sites: all_sites },
        dictionary,
        phase1: phase1.locked,
        staged,
        placements,
    })
}

/// Quick randomized agreement check used by debug builds; tests do the
/// exhaustive version.
fn correct_key_preserved(original: &Netlist, locked: &Netlist, mapping: &KeyMapping) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(0xD1FF);
    for _ in 0..2 {
        let block = PatternBlock::random(original.primary_inputs().len(), &mut rng);
        let lanes_b: Vec<u64> = locked
            .pi_names()
            .map(|p| {
                let slot = original.pi_names().position(|q| q == p).expect("same inputs");
                block.lane(slot).expect("lane exists")
            })
            .collect();
        let va = match simulate(original, &block, None) {
            Ok(v) => v,
            Err(_) => return false,
        };
        let vb = match simulate(locked, &PatternBlock::from_lanes(lanes_b, 64), Some(mapping)) {
            Ok(v) => v,
            Err(_) => return false,
        };
        for (port, ma, _) in original.po_ports() {
            let Some((_, mb, _)) = locked.po_ports().find(|(p, _, _)| *p == port) else {
                return false;
            };
            if va[ma.index()] != vb[mb.index()] {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{label_changes, ChangeLabel, SubgraphSample};
    use crate::gen::{random_netlist, GenConfig};
    use crate::sim::equivalence_exhaustive;

    fn cfg(k: usize, seed: u64) -> UnsailConfig {
        UnsailConfig::new(k, Scheme::Rll, Palette::xnor(), 2, seed)
    }

    #[test]
    fn rejects_odd_and_zero_key_budgets() {
        let n = random_netlist(&GenConfig::new(8, 100, 1)).unwrap();
        assert!(matches!(unsail_lock(&n, &cfg(7, 0)), Err(Error::OddKeyCount(7))));
        assert!(matches!(unsail_lock(&n, &cfg(0, 0)), Err(Error::OddKeyCount(0))));
    }

    #[test]
    fn rejects_sll_with_a_compound_palette() {
        let n = random_netlist(&GenConfig::new(8, 100, 1)).unwrap();
        let mut c = cfg(8, 0);
        c.scheme = Scheme::Sll;
        c.palette = Palette::cl_v1();
        assert!(matches!(unsail_lock(&n, &c), Err(Error::Invalid(_))));
    }

    #[test]
    fn zero_effort_surfaces_the_empty_dictionary_error() {
        let n = random_netlist(&GenConfig::new(8, 100, 2)).unwrap();
        let mut c = cfg(8, 3);
        c.effort = 0;
        assert!(matches!(unsail_lock(&n, &c), Err(Error::EmptyDictionary)));
    }

    #[test]
    fn correct_key_restores_function_across_seeds() {
        // Modest input count so equivalence stays exhaustive; enough gates
        // that every seed finds its imitation sites.
        let n = random_netlist(&GenConfig::new(8, 250, 4)).unwrap();
        for seed in 0..10 {
            let out = unsail_lock(&n, &cfg(8, seed)).unwrap();
            assert!(
                equivalence_exhaustive(&n, &out.record.locked, None, Some(&out.record.mapping))
                    .unwrap(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn correct_key_holds_for_every_scheme_and_palette() {
        let n = random_netlist(&GenConfig::new(8, 300, 5)).unwrap();
        for scheme in [Scheme::Rll, Scheme::Fll, Scheme::Sll] {
            let palettes: &[Palette] = if scheme == Scheme::Sll {
                &[Palette::xnor()]
            } else {
                &[Palette::xnor(), Palette::cl_v2(), Palette::cl_v4()]
            };
            for palette in palettes {
                let c = UnsailConfig::new(8, scheme, palette.clone(), 2, 11);
                let out = unsail_lock(&n, &c).unwrap();
                assert!(
                    equivalence_exhaustive(&n, &out.record.locked, None, Some(&out.record.mapping))
                        .unwrap(),
                    "{scheme:?} {}",
                    palette.label()
                );
            }
        }
    }

    #[test]
    fn keys_number_through_both_phases_and_stats_partition_the_budget() {
        let n = random_netlist(&GenConfig::new(8, 150, 6)).unwrap();
        let out = unsail_lock(&n, &cfg(8, 9)).unwrap();
        let names: Vec<&str> = out.record.mapping.names().collect();
        assert_eq!(names, ["k0", "k1", "k2", "k3", "k4", "k5", "k6", "k7"]);
        assert_eq!(out.record.sites.len(), 8);
        assert_eq!(out.placements.len(), 4);
        for (p, s) in out.placements.iter().zip(&out.record.sites[4..]) {
            assert_eq!(p.key, s.key);
        }
        let stats = injection_stats(&out);
        assert_eq!(stats.total(), 4);
        let locked_keys: Vec<&str> = out.record.locked.key_names().collect();
        assert_eq!(locked_keys, names);
    }

    #[test]
    fn dictionary_matched_gates_reproduce_their_entry_in_the_final_netlist() {
        let n = random_netlist(&GenConfig::new(8, 200, 7)).unwrap();
        let mut found = 0;
        for seed in 0..6 {
            let out = unsail_lock(&n, &cfg(12, seed)).unwrap();
            for p in &out.placements {
                if p.method != PlacementMethod::Dictionary {
                    continue;
                }
                found += 1;
                // The imitation is exact: the key-gate's sample in the
                // shipped netlist is a sequence the rewrite pass was seen
                // to produce, so it reads as changed when it never was.
                let sample = kg_sample(&out.record.locked, &p.key).unwrap();
                assert_eq!(sample, p.seq);
                assert!(out.dictionary.lookup(&p.seq).is_some());
            }
        }
        assert!(found > 0, "no dictionary-matched placement in six runs");
    }

    #[test]
    fn unchanged_targets_wear_the_opposite_root_one_rule_from_their_cover() {
        let n = random_netlist(&GenConfig::new(8, 200, 8)).unwrap();
        let mut found = 0;
        for seed in 0..8 {
            let out = unsail_lock(&n, &cfg(12, seed)).unwrap();
            for p in &out.placements {
                if p.method != PlacementMethod::UnchangedTarget {
                    continue;
                }
                found += 1;
                assert!(out.dictionary.is_unchanged(&p.seq));
                let sample = kg_sample(&out.record.locked, &p.key).unwrap();
                assert_ne!(sample, p.seq, "the shipped shape must differ from its cover");
                match p.seq[0] {
                    GateKind::Xor => assert_eq!(sample[0], GateKind::Xnor),
                    GateKind::Xnor => assert_eq!(sample[0], GateKind::Xor),
                    _ => assert!(sample.contains(&GateKind::Not)),
                }
            }
        }
        if found == 0 {
            // Unchanged targets are opportunistic; at least confirm the
            // mechanism exists by checking the shape helpers.
            assert!(!u_shapes(GateKind::Xor).is_empty());
        }
    }

    #[test]
    fn fill_up_reuses_matched_templates_when_fresh_ones_run_out() {
        // Small circuit, large second phase: more insertions than distinct
        // templates, forcing the fill-up pass.
        let n = random_netlist(&GenConfig::new(7, 90, 9)).unwrap();
        let mut exercised = false;
        for seed in 0..12 {
            let Ok(out) = unsail_lock(&n, &cfg(16, seed)) else { continue };
            let stats = injection_stats(&out);
            assert_eq!(stats.total(), 8, "seed {seed}");
            if stats.fill_up > 0 {
                exercised = true;
                let matched: Vec<&Vec<GateKind>> = out
                    .placements
                    .iter()
                    .filter(|p| p.method != PlacementMethod::FillUp)
                    .map(|p| &p.seq)
                    .collect();
                for p in &out.placements {
                    if p.method == PlacementMethod::FillUp {
                        assert!(matched.contains(&&p.seq), "fill-up must reuse a matched template");
                    }
                }
            }
        }
        assert!(exercised, "no run needed the fill-up pass");
    }

    #[test]
    fn disabling_fill_up_surfaces_insufficient_sites() {
        let n = random_netlist(&GenConfig::new(7, 90, 9)).unwrap();
        let mut saw_error = false;
        for seed in 0..12 {
            let mut c = cfg(16, seed);
            c.fill_up = false;
            match unsail_lock(&n, &c) {
                Err(Error::InsufficientSites { placed, needed }) => {
                    saw_error = true;
                    assert!(placed < needed);
                    assert_eq!(needed, 8);
                }
                Ok(out) => assert_eq!(injection_stats(&out).fill_up, 0),
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
        assert!(saw_error, "every seed placed all gates without fill-up");
    }

    #[test]
    fn deterministic_per_seed() {
        let n = random_netlist(&GenConfig::new(8, 150, 10)).unwrap();
        let a = unsail_lock(&n, &cfg(8, 42)).unwrap();
        let b = unsail_lock(&n, &cfg(8, 42)).unwrap();
        assert_eq!(
            crate::bench::write_bench(&a.record.locked),
            crate::bench::write_bench(&b.record.locked)
        );
        assert_eq!(a.record.mapping.to_key_file(), b.record.mapping.to_key_file());
        let c = unsail_lock(&n, &cfg(8, 43)).unwrap();
        assert_ne!(
            crate::bench::write_bench(&a.record.locked),
            crate::bench::write_bench(&c.record.locked)
        );
    }

    #[test]
    fn an_identical_sequence_carries_both_labels_somewhere_in_the_grid() {
        // The point of the whole exercise: after an adversary-side rewrite,
        // some type sequence appears both as Changed and Unchanged.
        let n = random_netlist(&GenConfig::new(8, 200, 11)).unwrap();
        let mut confusion_seen = false;
        for seed in 0..6 {
            let out = unsail_lock(&n, &cfg(12, seed)).unwrap();
            // Per-key insertion-time reference: phase-one keys as they
            // stood when confusion gates went in, phase-two keys as built.
            let staged_pre = extract_samples(&out.staged, &[3]).unwrap();
            let final_pre = extract_samples(&out.record.locked, &[3]).unwrap();
            let phase1_names: HashSet<&str> =
                out.staged.key_names().collect();
            let mut pre: Vec<SubgraphSample> = staged_pre;
            pre.extend(
                final_pre.into_iter().filter(|s| !phase1_names.contains(s.key_name.as_str())),
            );
            let adversary =
                resynthesize(&out.record.locked, 2, derive_seed(999, seed)).unwrap();
            let post = extract_samples(&adversary, &[3]).unwrap();
            let labeled = label_changes(&pre, &post).unwrap();
            let mut by_seq: std::collections::HashMap<&[GateKind], HashSet<ChangeLabel>> =
                std::collections::HashMap::new();
            for s in &labeled {
                by_seq.entry(&s.type_sequence).or_default().insert(s.label.unwrap());
            }
            if by_seq.values().any(|labels| labels.len() == 2) {
                confusion_seen = true;
                break;
            }
        }
        assert!(confusion_seen, "no sequence carried both labels in six runs");
    }
}
