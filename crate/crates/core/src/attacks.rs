//! Oracle-less key recovery. Three independent attack families share one
//! report format: SAIL (change prediction + subgraph reconstruction +
//! key-gate type rules), SWEEP-style constant-propagation report deltas,
//! and redundant-fault counting. None of them ever queries a working
//! chip; everything is read off the locked netlist.

pub mod forest;
pub mod recon;
mod redundancy;
mod sweep;

pub use forest::{RandomForest, DEFAULT_TREES};
pub use recon::{ReconModel, ReconPair};
pub use redundancy::{redundancy_attack, redundancy_counts};
pub use sweep::sweep_attack;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::features::{
    extract_samples, label_changes, ChangeLabel, DatasetRow, SubgraphSample, VOCAB,
};
use crate::lock::{lock_with, Palette, Scheme};
use crate::netlist::{GateId, GateKind, KeyMapping, Netlist};
use crate::rewrite::resynthesize;

/// One key-input's verdict. `guess` of `None` is an abstention; the
/// scoring convention counts it as incorrect.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyGuess {
    pub key: String,
    pub guess: Option<bool>,
    pub truth: bool,
    pub correct: bool,
    pub confidence: f64,
    pub stage: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub guesses: Vec<KeyGuess>,
    /// Decided-and-correct over the full key length.
    pub accuracy: f64,
    pub ml1_accuracy: Option<f64>,
    pub ml2_accuracy: Option<f64>,
    pub combined_accuracy: Option<f64>,
}

pub const REPORT_HEADER: &str = "key,guess,truth,correct,stage";

impl AttackReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# abstentions (guess X) count as incorrect; accuracy divides by the full key length\n");
        out.push_str(REPORT_HEADER);
        out.push('\n');
        for g in &self.guesses {
            let guess = match g.guess {
                Some(true) => "1",
                Some(false) => "0",
                None => "X",
            };
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                g.key,
                guess,
                g.truth as u8,
                g.correct as u8,
                g.stage
            ));
        }
        out
    }
}

/// Fills in truth and correctness for raw guesses and computes the overall
/// accuracy. The guess set must name exactly the keys in `truth`.
fn finish(mut guesses: Vec<KeyGuess>, truth: &KeyMapping) -> Result<AttackReport> {
    if guesses.len() != truth.len() {
        return Err(Error::KeyMismatch(format!(
            "guessed {} keys, truth has {}",
            guesses.len(),
            truth.len()
        )));
    }
    let mut correct = 0usize;
    for g in guesses.iter_mut() {
        let bit = truth
            .get(&g.key)
            .ok_or_else(|| Error::KeyMismatch(format!("`{}` not in truth", g.key)))?;
        g.truth = bit;
        g.correct = g.guess == Some(bit);
        correct += g.correct as usize;
    }
    let accuracy = correct as f64 / guesses.len().max(1) as f64;
    Ok(AttackReport {
        guesses,
        accuracy,
        ml1_accuracy: None,
        ml2_accuracy: None,
        combined_accuracy: None,
    })
}

/// Re-scores an existing report against a (possibly different) truth.
pub fn score(report: &AttackReport, truth: &KeyMapping) -> Result<f64> {
    let rescored = finish(report.guesses.clone(), truth)?;
    Ok(rescored.accuracy)
}

// ---------------------------------------------------------------------
// Key-gate type rules
// ---------------------------------------------------------------------

/// Transparency bit of a single key-gate type: XOR passes the net at key
/// 0, XNOR at 1, AND at 1, OR at 0. Composite roots have no fixed rule.
pub fn single_gate_bit(kind: GateKind) -> Option<bool> {
    match kind {
        GateKind::Xor | GateKind::Or => Some(false),
        GateKind::Xnor | GateKind::And => Some(true),
        _ => None,
    }
}

/// Deterministic coin for roots the type rules cannot decide.
fn coin(key_name: &str) -> bool {
    crate::stable_hash(key_name) & 1 == 1
}

fn other_fanin(n: &Netlist, g: GateId, not_this: GateId) -> Option<GateId> {
    match n.gate(g).fanins.as_slice() {
        [a, b] if *a == not_this => Some(*b),
        [a, b] if *b == not_this => Some(*a),
        _ => None,
    }
}

fn sole_logic_fanout(n: &Netlist, g: GateId) -> Option<GateId> {
    let mut it = n.logic_fanouts(g);
    let first = it.next()?;
    if it.next().is_some() {
        None
    } else {
        Some(first)
    }
}

fn is_not_of(n: &Netlist, g: GateId, src: GateId) -> bool {
    n.gate(g).kind == GateKind::Not && n.gate(g).fanins.as_slice() == [src]
}

/// Splits a two-input gate into (inverter-of-key, other) if one fanin is
/// NOT(key).
fn ns_split(n: &Netlist, g: GateId, key: GateId) -> Option<(GateId, GateId)> {
    match n.gate(g).fanins.as_slice() {
        [a, b] if is_not_of(n, *a, key) => Some((*a, *b)),
        [a, b] if is_not_of(n, *b, key) => Some((*b, *a)),
        _ => None,
    }
}

/// Recovers the multiplexer legs (select-1 leg, select-0 leg) around a
/// key consumer, if the composite construction is still intact.
fn mux_legs(n: &Netlist, key: GateId, kg: GateId) -> Option<(GateId, GateId)> {
    match n.gate(kg).kind {
        // kg is the AND/NAND(key, t) leg; its sibling holds NOT(key) and f.
        GateKind::And | GateKind::Nand => {
            let kind = n.gate(kg).kind;
            let expect_out = if kind == GateKind::And { GateKind::Or } else { GateKind::Nand };
            let t = other_fanin(n, kg, key)?;
            let out = sole_logic_fanout(n, kg)?;
            if n.gate(out).kind != expect_out {
                return None;
            }
            let g2 = other_fanin(n, out, kg)?;
            if n.gate(g2).kind != kind {
                return None;
            }
            let (_ns, f) = ns_split(n, g2, key)?;
            Some((t, f))
        }
        // kg is the NOR(f, key) leg; the sibling is NOR(t, NOT(key)).
        GateKind::Nor => {
            let f = other_fanin(n, kg, key)?;
            let out = sole_logic_fanout(n, kg)?;
            if n.gate(out).kind != GateKind::Nor {
                return None;
            }
            let g1 = other_fanin(n, out, kg)?;
            if n.gate(g1).kind != GateKind::Nor {
                return None;
            }
            let (_ns, t) = ns_split(n, g1, key)?;
            Some((t, f))
        }
        // kg is NOT(key) itself; find the leg that consumes the raw key.
        GateKind::Not => {
            let partner = {
                let mut others = n.logic_fanouts(key).filter(|&g| g != kg);
                let p = others.next()?;
                if others.next().is_some() {
                    return None;
                }
                p
            };
            match n.gate(partner).kind {
                kind @ (GateKind::And | GateKind::Nand) => {
                    let expect_out =
                        if kind == GateKind::And { GateKind::Or } else { GateKind::Nand };
                    let t = other_fanin(n, partner, key)?;
                    let out = sole_logic_fanout(n, partner)?;
                    if n.gate(out).kind != expect_out {
                        return None;
                    }
                    let g2 = other_fanin(n, out, partner)?;
                    if n.gate(g2).kind != kind {
                        return None;
                    }
                    let f = other_fanin(n, g2, kg)?;
                    Some((t, f))
                }
                GateKind::Nor => {
                    let f = other_fanin(n, partner, key)?;
                    let g1 = sole_logic_fanout(n, kg)?;
                    if n.gate(g1).kind != GateKind::Nor {
                        return None;
                    }
                    let t = other_fanin(n, g1, kg)?;
                    Some((t, f))
                }
                _ => None,
            }
        }
        _ => None,
    }
}

/// Select-leg rule: the composite passes the select-1 leg at key 1, so a
/// raw select-1 leg means correct bit 1 and an inverted one means 0.
fn leg_bit(n: &Netlist, t: GateId, f: GateId) -> Option<bool> {
    if is_not_of(n, f, t) {
        return Some(true);
    }
    if is_not_of(n, t, f) {
        return Some(false);
    }
    None
}

/// Reads one key bit straight off the structure around the key input: the
/// single-gate transparency rule where it applies, leg recovery for intact
/// multiplexer composites, and a deterministic coin when rewriting has
/// destroyed the evidence.
pub fn type_decode(n: &Netlist, key: GateId) -> Result<(bool, f64)> {
    let key_name = n.name_of(key).to_string();
    let kg = n.key_gate(key)?;
    let kind = n.gate(kg).kind;
    match kind {
        GateKind::Xor => Ok((false, 1.0)),
        GateKind::Xnor => Ok((true, 1.0)),
        GateKind::Or => Ok((false, 1.0)),
        GateKind::And => {
            if let Some((t, f)) = mux_legs(n, key, kg) {
                if let Some(bit) = leg_bit(n, t, f) {
                    return Ok((bit, 1.0));
                }
                return Ok((coin(&key_name), 0.5));
            }
            Ok((true, 1.0))
        }
        GateKind::Nand | GateKind::Nor | GateKind::Not => {
            if let Some(bit) = mux_legs(n, key, kg).and_then(|(t, f)| leg_bit(n, t, f)) {
                return Ok((bit, 1.0));
            }
            Ok((coin(&key_name), 0.5))
        }
        _ => Ok((coin(&key_name), 0.5)),
    }
}

/// The no-model baseline: every key read by the type rules alone. This is
/// also what the combined attack degenerates to when change prediction
/// calls everything unchanged.
pub fn type_decode_attack(target: &Netlist, truth: &KeyMapping) -> Result<AttackReport> {
    let mut guesses = Vec::new();
    for &key in target.key_inputs() {
        let (bit, confidence) = type_decode(target, key)?;
        guesses.push(KeyGuess {
            key: target.name_of(key).to_string(),
            guess: Some(bit),
            truth: false,
            correct: false,
            confidence,
            stage: "type",
        });
    }
    let mut report = finish(guesses, truth)?;
    report.combined_accuracy = Some(report.accuracy);
    Ok(report)
}

// ---------------------------------------------------------------------
// Training data (relock-and-observe)
// ---------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct TrainingData {
    /// Post-rewrite samples of the freshly added keys, change-labeled,
    /// tagged with their instance number.
    pub rows: Vec<DatasetRow>,
    /// Matched (pre, post) sequences for the reconstructor.
    pub pairs: Vec<ReconPair>,
}

impl TrainingData {
    /// Feature matrix and labels at one sub-size, ready for forest
    /// training.
    pub fn matrix_at(&self, sub_size: usize) -> (Vec<Vec<u8>>, Vec<ChangeLabel>) {
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for r in &self.rows {
            if r.sample.sub_size == sub_size {
                if let Some(label) = r.sample.label {
                    xs.push(r.sample.one_hot.clone());
                    ys.push(label);
                }
            }
        }
        (xs, ys)
    }
}

/// The attacker's self-supervision loop: lock the (already locked) target
/// again with as many fresh keys, record every new key-gate's surroundings,
/// run the rewrite the attacker believes the victim used, and label what
/// changed. Repeating this over instances builds the corpus for both
/// models without ever needing the victim's secrets.
#[allow(clippy::too_many_arguments)]
pub fn gen_training_data(
    locked: &Netlist,
    circuit: &str,
    scheme: Scheme,
    palette: &Palette,
    n_instances: usize,
    sub_sizes: &[usize],
    effort: usize,
    seed: u64,
) -> Result<TrainingData> {
    let k1 = locked.key_inputs().len().max(1);
    let existing: Vec<String> = locked.key_names().map(str::to_string).collect();
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for i in 0..n_instances {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let relocked = lock_with(locked, scheme, k1, palette, &mut rng)?;
        let staged =
            resynthesize(&relocked.locked, effort, derive_seed(seed, 0x10000 + i as u64))?;
        let fresh =
            |s: &SubgraphSample| !existing.iter().any(|e| e == &s.key_name);
        let pre: Vec<SubgraphSample> =
            extract_samples(&relocked.locked, sub_sizes)?.into_iter().filter(fresh).collect();
        let post: Vec<SubgraphSample> =
            extract_samples(&staged, sub_sizes)?.into_iter().filter(fresh).collect();
        let labeled = label_changes(&pre, &post)?;

        let mut pre_by: BTreeMap<(&str, usize), &SubgraphSample> = BTreeMap::new();
        for s in &pre {
            pre_by.insert((s.key_name.as_str(), s.sub_size), s);
        }
        for s in &labeled {
            let p = pre_by[&(s.key_name.as_str(), s.sub_size)];
            pairs.push(ReconPair {
                sub_size: s.sub_size,
                pre: p.type_sequence.clone(),
                post: s.type_sequence.clone(),
            });
            rows.push(DatasetRow { circuit: circuit.to_string(), instance: i, sample: s.clone() });
        }
    }
    Ok(TrainingData { rows, pairs })
}

/// Trains the change predictor on the corpus rows of one sub-size.
pub fn train_rf(
    data: &TrainingData,
    sub_size: usize,
    n_trees: usize,
    seed: u64,
) -> Result<RandomForest> {
    let (xs, ys) = data.matrix_at(sub_size);
    RandomForest::fit(&xs, &ys, n_trees, seed)
}

// ---------------------------------------------------------------------
// Combined SAIL
// ---------------------------------------------------------------------

/// Change prediction gates the decode: keys whose surroundings look
/// untouched are read by the type rules on the netlist as-is; keys that
/// look rewritten are first reconstructed, and the predicted original
/// root type is read instead.
pub fn sail_attack(
    target: &Netlist,
    rf: &RandomForest,
    recon: &ReconModel,
    truth: &KeyMapping,
) -> Result<AttackReport> {
    if !rf.n_features().is_multiple_of(VOCAB) {
        return Err(Error::Invalid(format!(
            "forest expects {} features, not a whole number of {VOCAB}-wide one-hots",
            rf.n_features()
        )));
    }
    let rf_sub = rf.sub_size();
    let mut sizes: Vec<usize> = recon.sizes();
    if !sizes.contains(&rf_sub) {
        sizes.push(rf_sub);
        sizes.sort_unstable();
    }
    let samples = extract_samples(target, &sizes)?;
    let mut by_key: BTreeMap<&str, BTreeMap<usize, &SubgraphSample>> = BTreeMap::new();
    for s in &samples {
        by_key.entry(&s.key_name).or_default().insert(s.sub_size, s);
    }

    let mut guesses = Vec::new();
    for &key in target.key_inputs() {
        let key_name = target.name_of(key);
        let per_size = by_key
            .get(key_name)
            .ok_or_else(|| Error::DanglingKeyInput(key_name.to_string()))?;
        let at_rf = per_size[&rf_sub];
        let (guess, confidence, stage) = match rf.predict(&at_rf.one_hot) {
            ChangeLabel::Unchanged => {
                let (bit, conf) = type_decode(target, key)?;
                (bit, conf, "type")
            }
            ChangeLabel::Changed => {
                let posts: BTreeMap<usize, Vec<GateKind>> =
                    per_size.iter().map(|(&s, sample)| (s, sample.type_sequence.clone())).collect();
                let pre = recon.query(&posts);
                match pre.first().copied().and_then(single_gate_bit) {
                    Some(bit) => (bit, 1.0, "recon"),
                    None => (coin(key_name), 0.5, "recon"),
                }
            }
        };
        guesses.push(KeyGuess {
            key: key_name.to_string(),
            guess: Some(guess),
            truth: false,
            correct: false,
            confidence,
            stage,
        });
    }

    let mut report = finish(guesses, truth)?;
    let stage_acc = |stage: &str| {
        let of_stage: Vec<&KeyGuess> =
            report.guesses.iter().filter(|g| g.stage == stage).collect();
        if of_stage.is_empty() {
            None
        } else {
            Some(of_stage.iter().filter(|g| g.correct).count() as f64 / of_stage.len() as f64)
        }
    };
    report.ml1_accuracy = stage_acc("type");
    report.ml2_accuracy = stage_acc("recon");
    report.combined_accuracy = Some(report.accuracy);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::SUB_SIZES;
    use crate::gen::{random_netlist, GenConfig};
    use crate::lock::lock_rll;

    fn xnor_target(gates: usize, k: usize, seed: u64) -> (Netlist, KeyMapping) {
        let n = random_netlist(&GenConfig::new(8, gates, seed)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xAB);
        let rec = lock_rll(&n, k, &Palette::xnor(), &mut rng).unwrap();
        (rec.locked, rec.mapping)
    }

    #[test]
    fn type_decode_reads_fresh_xnor_locks_perfectly() {
        for seed in 0..5 {
            let (locked, truth) = xnor_target(120, 8, seed);
            let report = type_decode_attack(&locked, &truth).unwrap();
            assert_eq!(report.accuracy, 1.0, "seed {seed}");
            assert!(report.guesses.iter().all(|g| g.stage == "type" && g.confidence == 1.0));
        }
    }

    #[test]
    fn type_decode_recovers_intact_composite_legs() {
        let n = random_netlist(&GenConfig::new(8, 150, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rec = lock_rll(&n, 12, &Palette::cl_v2(), &mut rng).unwrap();
        let report = type_decode_attack(&rec.locked, &rec.mapping).unwrap();
        assert_eq!(report.accuracy, 1.0, "unsynthesized composites leak their leg order");
    }

    #[test]
    fn report_csv_has_the_pinned_header_and_one_row_per_key() {
        let (locked, truth) = xnor_target(100, 6, 9);
        let report = type_decode_attack(&locked, &truth).unwrap();
        let csv = report.to_csv();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with('#'));
        assert_eq!(lines.next().unwrap(), REPORT_HEADER);
        assert_eq!(lines.count(), 6);
    }

    #[test]
    fn scoring_checks_names_and_counts_abstentions_as_wrong() {
        let truth = KeyMapping::new(vec![
            ("k0".into(), true),
            ("k1".into(), false),
            ("k2".into(), true),
            ("k3".into(), true),
        ])
        .unwrap();
        let gs = |k: &str, g: Option<bool>| KeyGuess {
            key: k.into(),
            guess: g,
            truth: false,
            correct: false,
            confidence: 1.0,
            stage: "type",
        };
        let report = finish(
            vec![gs("k0", Some(true)), gs("k1", Some(false)), gs("k2", Some(true)), gs("k3", None)],
            &truth,
        )
        .unwrap();
        assert_eq!(report.accuracy, 0.75);
        assert!(!report.guesses[3].correct);
        let renamed = KeyMapping::new(vec![("q0".into(), true)]).unwrap();
        assert!(score(&report, &renamed).is_err());
    }

    #[test]
    fn training_corpus_is_deterministic_and_sized_by_keys_and_sizes() {
        let (locked, _) = xnor_target(200, 8, 4);
        let data = gen_training_data(
            &locked,
            "c1",
            Scheme::Rll,
            &Palette::xnor(),
            3,
            &SUB_SIZES,
            2,
            42,
        )
        .unwrap();
        assert_eq!(data.rows.len(), 3 * 8 * SUB_SIZES.len());
        assert_eq!(data.pairs.len(), data.rows.len());
        let again = gen_training_data(
            &locked,
            "c1",
            Scheme::Rll,
            &Palette::xnor(),
            3,
            &SUB_SIZES,
            2,
            42,
        )
        .unwrap();
        let text = crate::features::write_dataset(&data.rows);
        assert_eq!(text, crate::features::write_dataset(&again.rows));
        assert!(text.contains("c1,2,"));
    }

    #[test]
    fn zero_effort_corpus_is_single_class_and_training_refuses() {
        let (locked, _) = xnor_target(150, 6, 5);
        let data =
            gen_training_data(&locked, "c", Scheme::Rll, &Palette::xnor(), 2, &[3], 0, 1).unwrap();
        assert!(data
            .rows
            .iter()
            .all(|r| r.sample.label == Some(ChangeLabel::Unchanged)));
        assert!(matches!(train_rf(&data, 3, 10, 0), Err(Error::SingleClass)));
    }

    #[test]
    fn all_unchanged_prediction_reduces_sail_to_type_decode() {
        let (locked, truth) = xnor_target(180, 8, 6);
        // A forest fit on constant features with an Unchanged majority is
        // a constant Unchanged predictor, built through the public API.
        let xs = vec![vec![0u8; 3 * VOCAB]; 40];
        let mut ys = vec![ChangeLabel::Unchanged; 40];
        ys[0] = ChangeLabel::Changed;
        let rf = RandomForest::fit(&xs, &ys, 9, 0).unwrap();
        let recon = ReconModel::train(&[]);
        let sail = sail_attack(&locked, &rf, &recon, &truth).unwrap();
        let baseline = type_decode_attack(&locked, &truth).unwrap();
        assert_eq!(sail.accuracy, baseline.accuracy);
        assert_eq!(sail.ml1_accuracy, Some(baseline.accuracy));
        assert_eq!(sail.ml2_accuracy, None);
    }

    #[test]
    fn change_prediction_clears_the_holdout_bar_on_xnor_rll() {
        // Published change-prediction accuracy for this setup sits near
        // 0.82; the local rewrite pass is gentler than a real synthesis
        // tool, so the floor asserted here is 0.70.
        let (locked, _) = xnor_target(300, 16, 11);
        let target = resynthesize(&locked, 2, 99).unwrap();
        let data =
            gen_training_data(&target, "c", Scheme::Rll, &Palette::xnor(), 10, &[3], 2, 21)
                .unwrap();
        let mut train = (Vec::new(), Vec::new());
        let mut hold = (Vec::new(), Vec::new());
        for r in &data.rows {
            let Some(label) = r.sample.label else { continue };
            let bucket = if r.instance == 0 { &mut hold } else { &mut train };
            bucket.0.push(r.sample.one_hot.clone());
            bucket.1.push(label);
        }
        let rf = RandomForest::fit(&train.0, &train.1, DEFAULT_TREES, 5).unwrap();
        let acc = rf.accuracy(&hold.0, &hold.1);
        assert!(acc >= 0.70, "holdout change-prediction accuracy {acc}");
    }

    #[test]
    fn full_sail_pipeline_runs_and_beats_coin_flips_on_light_rewrites() {
        let (locked, truth) = xnor_target(250, 8, 7);
        let target = resynthesize(&locked, 2, 1234).unwrap();
        let data = gen_training_data(
            &target,
            "c",
            Scheme::Rll,
            &Palette::xnor(),
            6,
            &SUB_SIZES,
            2,
            55,
        )
        .unwrap();
        let rf = train_rf(&data, 3, DEFAULT_TREES, 8).unwrap();
        let recon = ReconModel::train(&data.pairs);
        let report = sail_attack(&target, &rf, &recon, &truth).unwrap();
        assert_eq!(report.guesses.len(), 8);
        assert_eq!(report.combined_accuracy, Some(report.accuracy));
        assert!(report.accuracy >= 0.5, "got {}", report.accuracy);
        let csv = report.to_csv();
        assert!(csv.contains(",type") || csv.contains(",recon"));
    }
}
