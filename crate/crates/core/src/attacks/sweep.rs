//! Constant-propagation attack: pin each key input to both constants,
//! rewrite, and compare the synthesis reports. A wrong constant usually
//! lets more logic collapse, so the report delta separates the classes.
//! Weights come from training locks with known keys: per feature, the
//! difference between the correct-class mean and the incorrect-class mean
//! carries both the sign and the magnitude of its usefulness.

use crate::derive_seed;
use crate::error::{Error, Result};
use crate::netlist::{KeyMapping, Netlist};
use crate::rewrite::{constant_propagate, report, resynthesize};

use super::{finish, AttackReport, KeyGuess};

/// Rewrite effort used on every pinned copy. Fixed so that target and
/// training features live in the same space.
const SWEEP_EFFORT: usize = 2;

/// Report-space movement caused by pinning `key_name` to `bit`.
fn pin_delta(n: &Netlist, key_name: &str, bit: bool) -> Result<Vec<f64>> {
    let pinned = constant_propagate(n, &[(key_name, bit)])?;
    let rewritten = resynthesize(
        &pinned,
        SWEEP_EFFORT,
        derive_seed(crate::stable_hash(key_name), bit as u64),
    )?;
    let before = report(n).features();
    let after = report(&rewritten).features();
    Ok(after.iter().zip(&before).map(|(a, b)| a - b).collect())
}

/// `truth` is used for scoring only; the guesses never see it.
pub fn sweep_attack(
    training: &[(Netlist, KeyMapping)],
    target: &Netlist,
    margin: f64,
    truth: &KeyMapping,
) -> Result<AttackReport> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }

    // Class means over (key, constant) observations.
    let mut sum_correct: Vec<f64> = Vec::new();
    let mut sum_wrong: Vec<f64> = Vec::new();
    let mut n_correct = 0usize;
    let mut n_wrong = 0usize;
    for (n, mapping) in training {
        mapping.check_covers(n)?;
        for (key_name, truth_bit) in mapping.iter() {
            for bit in [false, true] {
                let delta = pin_delta(n, key_name, bit)?;
                let (sum, count) = if bit == truth_bit {
                    (&mut sum_correct, &mut n_correct)
                } else {
                    (&mut sum_wrong, &mut n_wrong)
                };
                if sum.is_empty() {
                    sum.resize(delta.len(), 0.0);
                }
                for (s, d) in sum.iter_mut().zip(&delta) {
                    *s += d;
                }
                *count += 1;
            }
        }
    }
    if n_correct == 0 || n_wrong == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let weights: Vec<f64> = sum_correct
        .iter()
        .zip(&sum_wrong)
        .map(|(c, w)| c / n_correct as f64 - w / n_wrong as f64)
        .collect();

    // Higher projection on the weight vector reads as "more correct-like".
    let mut guesses = Vec::new();
    for &key in target.key_inputs() {
        let key_name = target.name_of(key).to_string();
        let s0: f64 = {
            let d = pin_delta(target, &key_name, false)?;
            weights.iter().zip(&d).map(|(w, x)| w * x).sum()
        };
        let s1: f64 = {
            let d = pin_delta(target, &key_name, true)?;
            weights.iter().zip(&d).map(|(w, x)| w * x).sum()
        };
        let gap = (s0 - s1).abs();
        let guess = if gap <= margin { None } else { Some(s1 > s0) };
        guesses.push(KeyGuess {
            key: key_name,
            guess,
            truth: false,
            correct: false,
            confidence: gap,
            stage: "sweep",
        });
    }
    finish(guesses, truth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{random_netlist, GenConfig};
    use crate::lock::{lock_rll, KeyGateKind, Palette};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn and_or_lock(gates: usize, k: usize, seed: u64) -> (Netlist, KeyMapping) {
        let n = random_netlist(&GenConfig::new(8, gates, seed)).unwrap();
        let palette = Palette::new(&[KeyGateKind::And, KeyGateKind::Or]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5E);
        let rec = lock_rll(&n, k, &palette, &mut rng).unwrap();
        (rec.locked, rec.mapping)
    }

    #[test]
    fn and_or_key_gates_leak_through_cone_collapse() {
        // Wrong constants turn AND/OR key-gates into stuck nets; the
        // report delta makes the classes linearly separable.
        let training: Vec<(Netlist, KeyMapping)> =
            (0..3).map(|s| and_or_lock(150, 6, s)).collect();
        let (target, truth) = and_or_lock(150, 6, 42);
        let report = sweep_attack(&training, &target, 0.0, &truth).unwrap();
        assert!(
            report.accuracy >= 0.8,
            "cone collapse should dominate, got {}",
            report.accuracy
        );
    }

    #[test]
    fn margin_above_every_gap_abstains_everything() {
        let training = vec![and_or_lock(100, 4, 1)];
        let (target, truth) = and_or_lock(100, 4, 2);
        let report = sweep_attack(&training, &target, f64::INFINITY, &truth).unwrap();
        assert!(report.guesses.iter().all(|g| g.guess.is_none()));
        assert_eq!(report.accuracy, 0.0);
    }

    #[test]
    fn empty_training_set_is_refused() {
        let (target, truth) = and_or_lock(100, 4, 3);
        assert!(matches!(
            sweep_attack(&[], &target, 0.0, &truth),
            Err(Error::EmptyTrainingSet)
        ));
    }

    #[test]
    fn deterministic_given_the_same_inputs() {
        let training = vec![and_or_lock(120, 4, 4)];
        let (target, truth) = and_or_lock(120, 4, 5);
        let a = sweep_attack(&training, &target, 0.0, &truth).unwrap();
        let b = sweep_attack(&training, &target, 0.0, &truth).unwrap();
        assert_eq!(a, b);
    }
}
