//! Movement-classification metrics and the persistence baseline.

use super::DeployError;

/// Confusion-matrix counts and the derived scores for a set of movement
/// calls. "Positive" is the up class (+1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalReport {
    pub true_positives: usize,
    pub true_negatives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    /// `(tp + tn) / n`.
    pub accuracy: f64,
    /// Positive-class F1, `2tp / (2tp + fp + fn)`; 0 when the positive
    /// class is entirely absent from both predictions and truths.
    pub f1: f64,
    /// Matthews correlation; 0 whenever a denominator factor is 0 (the
    /// degenerate one-class cases).
    pub mcc: f64,
}

impl EvalReport {
    pub fn samples(&self) -> usize {
        self.true_positives + self.true_negatives + self.false_positives + self.false_negatives
    }
}

fn check_labels(what: &str, labels: &[i8]) -> Result<(), DeployError> {
    for (i, &v) in labels.iter().enumerate() {
        if v != 1 && v != -1 {
            return Err(DeployError::Eval(format!(
                "{what}[{i}] is {v}; movement labels must be -1 or +1"
            )));
        }
    }
    Ok(())
}

/// Scores movement predictions against realized movements.
pub fn metrics(predictions: &[i8], truths: &[i8]) -> Result<EvalReport, DeployError> {
    if predictions.is_empty() {
        return Err(DeployError::Eval("no samples to score".into()));
    }
    if predictions.len() != truths.len() {
        return Err(DeployError::Eval(format!(
            "{} predictions but {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    check_labels("predictions", predictions)?;
    check_labels("truths", truths)?;

    let mut tp = 0usize;
    let mut tn = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &t) in predictions.iter().zip(truths) {
        match (p > 0, t > 0) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let n = predictions.len() as f64;
    let accuracy = (tp + tn) as f64 / n;
    let f1_denom = 2 * tp + fp + fn_;
    let f1 = if f1_denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / f1_denom as f64
    };
    let factors = [tp + fp, tp + fn_, tn + fp, tn + fn_];
    let mcc = if factors.contains(&0) {
        0.0
    } else {
        let num = tp as f64 * tn as f64 - fp as f64 * fn_ as f64;
        let denom = factors.iter().map(|&f| f as f64).product::<f64>().sqrt();
        num / denom
    };
    Ok(EvalReport {
        true_positives: tp,
        true_negatives: tn,
        false_positives: fp,
        false_negatives: fn_,
        accuracy,
        f1,
        mcc,
    })
}

/// The persistence baseline: each day repeats the previous day's
/// realized movement; the first day defaults to up.
pub fn naive_baseline(truths: &[i8]) -> Vec<i8> {
    let mut out = Vec::with_capacity(truths.len());
    let mut prev = 1i8;
    for &t in truths {
        out.push(prev);
        prev = t;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn signs(bits: &[bool]) -> Vec<i8> {
        bits.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }

    #[test]
    fn perfect_predictions_score_one_everywhere() {
        let truth = vec![1, -1, 1, 1, -1, -1];
        let r = metrics(&truth, &truth).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.mcc, 1.0);
        assert_eq!(
            (r.true_positives, r.true_negatives, r.false_positives, r.false_negatives),
            (3, 3, 0, 0)
        );
    }

    #[test]
    fn unit_confusion_matrix_has_zero_mcc() {
        // tp, tn, fp, fn all 1: accuracy 1/2, f1 2/(2+1+1) = 1/2, mcc
        // (1-1)/sqrt(16) = 0.
        let predictions = vec![1, -1, 1, -1];
        let truths = vec![1, -1, -1, 1];
        let r = metrics(&predictions, &truths).unwrap();
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.f1, 0.5);
        assert_eq!(r.mcc, 0.0);
    }

    #[test]
    fn one_class_predictions_trip_the_zero_denominator_rule() {
        // All-up calls on a balanced set: tn = fn = 0, so the (tn+fn)
        // factor vanishes and mcc is defined 0.
        let predictions = vec![1, 1, 1, 1];
        let truths = vec![1, -1, 1, -1];
        let r = metrics(&predictions, &truths).unwrap();
        assert_eq!(r.mcc, 0.0);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.true_negatives + r.false_negatives, 0);
    }

    #[test]
    fn all_negative_everything_has_zero_f1() {
        // No positive anywhere: 2tp + fp + fn = 0, f1 defined 0.
        let labels = vec![-1, -1, -1];
        let r = metrics(&labels, &labels).unwrap();
        assert_eq!(r.f1, 0.0);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mcc, 0.0, "one-class truth is degenerate for mcc too");
    }

    #[test]
    fn hand_computed_mixed_matrix() {
        // tp 3, tn 2, fp 1, fn 2: accuracy 5/8, f1 6/9, mcc via closed form.
        let predictions = vec![1, 1, 1, 1, -1, -1, -1, -1];
        let truths = vec![1, 1, 1, -1, -1, -1, 1, 1];
        let r = metrics(&predictions, &truths).unwrap();
        assert_eq!(r.accuracy, 5.0 / 8.0);
        assert_eq!(r.f1, 6.0 / 9.0);
        let expected = (3.0 * 2.0 - 1.0 * 2.0) / (4.0f64 * 5.0 * 3.0 * 4.0).sqrt();
        assert_eq!(r.mcc, expected);
    }

    #[test]
    fn mismatched_or_empty_inputs_are_rejected() {
        assert!(metrics(&[], &[]).is_err());
        assert!(metrics(&[1, 1], &[1]).is_err());
        let err = metrics(&[1, 0], &[1, 1]).unwrap_err();
        assert!(err.to_string().contains("must be -1 or +1"), "got {err}");
    }

    #[test]
    fn baseline_repeats_yesterday_and_opens_up() {
        assert_eq!(naive_baseline(&[-1, 1, -1]), vec![1, -1, 1]);
        // Alternating truths: every repeated call is wrong after day one.
        let truths = vec![1, -1, 1, -1, 1, -1];
        let calls = naive_baseline(&truths);
        let hits = calls
            .iter()
            .zip(&truths)
            .skip(1)
            .filter(|(c, t)| c == t)
            .count();
        assert_eq!(hits, 0);
        // Constant truths: every repeated call is right after day one.
        let constant = vec![1; 5];
        assert_eq!(naive_baseline(&constant), constant);
    }

    proptest! {
        #[test]
        fn report_is_order_invariant(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..120),
            seed in any::<u64>(),
        ) {
            let predictions = signs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let truths = signs(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let base = metrics(&predictions, &truths).unwrap();

            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let sp = signs(&shuffled.iter().map(|p| p.0).collect::<Vec<_>>());
            let st = signs(&shuffled.iter().map(|p| p.1).collect::<Vec<_>>());
            prop_assert_eq!(metrics(&sp, &st).unwrap(), base);
        }

        #[test]
        fn label_swap_is_antisymmetric(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..120),
        ) {
            let predictions = signs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let truths = signs(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let a = metrics(&predictions, &truths).unwrap();

            let np: Vec<i8> = predictions.iter().map(|v| -v).collect();
            let nt: Vec<i8> = truths.iter().map(|v| -v).collect();
            let b = metrics(&np, &nt).unwrap();

            prop_assert_eq!(a.accuracy, b.accuracy);
            prop_assert_eq!(a.mcc, b.mcc);
            prop_assert_eq!(a.true_positives, b.true_negatives);
            prop_assert_eq!(a.true_negatives, b.true_positives);
            prop_assert_eq!(a.false_positives, b.false_negatives);
            prop_assert_eq!(a.false_negatives, b.false_positives);
        }

        #[test]
        fn scores_stay_in_their_ranges(
            pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..200),
        ) {
            let predictions = signs(&pairs.iter().map(|p| p.0).collect::<Vec<_>>());
            let truths = signs(&pairs.iter().map(|p| p.1).collect::<Vec<_>>());
            let r = metrics(&predictions, &truths).unwrap();
            prop_assert!((0.0..=1.0).contains(&r.accuracy));
            prop_assert!((0.0..=1.0).contains(&r.f1));
            prop_assert!((-1.0..=1.0).contains(&r.mcc));
            prop_assert_eq!(r.samples(), pairs.len());
        }
    }
}
