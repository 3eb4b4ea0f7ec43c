//! Tempered sigmoid/softmax maps and the negative log-likelihood they induce.

use crate::types::{LogitDataset, Temperature};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScalingError {
    #[error("negative log-likelihood requested over an empty subset")]
    EmptySubset,
    #[error("subset index {index} out of range for {len} examples")]
    IndexOutOfRange { index: usize, len: usize },
}

/// Tolerance on `sum(probs) == 1` accepted by [`ProbabilityVector::new`].
pub const PROBABILITY_SUM_TOLERANCE: f64 = 1e-9;

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    /// Returns `None` unless every entry lies in [0, 1] and the entries sum
    /// to 1 within [`PROBABILITY_SUM_TOLERANCE`].
    pub fn new(probs: Vec<f64>) -> Option<Self> {
        let in_range = probs.iter().all(|p| (0.0..=1.0).contains(p));
        let sum: f64 = probs.iter().sum();
        (in_range && !probs.is_empty() && (sum - 1.0).abs() <= PROBABILITY_SUM_TOLERANCE)
            .then_some(Self(probs))
    }

    /// `[1 - p, p]` for a binary positive-class probability.
    pub fn binary(p: f64) -> Self {
        Self(vec![1.0 - p, p])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// Overflow-free logistic function.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    x.min(0.0).exp() / (1.0 + (-x.abs()).exp())
}

/// `ln σ(x)`, evaluated without forming σ(x).
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    x.min(0.0) - (-x.abs()).exp().ln_1p()
}

/// σ(z / T).
#[inline]
pub fn sigmoid_scaled(z: f64, t: Temperature) -> f64 {
    sigmoid(z / t.value())
}

/// Max-subtracted softmax of `z / T`.
pub fn softmax_scaled(z: &[f64], t: Temperature) -> ProbabilityVector {
    let inv_t = 1.0 / t.value();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| ((v - max) * inv_t).exp()).collect();
    let total: f64 = exps.iter().sum();
    ProbabilityVector(exps.into_iter().map(|e| e / total).collect())
}

/// Log-softmax of `z / T`.
pub fn log_softmax_scaled(z: &[f64], t: Temperature) -> Vec<f64> {
    let inv_t = 1.0 / t.value();
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = z.iter().map(|&v| (v - max) * inv_t).collect();
    let lse = shifted.iter().map(|s| s.exp()).sum::<f64>().ln();
    shifted.into_iter().map(|s| s - lse).collect()
}

/// Index of the largest logit; ties go to the lowest index.
pub fn predict_class(z: &[f64]) -> usize {
    let mut best = 0;
    for (k, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = k;
        }
    }
    best
}

/// Predicted class of example `i`. A binary logit is read as the pair
/// `[0, z]`, so `z = 0` resolves to class 0.
pub fn predicted_class_of(dataset: &LogitDataset, i: usize) -> usize {
    if dataset.is_binary() {
        usize::from(dataset.scalar_logit(i) > 0.0)
    } else {
        predict_class(dataset.row(i))
    }
}

/// Tempered class probabilities of example `i` (length 2 in binary mode).
pub fn probabilities_of(dataset: &LogitDataset, i: usize, t: Temperature) -> ProbabilityVector {
    if dataset.is_binary() {
        ProbabilityVector::binary(sigmoid_scaled(dataset.scalar_logit(i), t))
    } else {
        softmax_scaled(dataset.row(i), t)
    }
}

/// `-ln q_y` for example `i` at temperature `t`, computed in log space.
pub fn example_nll(dataset: &LogitDataset, i: usize, t: Temperature) -> f64 {
    let y = dataset.label(i);
    if dataset.is_binary() {
        let x = dataset.scalar_logit(i) / t.value();
        // ln(1 - σ(x)) = ln σ(-x)
        if y == 1 {
            -log_sigmoid(x)
        } else {
            -log_sigmoid(-x)
        }
    } else {
        let z = dataset.row(i);
        let inv_t = 1.0 / t.value();
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = z.iter().map(|&v| ((v - max) * inv_t).exp()).sum::<f64>().ln();
        lse - (z[y] - max) * inv_t
    }
}

/// Mean negative log-likelihood over `subset`, accumulated with pairwise summation.
pub fn nll(dataset: &LogitDataset, t: Temperature, subset: &[usize]) -> Result<f64, ScalingError> {
    if subset.is_empty() {
        return Err(ScalingError::EmptySubset);
    }
    if let Some(&index) = subset.iter().find(|&&i| i >= dataset.len()) {
        return Err(ScalingError::IndexOutOfRange {
            index,
            len: dataset.len(),
        });
    }
    let losses: Vec<f64> = subset.iter().map(|&i| example_nll(dataset, i, t)).collect();
    Ok(pairwise_sum(&losses) / subset.len() as f64)
}

const PAIRWISE_BLOCK: usize = 64;

/// Tree summation; error grows as O(log n) rather than O(n).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= PAIRWISE_BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(v: f64) -> Temperature {
        Temperature::new(v).unwrap()
    }

    #[test]
    fn sigmoid_values() {
        for &temp in &[0.01, 1.0, 3.0, 1e6] {
            assert_eq!(sigmoid_scaled(0.0, t(temp)), 0.5);
        }
        // 1 / (1 + e^-2) and 1 / (1 + e^-1)
        assert!((sigmoid_scaled(2.0, t(1.0)) - 0.880_797_077_977_882_4).abs() < 1e-15);
        assert!((sigmoid_scaled(2.0, t(2.0)) - 0.731_058_578_630_004_9).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        for &x in &[1e4, -1e4, 700.0, -745.0, 1e300, -1e300] {
            let p = sigmoid(x);
            assert!(p.is_finite() && (0.0..=1.0).contains(&p), "{x} -> {p}");
            assert!(log_sigmoid(x).is_finite());
        }
        assert!(log_sigmoid(-1e4) < -9_999.0);
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_scaled(&[4.2, 4.2, 4.2], t(0.3));
        for &v in p.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax_scaled(&[1.0, 0.0], t(1.0));
        assert!((p.as_slice()[0] - 0.731_058_578_630_004_9).abs() < 1e-15);
        assert!((p.as_slice()[1] - 0.268_941_421_369_995_1).abs() < 1e-15);
        let p = softmax_scaled(&[3.0, 1.0, 1.0], t(1e8));
        for &v in p.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-6);
        }
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(predict_class(&[0.1, 0.9, 0.3]), 1);
        assert_eq!(predict_class(&[0.5, 0.5]), 0);
        assert_eq!(predict_class(&[-1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn nll_examples() {
        let ds = LogitDataset::binary(vec![0.0], vec![1]).unwrap();
        for &temp in &[0.1, 1.0, 9.0] {
            assert!((nll(&ds, t(temp), &[0]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        }
        let ds = LogitDataset::binary(vec![2.0], vec![1]).unwrap();
        let expected = -(1.0 / (1.0 + (-2.0f64).exp())).ln();
        assert!((nll(&ds, t(1.0), &[0]).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.126_928).abs() < 1e-6);

        let ds = LogitDataset::multiclass(vec![1.5, 1.5, 1.5], vec![2], 3).unwrap();
        assert!((nll(&ds, t(4.0), &[0]).unwrap() - 3f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn nll_rejects_bad_subsets() {
        let ds = LogitDataset::binary(vec![0.0, 1.0], vec![1, 0]).unwrap();
        assert_eq!(nll(&ds, t(1.0), &[]), Err(ScalingError::EmptySubset));
        assert!(matches!(
            nll(&ds, t(1.0), &[0, 2]),
            Err(ScalingError::IndexOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn nll_stays_finite_for_extreme_logits() {
        let ds = LogitDataset::binary(vec![1e4, -1e4], vec![0, 1]).unwrap();
        let v = nll(&ds, t(1.0), &[0, 1]).unwrap();
        assert!((v - 1e4).abs() < 1e-9);
        let ds = LogitDataset::multiclass(vec![1e4, -1e4, 0.0], vec![1], 3).unwrap();
        assert!((nll(&ds, t(1.0), &[0]).unwrap() - 2e4).abs() < 1e-9);
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let values = vec![0.1; 1_000_000];
        let naive: f64 = values.iter().sum();
        let tree = pairwise_sum(&values);
        assert!((tree - 100_000.0).abs() < (naive - 100_000.0).abs());
        assert!((tree - 100_000.0).abs() < 1e-8);
    }

    #[test]
    fn log_softmax_matches_softmax() {
        let z = [0.3, -2.0, 5.5, 1.0];
        let lp = log_softmax_scaled(&z, t(1.7));
        let p = softmax_scaled(&z, t(1.7));
        for (a, b) in lp.iter().zip(p.as_slice()) {
            assert!((a.exp() - b).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn two_class_softmax_matches_sigmoid(z1 in -50.0..50.0f64, z2 in -50.0..50.0f64, temp in 0.05..20.0f64) {
            let p = softmax_scaled(&[z1, z2], t(temp));
            prop_assert!((p.as_slice()[0] - sigmoid_scaled(z1 - z2, t(temp))).abs() < 1e-12);
        }

        #[test]
        fn softmax_is_a_probability_vector(z in proptest::collection::vec(-1e3..1e3f64, 2..12), temp in 1e-3..1e3f64) {
            let p = softmax_scaled(&z, t(temp));
            prop_assert!(ProbabilityVector::new(p.into_inner()).is_some());
        }

        #[test]
        fn max_probability_non_increasing_in_temperature(z in proptest::collection::vec(-30.0..30.0f64, 2..8)) {
            let grid: Vec<f64> = (0..60).map(|i| 0.05 * 1.15f64.powi(i)).collect();
            let maxes: Vec<f64> = grid
                .iter()
                .map(|&g| softmax_scaled(&z, t(g)).as_slice().iter().copied().fold(0.0, f64::max))
                .collect();
            for w in maxes.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12);
            }
        }

        #[test]
        fn argmax_invariant_under_temperature(z in proptest::collection::vec(-100.0..100.0f64, 1..10)) {
            let base = predict_class(&z);
            for &temp in &[1e-3, 1.0, 1e3] {
                let scaled: Vec<f64> = z.iter().map(|v| v / temp).collect();
                prop_assert_eq!(predict_class(&scaled), base);
            }
        }
    }
}
