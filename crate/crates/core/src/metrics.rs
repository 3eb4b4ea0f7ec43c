//! Calibration and discrimination metrics.
//!
//! ECE is computed on a fixed equal-width grid over [0, 1]. Regional
//! variants restrict the examples by the sign of the raw logit (binary) or
//! by the malignancy of the predicted class (multi-class) and keep the
//! global bin grid, so bin edges stay comparable across regions. Weights are
//! relative to the examples inside the region.

use crate::scaling::{
    log_softmax_scaled, predicted_class_of, sigmoid_scaled, softmax_scaled,
};
use crate::types::{ClassTaxonomy, LogitDataset, Temperature};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricError {
    #[error("no examples fall in region {0}")]
    EmptyRegion(&'static str),

    #[error("no examples fall in split {0}")]
    EmptySplit(&'static str),

    #[error("class {class} ({name}) has no examples with that true label")]
    ClassAbsentFromLabels { class: usize, name: String },

    #[error("binary (scalar-logit) dataset required")]
    NotBinary,

    #[error("multi-class dataset required")]
    NotMulticlass,

    #[error("taxonomy has {taxonomy} classes, dataset has {dataset}")]
    TaxonomyMismatch { taxonomy: usize, dataset: usize },

    #[error("num_bins must be >= 2, got {0}")]
    InvalidBins(usize),
}

/// Equal-width binning of [0, 1]. Bin `b` is `[b/n, (b+1)/n)`; the last bin is closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BinningConfig {
    pub num_bins: usize,
}

impl Default for BinningConfig {
    fn default() -> Self {
        Self { num_bins: 15 }
    }
}

impl BinningConfig {
    pub fn new(num_bins: usize) -> Result<Self, MetricError> {
        if num_bins < 2 {
            return Err(MetricError::InvalidBins(num_bins));
        }
        Ok(Self { num_bins })
    }

    /// Lower edge of bin `b` (`b == num_bins` gives 1.0).
    pub fn edge(&self, b: usize) -> f64 {
        b as f64 / self.num_bins as f64
    }

    /// Bin holding probability `p`. Values are assigned by comparison with
    /// [`Self::edge`], so `p == edge(b)` always lands in bin `b`.
    pub fn bin_of(&self, p: f64) -> usize {
        let n = self.num_bins;
        let mut b = ((p * n as f64) as usize).min(n - 1);
        while b > 0 && p < self.edge(b) {
            b -= 1;
        }
        while b + 1 < n && p >= self.edge(b + 1) {
            b += 1;
        }
        b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    /// `None` for an empty bin.
    pub mean_confidence: Option<f64>,
    pub observed_frequency: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EceReport {
    pub value: f64,
    pub per_bin: Vec<BinStat>,
    pub n_used: usize,
}

/// Per-bin statistics of `probs` against binary `outcomes`.
pub fn bin_statistics(probs: &[f64], outcomes: &[bool], bins: BinningConfig) -> Vec<BinStat> {
    debug_assert_eq!(probs.len(), outcomes.len());
    let n = bins.num_bins;
    let mut conf = vec![0.0; n];
    let mut hits = vec![0usize; n];
    let mut counts = vec![0usize; n];
    for (&p, &y) in probs.iter().zip(outcomes) {
        let b = bins.bin_of(p);
        conf[b] += p;
        hits[b] += usize::from(y);
        counts[b] += 1;
    }
    (0..n)
        .map(|b| {
            let count = counts[b];
            let (mean_confidence, observed_frequency) = if count > 0 {
                (
                    Some(conf[b] / count as f64),
                    Some(hits[b] as f64 / count as f64),
                )
            } else {
                (None, None)
            };
            BinStat {
                lo: bins.edge(b),
                hi: bins.edge(b + 1),
                mean_confidence,
                observed_frequency,
                count,
            }
        })
        .collect()
}

/// Count-weighted mean of |confidence − frequency| over non-empty bins.
pub fn ece_from_probabilities(probs: &[f64], outcomes: &[bool], bins: BinningConfig) -> EceReport {
    let per_bin = bin_statistics(probs, outcomes, bins);
    let n_used = probs.len();
    let mut value = 0.0;
    for bin in &per_bin {
        if let (Some(c), Some(f)) = (bin.mean_confidence, bin.observed_frequency) {
            value += (bin.count as f64 / n_used as f64) * (c - f).abs();
        }
    }
    EceReport {
        value,
        per_bin,
        n_used,
    }
}

/// Region of a binary dataset selected by the sign of the raw logit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LogitRegion {
    All,
    /// `z < 0`, i.e. predicted probability below 0.5.
    LogitNegative,
    /// `z >= 0`.
    LogitNonNegative,
}

impl LogitRegion {
    pub fn name(self) -> &'static str {
        match self {
            LogitRegion::All => "all",
            LogitRegion::LogitNegative => "z<0",
            LogitRegion::LogitNonNegative => "z>=0",
        }
    }

    pub fn contains(self, z: f64) -> bool {
        match self {
            LogitRegion::All => true,
            LogitRegion::LogitNegative => z < 0.0,
            LogitRegion::LogitNonNegative => z >= 0.0,
        }
    }
}

/// ECE of the tempered positive-class probability within a logit-sign region.
pub fn ece_binary(
    dataset: &LogitDataset,
    t: Temperature,
    region: LogitRegion,
    bins: BinningConfig,
) -> Result<EceReport, MetricError> {
    if !dataset.is_binary() {
        return Err(MetricError::NotBinary);
    }
    let (probs, outcomes): (Vec<f64>, Vec<bool>) = (0..dataset.len())
        .filter(|&i| region.contains(dataset.scalar_logit(i)))
        .map(|i| (sigmoid_scaled(dataset.scalar_logit(i), t), dataset.label(i) == 1))
        .unzip();
    if probs.is_empty() {
        return Err(MetricError::EmptyRegion(region.name()));
    }
    Ok(ece_from_probabilities(&probs, &outcomes, bins))
}

/// Examples grouped by the malignancy of their predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MalignancySplit {
    PredictedBenign,
    PredictedMalignant,
}

impl MalignancySplit {
    pub fn name(self) -> &'static str {
        match self {
            MalignancySplit::PredictedBenign => "predicted-benign",
            MalignancySplit::PredictedMalignant => "predicted-malignant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClasswiseEceReport {
    /// Unweighted mean of the per-class ECEs.
    pub value: f64,
    pub per_class: Vec<EceReport>,
    pub n_used: usize,
}

/// Class-wise ECE within a predicted-malignancy split.
///
/// For every class `k`, the tempered probability of `k` over the split's
/// examples is binned against the indicator `label == k`; the K resulting
/// ECEs are averaged without weights.
pub fn classwise_ece(
    dataset: &LogitDataset,
    taxonomy: &ClassTaxonomy,
    t: Temperature,
    split: MalignancySplit,
    bins: BinningConfig,
) -> Result<ClasswiseEceReport, MetricError> {
    if dataset.is_binary() {
        return Err(MetricError::NotMulticlass);
    }
    if taxonomy.len() != dataset.num_classes() {
        return Err(MetricError::TaxonomyMismatch {
            taxonomy: taxonomy.len(),
            dataset: dataset.num_classes(),
        });
    }
    let want_benign = split == MalignancySplit::PredictedBenign;
    let members: Vec<usize> = (0..dataset.len())
        .filter(|&i| taxonomy.is_benign(predicted_class_of(dataset, i)) == want_benign)
        .collect();
    if members.is_empty() {
        return Err(MetricError::EmptySplit(split.name()));
    }

    let k = dataset.num_classes();
    let probs: Vec<Vec<f64>> = members
        .iter()
        .map(|&i| softmax_scaled(dataset.row(i), t).into_inner())
        .collect();
    let per_class: Vec<EceReport> = (0..k)
        .map(|class| {
            let p: Vec<f64> = probs.iter().map(|row| row[class]).collect();
            let y: Vec<bool> = members.iter().map(|&i| dataset.label(i) == class).collect();
            ece_from_probabilities(&p, &y, bins)
        })
        .collect();
    let value = per_class.iter().map(|r| r.value).sum::<f64>() / k as f64;
    Ok(ClasswiseEceReport {
        value,
        per_class,
        n_used: members.len(),
    })
}

/// Mean per-class recall of argmax predictions (temperature-free).
pub fn balanced_accuracy(
    dataset: &LogitDataset,
    taxonomy: Option<&ClassTaxonomy>,
) -> Result<f64, MetricError> {
    let predictions: Vec<usize> = (0..dataset.len()).map(|i| predicted_class_of(dataset, i)).collect();
    balanced_accuracy_from_predictions(&predictions, dataset.labels(), dataset.num_classes(), taxonomy)
}

pub fn balanced_accuracy_from_predictions(
    predictions: &[usize],
    labels: &[usize],
    num_classes: usize,
    taxonomy: Option<&ClassTaxonomy>,
) -> Result<f64, MetricError> {
    let mut support = vec![0usize; num_classes];
    let mut correct = vec![0usize; num_classes];
    for (&p, &y) in predictions.iter().zip(labels) {
        support[y] += 1;
        correct[y] += usize::from(p == y);
    }
    if let Some(class) = support.iter().position(|&s| s == 0) {
        return Err(absent(class, taxonomy));
    }
    let recall_sum: f64 = correct
        .iter()
        .zip(&support)
        .map(|(&c, &s)| c as f64 / s as f64)
        .sum();
    Ok(recall_sum / num_classes as f64)
}

fn absent(class: usize, taxonomy: Option<&ClassTaxonomy>) -> MetricError {
    let name = taxonomy
        .and_then(|t| t.names().get(class).cloned())
        .unwrap_or_else(|| format!("class{class}"));
    MetricError::ClassAbsentFromLabels { class, name }
}

/// Mann–Whitney AUC of `scores` for the positive examples, with tied
/// scores sharing their average rank. `None` when either group is empty.
pub fn auc_mann_whitney(scores: &[f64], positive: &[bool]) -> Option<f64> {
    let n_pos = positive.iter().filter(|&&y| y).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // Ranks are 1-based; a run of ties from positions i..j shares rank (i + j + 1) / 2.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j + 1) as f64 / 2.0;
        let pos_in_run = order[i..j].iter().filter(|&&idx| positive[idx]).count();
        rank_sum_pos += avg_rank * pos_in_run as f64;
        i = j;
    }
    let u = rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Macro-averaged one-vs-rest AUC of the tempered class probabilities.
///
/// Scores are ranked in log space (logit for binary data, log-softmax
/// otherwise); both are strictly monotone in the probability and keep
/// resolution where probabilities saturate. For binary data the ranking is
/// independent of the temperature.
pub fn auc_ovr(dataset: &LogitDataset, t: Temperature) -> Result<f64, MetricError> {
    let k = dataset.num_classes();
    let mut support = vec![0usize; k];
    for &y in dataset.labels() {
        support[y] += 1;
    }
    if let Some(class) = support.iter().position(|&s| s == 0) {
        return Err(absent(class, None));
    }

    let scores: Vec<Vec<f64>> = if dataset.is_binary() {
        let z: Vec<f64> = (0..dataset.len()).map(|i| dataset.scalar_logit(i)).collect();
        vec![z.iter().map(|v| -v).collect(), z]
    } else {
        let logp: Vec<Vec<f64>> = dataset.rows().map(|row| log_softmax_scaled(row, t)).collect();
        (0..k).map(|c| logp.iter().map(|row| row[c]).collect()).collect()
    };
    let mut total = 0.0;
    for (class, class_scores) in scores.iter().enumerate() {
        let positive: Vec<bool> = dataset.labels().iter().map(|&y| y == class).collect();
        total += auc_mann_whitney(class_scores, &positive).expect("both groups non-empty");
    }
    Ok(total / k as f64)
}
