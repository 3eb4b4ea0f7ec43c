//! Domain data model: logit datasets, class taxonomies, temperatures, cost
//! matrices and calibration-subset selectors.
//!
//! Every type here is validated at construction and immutable afterwards.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Errors raised while validating raw input artifacts.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationError {
    #[error("non-finite logit at row {row}, column {col}")]
    NonFiniteLogit { row: usize, col: usize },

    #[error("label {label} at row {row} is out of range for {num_classes} classes")]
    LabelOutOfRange {
        row: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("temperature must be finite and > 0, got {0}")]
    InvalidTemperature(f64),

    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),

    #[error("invalid cost matrix: {0}")]
    InvalidCostMatrix(String),
}

/// N examples of raw logits with integer labels.
///
/// In binary mode each example carries a single logit `z` for the positive
/// class and `num_classes` is recorded as 2.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitDataset {
    logits: Vec<f64>,
    labels: Vec<usize>,
    width: usize,
    num_classes: usize,
    binary_mode: bool,
}

impl LogitDataset {
    /// Builds a binary dataset from scalar positive-class logits.
    pub fn binary(logits: Vec<f64>, labels: Vec<usize>) -> Result<Self, ValidationError> {
        if logits.len() != labels.len() {
            return Err(ValidationError::ShapeMismatch(format!(
                "{} logits but {} labels",
                logits.len(),
                labels.len()
            )));
        }
        for (row, (&z, &label)) in logits.iter().zip(&labels).enumerate() {
            if !z.is_finite() {
                return Err(ValidationError::NonFiniteLogit { row, col: 0 });
            }
            if label >= 2 {
                return Err(ValidationError::LabelOutOfRange {
                    row,
                    label,
                    num_classes: 2,
                });
            }
        }
        Ok(Self {
            logits,
            labels,
            width: 1,
            num_classes: 2,
            binary_mode: true,
        })
    }

    /// Builds a multi-class dataset from a row-major N×K logit buffer.
    pub fn multiclass(
        logits: Vec<f64>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self, ValidationError> {
        if num_classes < 2 {
            return Err(ValidationError::ShapeMismatch(format!(
                "num_classes must be >= 2, got {num_classes}"
            )));
        }
        if logits.len() != labels.len() * num_classes {
            return Err(ValidationError::ShapeMismatch(format!(
                "{} logits cannot form {} rows of {} classes",
                logits.len(),
                labels.len(),
                num_classes
            )));
        }
        for (row, (chunk, &label)) in logits.chunks_exact(num_classes).zip(&labels).enumerate() {
            if let Some(col) = chunk.iter().position(|z| !z.is_finite()) {
                return Err(ValidationError::NonFiniteLogit { row, col });
            }
            if label >= num_classes {
                return Err(ValidationError::LabelOutOfRange {
                    row,
                    label,
                    num_classes,
                });
            }
        }
        Ok(Self {
            logits,
            labels,
            width: num_classes,
            num_classes,
            binary_mode: false,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn is_binary(&self) -> bool {
        self.binary_mode
    }

    /// Number of logit columns per example (1 in binary mode, K otherwise).
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    /// Logits of example `i`: a one-element slice in binary mode.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.logits[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.logits.chunks_exact(self.width)
    }

    /// Row-major logit buffer.
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    /// Scalar logit of example `i`. Panics unless the dataset is binary.
    pub fn scalar_logit(&self, i: usize) -> f64 {
        assert!(self.binary_mode, "scalar_logit on a multi-class dataset");
        self.logits[i]
    }

    /// Copy of this dataset with every logit divided by `t`.
    pub fn rescaled(&self, t: Temperature) -> Self {
        Self {
            logits: self.logits.iter().map(|z| z / t.value()).collect(),
            ..self.clone()
        }
    }

    /// Copy restricted to the given example indices, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut logits = Vec::with_capacity(indices.len() * self.width);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            logits.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Self {
            logits,
            labels,
            ..self.clone()
        }
    }
}

/// Validates raw rows of logits into a [`LogitDataset`].
///
/// Rows of width 1 produce a binary dataset (requires `num_classes == 2`);
/// rows of width `num_classes` produce a multi-class dataset. Errors name the
/// first offending row.
pub fn validate_dataset(
    rows: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
) -> Result<LogitDataset, ValidationError> {
    if rows.len() != labels.len() {
        return Err(ValidationError::ShapeMismatch(format!(
            "{} logit rows but {} labels",
            rows.len(),
            labels.len()
        )));
    }
    let width = rows.first().map_or(num_classes, Vec::len);
    let binary = width == 1;
    if binary && num_classes != 2 {
        return Err(ValidationError::ShapeMismatch(format!(
            "scalar logits require num_classes = 2, got {num_classes}"
        )));
    }
    if !binary && width != num_classes {
        return Err(ValidationError::ShapeMismatch(format!(
            "row 0 has {width} logits, expected 1 or {num_classes}"
        )));
    }
    let mut flat = Vec::with_capacity(rows.len() * width);
    for (row, (values, &label)) in rows.iter().zip(labels).enumerate() {
        if values.len() != width {
            return Err(ValidationError::ShapeMismatch(format!(
                "row {row} has {} logits, expected {width}",
                values.len()
            )));
        }
        if let Some(col) = values.iter().position(|z| !z.is_finite()) {
            return Err(ValidationError::NonFiniteLogit { row, col });
        }
        if label >= num_classes {
            return Err(ValidationError::LabelOutOfRange {
                row,
                label,
                num_classes,
            });
        }
        flat.extend_from_slice(values);
    }
    if binary {
        LogitDataset::binary(flat, labels.to_vec())
    } else {
        LogitDataset::multiclass(flat, labels.to_vec(), num_classes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Malignancy {
    Benign,
    Malignant,
}

impl Malignancy {
    pub fn as_str(self) -> &'static str {
        match self {
            Malignancy::Benign => "benign",
            Malignancy::Malignant => "malignant",
        }
    }
}

impl fmt::Display for Malignancy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Malignancy {
    type Err = ValidationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "benign" | "b" => Ok(Malignancy::Benign),
            "malignant" | "m" => Ok(Malignancy::Malignant),
            other => Err(ValidationError::InvalidTaxonomy(format!(
                "unknown malignancy flag {other:?}"
            ))),
        }
    }
}

/// Class names with a benign/malignant flag per class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassTaxonomy {
    names: Vec<String>,
    malignancy: Vec<Malignancy>,
}

impl ClassTaxonomy {
    pub fn new(names: Vec<String>, malignancy: Vec<Malignancy>) -> Result<Self, ValidationError> {
        if names.len() != malignancy.len() {
            return Err(ValidationError::InvalidTaxonomy(format!(
                "{} class names but {} malignancy flags",
                names.len(),
                malignancy.len()
            )));
        }
        if !malignancy.contains(&Malignancy::Benign) {
            return Err(ValidationError::InvalidTaxonomy(
                "at least one class must be benign".into(),
            ));
        }
        if !malignancy.contains(&Malignancy::Malignant) {
            return Err(ValidationError::InvalidTaxonomy(
                "at least one class must be malignant".into(),
            ));
        }
        Ok(Self { names, malignancy })
    }

    /// Taxonomy with generated names `class0..classK-1`.
    pub fn from_flags(malignancy: Vec<Malignancy>) -> Result<Self, ValidationError> {
        let names = (0..malignancy.len()).map(|k| format!("class{k}")).collect();
        Self::new(names, malignancy)
    }

    /// The two-class taxonomy used for binary datasets: class 0 benign, class 1 malignant.
    pub fn binary() -> Self {
        Self {
            names: vec!["benign".into(), "malignant".into()],
            malignancy: vec![Malignancy::Benign, Malignancy::Malignant],
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn malignancy(&self) -> &[Malignancy] {
        &self.malignancy
    }

    pub fn is_benign(&self, class: usize) -> bool {
        self.malignancy[class] == Malignancy::Benign
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn check_matches(&self, dataset: &LogitDataset) -> Result<(), ValidationError> {
        if self.len() != dataset.num_classes() {
            return Err(ValidationError::ShapeMismatch(format!(
                "taxonomy has {} classes, dataset has {}",
                self.len(),
                dataset.num_classes()
            )));
        }
        Ok(())
    }
}

/// Strictly positive divisor applied to logits.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Temperature(f64);

impl Temperature {
    pub const ONE: Temperature = Temperature(1.0);

    pub fn new(value: f64) -> Result<Self, ValidationError> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(ValidationError::InvalidTemperature(value))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Temperature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Action × class cost table. `costs[a][k]` is the cost of taking action `a`
/// when the true class is `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    costs: Vec<f64>,
    action_names: Vec<String>,
    num_classes: usize,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<f64>>, action_names: Vec<String>) -> Result<Self, ValidationError> {
        if rows.len() < 2 {
            return Err(ValidationError::InvalidCostMatrix(format!(
                "need at least 2 actions, got {}",
                rows.len()
            )));
        }
        if action_names.len() != rows.len() {
            return Err(ValidationError::InvalidCostMatrix(format!(
                "{} action names for {} rows",
                action_names.len(),
                rows.len()
            )));
        }
        let num_classes = rows[0].len();
        if num_classes < 2 {
            return Err(ValidationError::InvalidCostMatrix(
                "need at least 2 class columns".into(),
            ));
        }
        let mut costs = Vec::with_capacity(rows.len() * num_classes);
        for (a, row) in rows.iter().enumerate() {
            if row.len() != num_classes {
                return Err(ValidationError::InvalidCostMatrix(format!(
                    "row {a} has {} entries, expected {num_classes}",
                    row.len()
                )));
            }
            for (k, &c) in row.iter().enumerate() {
                if !c.is_finite() || c < 0.0 {
                    return Err(ValidationError::InvalidCostMatrix(format!(
                        "entry ({a}, {k}) = {c} must be finite and >= 0"
                    )));
                }
            }
            costs.extend_from_slice(row);
        }
        let matrix = Self {
            costs,
            action_names,
            num_classes,
        };
        for (worse, better) in matrix.dominated_actions() {
            log::warn!(
                "action {:?} is dominated by action {:?}; it can never be strictly preferred",
                matrix.action_names[worse],
                matrix.action_names[better]
            );
        }
        Ok(matrix)
    }

    /// The 0/1 loss matrix: cost 0 iff action equals class.
    pub fn zero_one(num_classes: usize) -> Self {
        let rows = (0..num_classes)
            .map(|a| (0..num_classes).map(|k| if a == k { 0.0 } else { 1.0 }).collect())
            .collect();
        let names = (0..num_classes).map(|k| format!("class{k}")).collect();
        Self::new(rows, names).expect("0/1 matrix is valid")
    }

    pub fn num_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn action_names(&self) -> &[String] {
        &self.action_names
    }

    pub fn cost(&self, action: usize, class: usize) -> f64 {
        self.costs[action * self.num_classes + class]
    }

    pub fn row(&self, action: usize) -> &[f64] {
        &self.costs[action * self.num_classes..(action + 1) * self.num_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.costs.chunks_exact(self.num_classes)
    }

    /// Pairs `(worse, better)` where action `worse` costs at least as much as
    /// `better` in every column and strictly more in one.
    pub fn dominated_actions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for a in 0..self.num_actions() {
            for b in 0..self.num_actions() {
                if a == b {
                    continue;
                }
                let (ra, rb) = (self.row(a), self.row(b));
                let weakly = ra.iter().zip(rb).all(|(x, y)| x >= y);
                let strictly = ra.iter().zip(rb).any(|(x, y)| x > y);
                if weakly && strictly {
                    out.push((a, b));
                    break;
                }
            }
        }
        out
    }
}

/// Rule choosing which calibration examples enter the temperature objective.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SubsetSelector {
    All,
    /// Binary only: examples with raw logit `z < 0` (predicted probability below 0.5).
    NegativeLogit,
    /// Examples whose predicted class is benign under the taxonomy.
    PredictedBenign(ClassTaxonomy),
}

impl SubsetSelector {
    pub fn name(&self) -> &'static str {
        match self {
            SubsetSelector::All => "all",
            SubsetSelector::NegativeLogit => "negative-logit",
            SubsetSelector::PredictedBenign(_) => "predicted-benign",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_binary_dataset() {
        let ds = validate_dataset(&[vec![1.2], vec![-0.3]], &[1, 0], 2).unwrap();
        assert!(ds.is_binary());
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.num_classes(), 2);
        assert_eq!(ds.scalar_logit(1), -0.3);
    }

    #[test]
    fn non_finite_logit_names_row_and_column() {
        let err = validate_dataset(&[vec![1.0, f64::NAN]], &[0], 2).unwrap_err();
        assert_eq!(err, ValidationError::NonFiniteLogit { row: 0, col: 1 });
    }

    #[test]
    fn label_out_of_range() {
        let err = validate_dataset(&[vec![0.1, 0.2, 0.3]], &[3], 3).unwrap_err();
        assert!(matches!(err, ValidationError::LabelOutOfRange { row: 0, .. }));
    }

    #[test]
    fn first_offending_row_is_reported() {
        let rows = vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![f64::INFINITY, 0.0], vec![0.0, f64::NAN]];
        let err = validate_dataset(&rows, &[0, 5, 0, 0], 2).unwrap_err();
        assert!(matches!(err, ValidationError::LabelOutOfRange { row: 1, .. }));
    }

    #[test]
    fn ragged_rows_are_shape_mismatch() {
        let err = validate_dataset(&[vec![0.0, 1.0, 2.0], vec![0.0]], &[0, 0], 3).unwrap_err();
        assert!(matches!(err, ValidationError::ShapeMismatch(_)));
        let err = validate_dataset(&[vec![0.0]], &[0, 1], 2).unwrap_err();
        assert!(matches!(err, ValidationError::ShapeMismatch(_)));
        let err = validate_dataset(&[vec![0.0]], &[0], 3).unwrap_err();
        assert!(matches!(err, ValidationError::ShapeMismatch(_)));
    }

    #[test]
    fn temperature_rejects_non_positive() {
        assert!(Temperature::new(0.0).is_err());
        assert!(Temperature::new(-1.0).is_err());
        assert!(Temperature::new(f64::NAN).is_err());
        assert!(Temperature::new(f64::INFINITY).is_err());
        assert_eq!(Temperature::new(2.5).unwrap().value(), 2.5);
    }

    #[test]
    fn taxonomy_needs_both_groups() {
        use Malignancy::*;
        assert!(ClassTaxonomy::from_flags(vec![Benign, Benign]).is_err());
        assert!(ClassTaxonomy::from_flags(vec![Malignant]).is_err());
        assert!(ClassTaxonomy::new(vec!["a".into()], vec![Benign, Malignant]).is_err());
        let t = ClassTaxonomy::from_flags(vec![Benign, Malignant, Malignant]).unwrap();
        assert!(t.is_benign(0));
        assert!(!t.is_benign(2));
    }

    #[test]
    fn cost_matrix_validation() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(CostMatrix::new(vec![vec![0.0, 1.0]], vec!["a".into()]).is_err());
        assert!(CostMatrix::new(vec![vec![0.0, -1.0], vec![1.0, 0.0]], names.clone()).is_err());
        assert!(CostMatrix::new(vec![vec![0.0, f64::NAN], vec![1.0, 0.0]], names.clone()).is_err());
        assert!(CostMatrix::new(vec![vec![0.0, 1.0], vec![1.0]], names.clone()).is_err());
        let m = CostMatrix::new(vec![vec![0.0, 10.0], vec![1.0, 0.0]], names).unwrap();
        assert_eq!(m.cost(0, 1), 10.0);
        assert!(m.dominated_actions().is_empty());
    }

    #[test]
    fn dominated_action_is_reported_not_rejected() {
        let names = vec!["cheap".to_string(), "bad".to_string()];
        let m = CostMatrix::new(vec![vec![0.0, 1.0], vec![2.0, 3.0]], names).unwrap();
        assert_eq!(m.dominated_actions(), vec![(1, 0)]);
    }

    #[test]
    fn rescale_and_subset() {
        let ds = LogitDataset::multiclass(vec![2.0, 4.0, 6.0, 8.0], vec![0, 1], 2).unwrap();
        let scaled = ds.rescaled(Temperature::new(2.0).unwrap());
        assert_eq!(scaled.row(1), &[3.0, 4.0]);
        let sub = ds.subset(&[1]);
        assert_eq!(sub.len(), 1);
        assert_eq!(sub.label(0), 1);
        assert_eq!(sub.row(0), &[6.0, 8.0]);
    }
}
