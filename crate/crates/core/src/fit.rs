//! Temperature estimation by minimising negative log-likelihood over a
//! calibration subset.
//!
//! The subset is chosen from raw logits before any optimisation. Dividing
//! logits by a positive temperature preserves both the sign of a binary
//! logit and the argmax of a logit vector, so membership does not depend on
//! the temperature being searched for. Restricting the objective to the
//! examples whose predictions sit near plausible decision boundaries gives
//! `T*`; using every example gives the usual `T`.

use crate::scaling::{self, predicted_class_of, ScalingError};
use crate::types::{LogitDataset, SubsetSelector, Temperature};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FitError {
    #[error("selector matched no calibration examples")]
    EmptyCalibrationSubset,

    #[error("incompatible selector: {0}")]
    IncompatibleSelector(String),

    #[error("invalid search configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Scaling(#[from] ScalingError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    GoldenSection,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub temperature: Temperature,
    pub subset_size: usize,
    pub final_nll: f64,
    pub iterations: usize,
    pub method: FitMethod,
    /// Set when the minimiser finished within tolerance of a bracket end;
    /// the true optimum may lie outside the bracket.
    pub at_bracket_edge: bool,
}

/// Search bracket and stopping rule for [`fit_temperature`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitConfig {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Stopping width of the bracket, measured on `ln T`.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            t_lo: 0.05,
            t_hi: 20.0,
            tolerance: 1e-6,
            max_iterations: 500,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.t_lo.is_finite() && self.t_hi.is_finite() && self.t_lo > 0.0 && self.t_lo < self.t_hi) {
            return Err(FitError::InvalidConfig(format!(
                "bracket must satisfy 0 < t_lo < t_hi, got [{}, {}]",
                self.t_lo, self.t_hi
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(FitError::InvalidConfig(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Indices of the examples the selector admits, computed from raw logits.
pub fn select_subset(dataset: &LogitDataset, selector: &SubsetSelector) -> Result<Vec<usize>, FitError> {
    match selector {
        SubsetSelector::All => Ok((0..dataset.len()).collect()),
        SubsetSelector::NegativeLogit => {
            if !dataset.is_binary() {
                return Err(FitError::IncompatibleSelector(
                    "negative-logit requires a binary (scalar-logit) dataset".into(),
                ));
            }
            Ok((0..dataset.len()).filter(|&i| dataset.scalar_logit(i) < 0.0).collect())
        }
        SubsetSelector::PredictedBenign(taxonomy) => {
            taxonomy
                .check_matches(dataset)
                .map_err(|e| FitError::IncompatibleSelector(e.to_string()))?;
            Ok((0..dataset.len())
                .filter(|&i| taxonomy.is_benign(predicted_class_of(dataset, i)))
                .collect())
        }
    }
}

/// Result of a one-dimensional golden-section search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineMinimum {
    pub x: f64,
    pub iterations: usize,
}

/// Golden-section search for a minimum of a unimodal `f` on `[lo, hi]`.
///
/// Stops once the bracket is narrower than `tol` and returns its midpoint.
/// On equal interior values the left part of the bracket is kept.
pub fn golden_section<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iterations: usize) -> LineMinimum
where
    F: FnMut(f64) -> f64,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iterations = 0;

    while b - a > tol && iterations < max_iterations {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    LineMinimum {
        x: 0.5 * (a + b),
        iterations,
    }
}

/// Fits a temperature by golden-section search on `ln T` over the bracket in `config`.
pub fn fit_temperature(
    dataset: &LogitDataset,
    selector: &SubsetSelector,
    config: &FitConfig,
) -> Result<FitResult, FitError> {
    config.validate()?;
    let subset = select_subset(dataset, selector)?;
    if subset.is_empty() {
        return Err(FitError::EmptyCalibrationSubset);
    }

    let (u_lo, u_hi) = (config.t_lo.ln(), config.t_hi.ln());
    let objective = |u: f64| {
        let t = Temperature::new(u.exp().clamp(config.t_lo, config.t_hi)).expect("bracket is positive");
        scaling::nll(dataset, t, &subset).expect("subset validated")
    };
    let min = golden_section(objective, u_lo, u_hi, config.tolerance, config.max_iterations);

    let value = min.x.exp().clamp(config.t_lo, config.t_hi);
    let temperature = Temperature::new(value).expect("bracket is positive");
    let at_bracket_edge = min.x - u_lo <= config.tolerance || u_hi - min.x <= config.tolerance;
    if at_bracket_edge {
        log::warn!(
            "fitted temperature {value} is at the edge of the bracket [{}, {}]",
            config.t_lo,
            config.t_hi
        );
    }
    Ok(FitResult {
        temperature,
        subset_size: subset.len(),
        final_nll: scaling::nll(dataset, temperature, &subset)?,
        iterations: min.iterations,
        method: FitMethod::GoldenSection,
        at_bracket_edge,
    })
}

/// Exhaustive evaluation of the subset NLL at every grid temperature.
/// Returns the argmin, preferring the lowest temperature on ties.
pub fn fit_temperature_grid(
    dataset: &LogitDataset,
    selector: &SubsetSelector,
    grid: &[f64],
) -> Result<FitResult, FitError> {
    if grid.is_empty() {
        return Err(FitError::InvalidConfig("temperature grid is empty".into()));
    }
    let temps = grid
        .iter()
        .map(|&g| Temperature::new(g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FitError::InvalidConfig(e.to_string()))?;
    let subset = select_subset(dataset, selector)?;
    if subset.is_empty() {
        return Err(FitError::EmptyCalibrationSubset);
    }

    let mut best = (temps[0], f64::INFINITY);
    for &t in &temps {
        let value = scaling::nll(dataset, t, &subset)?;
        let better = value < best.1 || (value == best.1 && t.value() < best.0.value());
        if better {
            best = (t, value);
        }
    }
    let last = temps.len() - 1;
    let at_bracket_edge = best.0 == temps[0] || best.0 == temps[last];
    Ok(FitResult {
        temperature: best.0,
        subset_size: subset.len(),
        final_nll: best.1,
        iterations: temps.len(),
        method: FitMethod::Grid,
        at_bracket_edge: at_bracket_edge && temps.len() > 1,
    })
}

/// `n` geometrically spaced points from `lo` to `hi` inclusive.
pub fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi / lo).ln() / (n - 1) as f64;
            let mut grid: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
            grid[n - 1] = hi;
            grid
        }
    }
}
