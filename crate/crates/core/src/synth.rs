//! Synthetic logit datasets with a known posterior.
//!
//! Scores are drawn from unit-variance Gaussians whose mean depends on the
//! class, which makes the exact posterior log-odds affine in the score. The
//! emitted logits are those calibrated logits multiplied by a known
//! miscalibration scale, so the NLL-optimal temperature is the scale itself.
//!
//! Binary: `x ~ N(mu_y, 1)`, calibrated `z = ln(pi_1/pi_0) + (mu_1 - mu_0) x - (mu_1^2 - mu_0^2) / 2`.
//! Multi-class: `x ~ N(m_y e_y, I_K)`, calibrated `z_k = ln pi_k + m_k x_k - m_k^2 / 2`.

use crate::rng::substream;
use crate::scaling::{predict_class, sigmoid, softmax_scaled, ProbabilityVector};
use crate::types::{ClassTaxonomy, LogitDataset, Temperature};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_distr::StandardNormal;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthMode {
    Binary,
    Multiclass(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSpec {
    pub n: usize,
    pub mode: SynthMode,
    pub class_priors: Vec<f64>,
    /// Binary: class means `[mu_0, mu_1]`. Multi-class: per-class mean shift along its own axis.
    pub separation: Vec<f64>,
    pub miscal_scale: f64,
    pub seed: u64,
}

impl SynthSpec {
    /// Balanced binary spec with class means -1 and +1.
    pub fn binary(n: usize, miscal_scale: f64, seed: u64) -> Self {
        Self {
            n,
            mode: SynthMode::Binary,
            class_priors: vec![0.5, 0.5],
            separation: vec![-1.0, 1.0],
            miscal_scale,
            seed,
        }
    }

    /// Uniform-prior K-class spec with mean shift 2 per class.
    pub fn multiclass(n: usize, num_classes: usize, miscal_scale: f64, seed: u64) -> Self {
        Self {
            n,
            mode: SynthMode::Multiclass(num_classes),
            class_priors: vec![1.0 / num_classes as f64; num_classes],
            separation: vec![2.0; num_classes],
            miscal_scale,
            seed,
        }
    }

    pub fn num_classes(&self) -> usize {
        match self.mode {
            SynthMode::Binary => 2,
            SynthMode::Multiclass(k) => k,
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let k = self.num_classes();
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if k < 2 {
            return bad(format!("need at least 2 classes, got {k}"));
        }
        if self.class_priors.len() != k || self.separation.len() != k {
            return bad(format!(
                "{} priors and {} separation parameters for {k} classes",
                self.class_priors.len(),
                self.separation.len()
            ));
        }
        if self.class_priors.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return bad("class priors must be positive".into());
        }
        let total: f64 = self.class_priors.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return bad(format!("class priors sum to {total}, expected 1"));
        }
        if self.separation.iter().any(|m| !m.is_finite()) {
            return bad("separation parameters must be finite".into());
        }
        if !(self.miscal_scale > 0.0 && self.miscal_scale.is_finite()) {
            return bad(format!("miscal_scale must be > 0, got {}", self.miscal_scale));
        }
        Ok(())
    }
}

/// Ground-truth posterior for every generated example.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOracle {
    calibrated: Vec<f64>,
    width: usize,
}

impl SynthOracle {
    pub fn len(&self) -> usize {
        self.calibrated.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.calibrated.is_empty()
    }

    pub fn is_binary(&self) -> bool {
        self.width == 1
    }

    /// Calibrated logits of example `i` (one value in binary mode).
    pub fn calibrated_logits(&self, i: usize) -> &[f64] {
        &self.calibrated[i * self.width..(i + 1) * self.width]
    }

    /// True class posterior of example `i`.
    pub fn posterior(&self, i: usize) -> ProbabilityVector {
        let z = self.calibrated_logits(i);
        if self.is_binary() {
            ProbabilityVector::binary(sigmoid(z[0]))
        } else {
            softmax_scaled(z, Temperature::ONE)
        }
    }

    /// True probability of the positive class (binary) or class 1.
    pub fn positive_posterior(&self, i: usize) -> f64 {
        self.posterior(i).as_slice()[1]
    }
}

struct Draw {
    labels: Vec<usize>,
    calibrated: Vec<f64>,
    width: usize,
}

fn draw(spec: &SynthSpec) -> Result<Draw, SynthError> {
    spec.validate()?;
    let k = spec.num_classes();
    let mut rng = substream(spec.seed, 0);
    let classes = WeightedIndex::new(&spec.class_priors).map_err(|e| SynthError::InvalidSpec(e.to_string()))?;
    let log_priors: Vec<f64> = spec.class_priors.iter().map(|p| p.ln()).collect();
    let mut labels = Vec::with_capacity(spec.n);

    let calibrated = match spec.mode {
        SynthMode::Binary => {
            let (mu0, mu1) = (spec.separation[0], spec.separation[1]);
            let bias = log_priors[1] - log_priors[0] - 0.5 * (mu1 * mu1 - mu0 * mu0);
            let slope = mu1 - mu0;
            let mut z = Vec::with_capacity(spec.n);
            for _ in 0..spec.n {
                let y = classes.sample(&mut rng);
                let noise: f64 = StandardNormal.sample(&mut rng);
                let x = spec.separation[y] + noise;
                labels.push(y);
                z.push(bias + slope * x);
            }
            z
        }
        SynthMode::Multiclass(_) => {
            let mut z = Vec::with_capacity(spec.n * k);
            for _ in 0..spec.n {
                let y = classes.sample(&mut rng);
                labels.push(y);
                for c in 0..k {
                    let noise: f64 = StandardNormal.sample(&mut rng);
                    let m = spec.separation[c];
                    let x = if c == y { m + noise } else { noise };
                    z.push(log_priors[c] + m * x - 0.5 * m * m);
                }
            }
            z
        }
    };
    let width = if spec.mode == SynthMode::Binary { 1 } else { k };
    Ok(Draw {
        labels,
        calibrated,
        width,
    })
}

fn assemble(d: Draw, emitted: Vec<f64>) -> (LogitDataset, SynthOracle) {
    let dataset = if d.width == 1 {
        LogitDataset::binary(emitted, d.labels)
    } else {
        LogitDataset::multiclass(emitted, d.labels, d.width)
    }
    .expect("generated logits are finite and labels in range");
    (
        dataset,
        SynthOracle {
            calibrated: d.calibrated,
            width: d.width,
        },
    )
}

/// Dataset whose logits are `miscal_scale` times the calibrated logits.
pub fn generate(spec: &SynthSpec) -> Result<(LogitDataset, SynthOracle), SynthError> {
    let d = draw(spec)?;
    let emitted = d.calibrated.iter().map(|z| spec.miscal_scale * z).collect();
    Ok(assemble(d, emitted))
}

/// Binary dataset scaled by `s_neg` where the calibrated logit is negative
/// and by `s_pos` elsewhere. `spec.miscal_scale` is ignored.
///
/// Positive scales keep the sign of each logit, so the two regions are the
/// same before and after miscalibration.
pub fn generate_region_miscalibrated(
    spec: &SynthSpec,
    s_neg: f64,
    s_pos: f64,
) -> Result<(LogitDataset, SynthOracle), SynthError> {
    if spec.mode != SynthMode::Binary {
        return Err(SynthError::InvalidSpec(
            "region miscalibration by logit sign needs a binary spec".into(),
        ));
    }
    check_scales(s_neg, s_pos)?;
    let d = draw(spec)?;
    let emitted = d
        .calibrated
        .iter()
        .map(|&z| if z < 0.0 { s_neg * z } else { s_pos * z })
        .collect();
    Ok(assemble(d, emitted))
}

/// Multi-class dataset scaled by `s_benign` for examples whose calibrated
/// argmax is a benign class and by `s_malignant` otherwise.
pub fn generate_group_miscalibrated(
    spec: &SynthSpec,
    taxonomy: &ClassTaxonomy,
    s_benign: f64,
    s_malignant: f64,
) -> Result<(LogitDataset, SynthOracle), SynthError> {
    let SynthMode::Multiclass(k) = spec.mode else {
        return Err(SynthError::InvalidSpec(
            "group miscalibration needs a multi-class spec".into(),
        ));
    };
    if taxonomy.len() != k {
        return Err(SynthError::InvalidSpec(format!(
            "taxonomy has {} classes, spec has {k}",
            taxonomy.len()
        )));
    }
    check_scales(s_benign, s_malignant)?;
    let d = draw(spec)?;
    let mut emitted = Vec::with_capacity(d.calibrated.len());
    for row in d.calibrated.chunks_exact(k) {
        let s = if taxonomy.is_benign(predict_class(row)) {
            s_benign
        } else {
            s_malignant
        };
        emitted.extend(row.iter().map(|z| s * z));
    }
    Ok(assemble(d, emitted))
}

fn check_scales(a: f64, b: f64) -> Result<(), SynthError> {
    if [a, b].iter().all(|s| *s > 0.0 && s.is_finite()) {
        Ok(())
    } else {
        Err(SynthError::InvalidSpec(format!("scales must be > 0, got {a} and {b}")))
    }
}
