//! Temperature scaling, calibration metrics and cost-sensitive decisions for
//! classifier logits with a benign/malignant class taxonomy.

pub mod decision;
pub mod fit;
pub mod io;
pub mod metrics;
pub mod reliability;
pub mod rng;
pub mod scaling;
pub mod synth;
pub mod types;

pub use types::{ClassTaxonomy, CostMatrix, LogitDataset, Malignancy, SubsetSelector, Temperature, ValidationError};
