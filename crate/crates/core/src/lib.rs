//! Coverage-aware predictive mutation testing.
//!
//! The crate covers the whole offline pipeline: typed mutant corpora with CSV
//! ingestion and coverage filtering ([`dataset`]), ADASYN rebalancing
//! ([`resample`]), CART trees and histogram gradient boosting ([`tree`],
//! [`boost`]), the Random Forest + gradient-boosting bag ensemble
//! ([`ensemble`]), permutation importance and recursive elimination
//! ([`featsel`]), imbalance-robust metrics ([`metrics`]), Scott-Knott ESD
//! ranking ([`skesd`]) and a synthetic corpus generator ([`synth`]).

pub mod boost;
pub mod dataset;
pub mod ensemble;
pub mod error;
pub mod featsel;
pub mod matrix;
pub mod metrics;
pub mod resample;
pub mod seed;
pub mod skesd;
pub mod synth;
pub mod tree;

pub use error::{Error, Result};
pub use matrix::Matrix;

/// Version string recorded in model files and run manifests.
pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");
