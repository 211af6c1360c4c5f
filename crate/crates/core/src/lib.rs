//! Unsupervised outlier detection by generative adversarial active learning.
//!
//! - [`nn`]: dense networks, initializers, cross-entropy backprop and SGD.
//! - [`gaal`]: SO-GAAL / MO-GAAL training and scoring.
//! - [`baselines`]: AGPO and kNN-distance detectors.
//! - [`synthgen`], [`dataset`]: synthetic benchmarks and CSV datasets.
//! - [`stats`]: ROC AUC, average ranks, Friedman and Nemenyi.
//! - [`detector`], [`bench`]: run configuration, model files and benchmark reports.

pub mod baselines;
pub mod bench;
pub mod dataset;
pub mod detector;
pub mod error;
pub mod gaal;
pub mod matrix;
pub mod nn;
pub mod stats;
pub mod synthgen;

pub use dataset::{load_csv, Dataset, Normalizer, Provenance};
pub use detector::{fit_detector, DetectorKind, DetectorSpec, ModelFile, RunConfig};
pub use error::{Error, Result};
pub use gaal::{mo_gaal_fit, so_gaal_fit, GaalConfig, GaalModel};
pub use matrix::Matrix;
pub use nn::Mlp;
pub use synthgen::{gen_synthetic, Family, SynthSpec};
