//! Functional data depths and depth-based supervised classification.
//!
//! The crate provides:
//!
//! - seven functional depths: FMD, HMD, RTD, IDD, MBD, FSD and the
//!   kernelized spatial depth KFSD ([`depths`]);
//! - three depth-based binary classifiers (distance to trimmed mean,
//!   weighted average distance, within maximum depth) and functional
//!   k-nearest neighbors ([`classify`]);
//! - cross-validated selection of the KFSD bandwidth percentile
//!   ([`modelselect`]);
//! - seeded Gaussian-process curve simulation models ([`simulate`]);
//! - CSV ingestion, natural cubic spline re-gridding and train/test
//!   splitting of real curve datasets ([`datasets`]);
//! - a deterministic replication runner with misclassification summaries
//!   and table emission ([`experiments`]).

pub mod classify;
pub mod datasets;
pub mod depths;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod modelselect;
pub mod rng;
pub mod sample;
pub mod simulate;

pub use error::{Error, Result};
pub use sample::{Curve, DepthKind, DepthSpec, FunctionalSample, Grid, LabeledSample};
