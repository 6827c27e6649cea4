//! Data-efficient mutual information estimation.
//!
//! The [`demine`] module implements the predictive estimator: a separable
//! critic is trained on one half of the data and the MINE-f lower bound is
//! evaluated on the other, with a Hoeffding-style confidence interval from
//! [`confidence`]. [`meta`] adds a meta-learned initialisation over augmented
//! tasks, [`baselines`] provides KSG and MINE-f, and [`synthetic`] generates
//! benchmark data with known ground truth.

pub mod baselines;
pub mod bench;
pub mod bounds;
pub mod confidence;
pub mod dataset;
pub mod demine;
pub mod error;
pub mod meta;
pub mod nn;
pub mod seed;
pub mod synthetic;

pub use dataset::{PairedDataset, Provenance};
pub use error::{Error, Result};
