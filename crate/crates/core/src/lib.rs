//! Bayesian replacements for common frequentist analyses: conjugate and
//! approximate GLM regression, simple tests, survival curves, model averaging
//! and causal mediation, all with Monte Carlo sample sizes chosen so that
//! reported interval endpoints are accurate.

// negated comparisons are used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod band;
pub mod cli;
pub mod bma;
pub mod data;
pub mod design;
pub mod dist;
pub mod elicit;
pub mod error;
pub mod fixtures;
pub mod formula;
pub mod glm;
pub mod ic;
pub mod linear;
pub mod mc_plan;
pub mod mediation;
pub mod np_boot;
pub mod optim;
pub mod report;
pub mod rng;
pub mod simple;
pub mod special;
pub mod stats;
pub mod summary;
pub mod survival;

pub use error::{Error, Result};
