//! Regularization-by-randomization laboratory.
//!
//! Regression forests with a tunable proportion of split-eligible features
//! (`mtry`), randomized and bagged forward selection, lasso-family baselines,
//! OLS subsample ensembles and a Monte-Carlo degrees-of-freedom estimator,
//! plus the experiment harness that drives them.
//!
//! Everything stochastic takes an explicit seed and derives independent
//! streams from it (see [`rng`]), so results are identical for any number of
//! worker threads.

pub mod cart;
pub mod datagen;
pub mod dof;
pub mod error;
pub mod forest;
pub mod harness;
pub mod linsel;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};

pub use nalgebra::{DMatrix, DVector};
