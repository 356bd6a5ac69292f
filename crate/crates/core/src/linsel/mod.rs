//! Linear-model estimators: least squares, forward stepwise and its bagged
//! and randomized ensembles, the lasso, the relaxed lasso and averaged OLS
//! fits on random feature (and row) subsets.

mod ensemble;
mod lasso;
mod ols;
mod stepwise;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub use ensemble::{ols_subsample_ensemble, EnsembleFit};
pub use lasso::{
    kkt_violation, lambda_max, lasso_path, lasso_path_with, relax, relaxed_lasso, soft_threshold, LambdaGrid,
    LassoOptions, LassoPath,
};
pub use ols::{ols, ols_through_origin, OlsFit};
pub use stepwise::{forward_stepwise, randfs, randfs_candidates, ModelPath, RandFsFit, RandFsOptions};

/// Linear model `intercept + x' coefs`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefModel {
    pub intercept: f64,
    pub coefs: DVector<f64>,
    /// Indices of the nonzero coefficients, ascending.
    pub support: Vec<usize>,
}

impl CoefModel {
    pub fn new(intercept: f64, coefs: DVector<f64>) -> Self {
        let support = coefs
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0.0)
            .map(|(j, _)| j)
            .collect();
        CoefModel {
            intercept,
            coefs,
            support,
        }
    }

    pub fn zero(p: usize) -> Self {
        CoefModel::new(0.0, DVector::zeros(p))
    }

    pub fn p(&self) -> usize {
        self.coefs.len()
    }

    pub fn nonzero(&self) -> usize {
        self.support.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        if x.ncols() != self.p() {
            return Err(Error::DimensionMismatch {
                expected: self.p(),
                actual: x.ncols(),
            });
        }
        Ok((x * &self.coefs).add_scalar(self.intercept))
    }

    /// `gamma * self + (1 - gamma) * other`, intercepts included.
    pub fn blend(&self, other: &CoefModel, gamma: f64) -> CoefModel {
        CoefModel::new(
            gamma * self.intercept + (1.0 - gamma) * other.intercept,
            &self.coefs * gamma + &other.coefs * (1.0 - gamma),
        )
    }
}

/// Ordered sequence of fitted models, indexed by depth or lambda position.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SelectionPath {
    pub models: Vec<(usize, CoefModel)>,
}

impl SelectionPath {
    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn model(&self, k: usize) -> &CoefModel {
        &self.models[k].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &CoefModel> {
        self.models.iter().map(|(_, m)| m)
    }
}

pub(crate) fn column_means(x: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()))
}

pub(crate) fn center_columns(x: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    xc
}
