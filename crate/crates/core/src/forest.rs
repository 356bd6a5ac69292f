//! Bagged regression forests: `B` trees, each on its own bootstrap resample
//! and random stream, predictions averaged. `mtry = 1` is bagging.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::cart::{fit_tree_impl, prefers_presort, RowOrder, TreeConfig, TreeModel};
use crate::datagen::Dataset;
use crate::error::{ensure, Error, Result};
use crate::rng;

pub const DEFAULT_TREES: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub cfg: TreeConfig,
}

impl ForestModel {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.predict_with_leaf_cap(x, usize::MAX)
    }

    /// Forest of the same trees, each truncated to at most `max_leaves`
    /// terminal nodes.
    pub fn predict_with_leaf_cap(&self, x: &DMatrix<f64>, max_leaves: usize) -> Result<DVector<f64>> {
        let p = self.trees[0].n_features();
        if x.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                actual: x.ncols(),
            });
        }
        let splits = max_leaves.saturating_sub(1);
        let b = self.trees.len() as f64;
        let out: Vec<f64> = (0..x.nrows())
            .into_par_iter()
            .map(|i| {
                let row = x.row(i);
                let s: f64 = self.trees.iter().map(|t| t.route(|j| row[j], splits)).sum();
                s / b
            })
            .collect();
        Ok(DVector::from_vec(out))
    }

    /// Average over trees of the fraction of distinct training rows in bag.
    pub fn mean_inbag_fraction(&self, n: usize) -> f64 {
        let mut seen = vec![false; n];
        let total: f64 = self
            .trees
            .iter()
            .map(|t| {
                seen.iter_mut().for_each(|s| *s = false);
                t.inbag_indices().iter().for_each(|&i| seen[i] = true);
                seen.iter().filter(|&&s| s).count() as f64 / n as f64
            })
            .sum();
        total / self.trees.len() as f64
    }
}

/// Fits `n_trees` trees; tree `b` uses the stream derived from `(seed, b)`,
/// so the result does not depend on the thread count.
pub fn fit_forest(data: &Dataset, cfg: &TreeConfig, n_trees: usize, seed: u64) -> Result<ForestModel> {
    ensure!(n_trees >= 1, "a forest needs at least one tree");
    cfg.validate()?;
    let order = prefers_presort(cfg, data.n(), data.p()).then(|| RowOrder::new(&data.x, &data.y));
    let trees = (0..n_trees)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[b as u64]);
            fit_tree_impl(&data.x, &data.y, cfg, &mut r, order.as_ref())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ForestModel { trees, cfg: *cfg })
}

pub fn predict_forest(model: &ForestModel, x: &DMatrix<f64>) -> Result<DVector<f64>> {
    model.predict(x)
}
