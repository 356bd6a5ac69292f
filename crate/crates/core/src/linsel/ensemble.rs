use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rayon::prelude::*;

use super::ols::{lstsq, pinv_solve};
use super::CoefModel;
use crate::error::{ensure, Result};
use crate::rng;

/// Averaged subsample OLS estimate with the per-feature selection counts
/// (the diagonal of `C`).
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleFit {
    pub model: CoefModel,
    pub selection_counts: Vec<usize>,
}

/// Averages `n_models` no-intercept least-squares fits, each on `m` features
/// drawn uniformly without replacement and, when `t` is given, on `t` rows
/// drawn the same way (solved with the pseudoinverse).
pub fn ols_subsample_ensemble(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    m: usize,
    t: Option<usize>,
    n_models: usize,
    seed: u64,
) -> Result<EnsembleFit> {
    let (n, p) = x.shape();
    ensure!(y.len() == n, "X has {n} rows but y has {} entries", y.len());
    ensure!(n_models >= 1, "need at least one model");
    ensure!(m >= 1 && m <= p, "feature subset size m = {m} must lie in [1, p = {p}]");
    if let Some(t) = t {
        ensure!(t <= n, "row subsample t = {t} exceeds n = {n}");
        ensure!(m + 1 < t, "row subsampling requires m < t - 1 (m = {m}, t = {t})");
    }

    let fits: Vec<(Vec<usize>, DVector<f64>)> = (0..n_models)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[b as u64]);
            let mut feats = index::sample(&mut r, p, m).into_vec();
            feats.sort_unstable();
            let coef = match t {
                None => lstsq(&x.select_columns(&feats), y).0,
                Some(t) => {
                    let mut rows = index::sample(&mut r, n, t).into_vec();
                    rows.sort_unstable();
                    let xs = x.select_rows(&rows).select_columns(&feats);
                    let ys = DVector::from_iterator(t, rows.iter().map(|&i| y[i]));
                    pinv_solve(&xs, &ys)
                }
            };
            (feats, coef)
        })
        .collect();

    let mut sum = DVector::zeros(p);
    let mut counts = vec![0usize; p];
    for (feats, coef) in &fits {
        for (a, &j) in feats.iter().enumerate() {
            sum[j] += coef[a];
            counts[j] += 1;
        }
    }
    Ok(EnsembleFit {
        model: CoefModel::new(0.0, sum / n_models as f64),
        selection_counts: counts,
    })
}
