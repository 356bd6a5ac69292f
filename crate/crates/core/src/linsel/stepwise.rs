//! Forward stepwise selection and its bootstrap / random-subspace
//! ensembles (BaggFS, RandFS).
//!
//! The selection step keeps every not-yet-active column orthogonalized
//! against the active set (modified Gram-Schmidt), so the RSS decrease of a
//! candidate `j` is `(z_j' r)^2 / |z_j|^2` and the least-squares coefficients
//! of every depth come from one triangular solve.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;

use super::{column_means, CoefModel, SelectionPath};
use crate::datagen::Dataset;
use crate::error::{ensure, Result};
use crate::rng::{self, StreamRng};

/// Columns whose residual norm falls below this fraction of their centered
/// norm add no rank and are skipped.
const COLLINEAR_RTOL: f64 = 1e-10;
const TIE_RTOL: f64 = 1e-12;

/// One forward-selection run in compact form: which feature entered at each
/// step (`None` when no eligible feature could enter) and the least-squares
/// fit at every depth `0..=d`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPath {
    pub steps: Vec<Option<usize>>,
    pub intercepts: Vec<f64>,
    /// `(feature, coefficient)` pairs of the depth-`k` model.
    pub coefs: Vec<Vec<(usize, f64)>>,
}

impl ModelPath {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn model(&self, k: usize, p: usize) -> CoefModel {
        let mut c = DVector::zeros(p);
        for &(j, v) in &self.coefs[k] {
            c[j] = v;
        }
        CoefModel::new(self.intercepts[k], c)
    }

    pub fn to_selection_path(&self, p: usize) -> SelectionPath {
        SelectionPath {
            models: (0..self.intercepts.len()).map(|k| (k, self.model(k, p))).collect(),
        }
    }
}

/// Greedy forward selection to depth `d_max`; depth 0 is the intercept-only
/// model.
pub fn forward_stepwise(x: &DMatrix<f64>, y: &DVector<f64>, d_max: usize) -> Result<SelectionPath> {
    let (n, p) = x.shape();
    ensure!(y.len() == n, "X has {n} rows but y has {} entries", y.len());
    ensure!(n >= 2, "forward selection needs at least two rows");
    ensure!(
        d_max <= (n - 1).min(p),
        "depth {d_max} exceeds min(n - 1, p) = {}",
        (n - 1).min(p)
    );
    let all: Vec<usize> = (0..p).collect();
    let run = stepwise_core(x, y, d_max, |_, _| all.clone());
    Ok(run.to_selection_path(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandFsOptions {
    pub n_models: usize,
    pub depth: usize,
    pub mtry: f64,
    /// Fit each model on a bootstrap resample (BaggFS / RandFS) or on the
    /// original rows.
    pub bootstrap: bool,
}

/// Averaged ensemble at every depth plus the individual runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RandFsFit {
    /// `averaged[k]` is the mean of the depth-`k` models.
    pub averaged: Vec<CoefModel>,
    pub models: Vec<ModelPath>,
}

impl RandFsFit {
    /// The averaged model at the requested depth.
    pub fn model(&self) -> &CoefModel {
        self.averaged.last().expect("depth 0 is always present")
    }

    /// Fraction of runs whose depth-`k` model contains each feature.
    pub fn selection_frequency(&self, k: usize, p: usize) -> Vec<f64> {
        let mut freq = vec![0.0; p];
        for m in &self.models {
            for &(j, _) in &m.coefs[k] {
                freq[j] += 1.0;
            }
        }
        let b = self.models.len() as f64;
        freq.iter_mut().for_each(|f| *f /= b);
        freq
    }
}

/// `ceil(mtry * p)`, at least one.
pub fn randfs_candidates(mtry: f64, p: usize) -> usize {
    ((mtry * p as f64).ceil() as usize).clamp(1, p)
}

/// Randomized forward selection: `n_models` forward-selection runs, each
/// restricted at every step to a fresh uniform draw of `ceil(mtry * p)`
/// features (already-active draws are discarded, not replaced), averaged at
/// the coefficient level. `mtry = 1` with bootstrap is BaggFS.
pub fn randfs(data: &Dataset, opts: &RandFsOptions, seed: u64) -> Result<RandFsFit> {
    let (n, p) = (data.n(), data.p());
    ensure!(opts.n_models >= 1, "need at least one model");
    ensure!(opts.mtry > 0.0 && opts.mtry <= 1.0, "mtry must lie in (0, 1], got {}", opts.mtry);
    ensure!(n >= 3, "need at least three rows");
    ensure!(opts.depth <= n - 2, "depth {} exceeds n - 2 = {}", opts.depth, n - 2);
    ensure!(opts.depth <= p, "depth {} exceeds p = {p}", opts.depth);
    let k = randfs_candidates(opts.mtry, p);

    let models: Vec<ModelPath> = (0..opts.n_models)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, &[b as u64]);
            let eligible = |_: usize, active: &[bool], r: &mut StreamRng| -> Vec<usize> {
                let mut f: Vec<usize> = index::sample(r, p, k).into_iter().filter(|&j| !active[j]).collect();
                f.sort_unstable();
                f
            };
            if opts.bootstrap {
                let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
                let xb = data.x.select_rows(&idx);
                let yb = DVector::from_iterator(n, idx.iter().map(|&i| data.y[i]));
                stepwise_core(&xb, &yb, opts.depth, |s, a| eligible(s, a, &mut r))
            } else {
                stepwise_core(&data.x, &data.y, opts.depth, |s, a| eligible(s, a, &mut r))
            }
        })
        .collect();

    let b = models.len() as f64;
    let averaged = (0..=opts.depth)
        .map(|depth| {
            let mut c = DVector::zeros(p);
            let mut icpt = 0.0;
            for m in &models {
                icpt += m.intercepts[depth];
                for &(j, v) in &m.coefs[depth] {
                    c[j] += v;
                }
            }
            CoefModel::new(icpt / b, c / b)
        })
        .collect();
    Ok(RandFsFit { averaged, models })
}

/// Forward selection where `eligible(step, active)` supplies the candidate
/// features (ascending) at each step.
pub(crate) fn stepwise_core(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    d: usize,
    mut eligible: impl FnMut(usize, &[bool]) -> Vec<usize>,
) -> ModelPath {
    let (n, p) = x.shape();
    let means = column_means(x);
    let ybar = y.mean();

    // Residualized columns, stored contiguously per feature.
    let mut z: Vec<f64> = Vec::with_capacity(n * p);
    let mut base_norm = vec![0.0; p];
    for j in 0..p {
        let col = x.column(j);
        let start = z.len();
        z.extend(col.iter().map(|v| v - means[j]));
        base_norm[j] = z[start..].iter().map(|v| v * v).sum();
    }
    let mut resid: Vec<f64> = y.iter().map(|v| v - ybar).collect();

    let mut active = vec![false; p];
    let mut order: Vec<usize> = Vec::with_capacity(d);
    let mut q_basis: Vec<Vec<f64>> = Vec::with_capacity(d);
    // r_cols[j][i] = q_i' (column j residualized against q_0..q_{i-1})
    let mut r_cols: Vec<Vec<f64>> = vec![Vec::new(); p];
    // c[i] = q_i' y_centered
    let mut qty: Vec<f64> = Vec::with_capacity(d);

    let mut steps = Vec::with_capacity(d);
    let mut intercepts = vec![ybar];
    let mut coefs = vec![Vec::new()];

    for step in 0..d {
        let cand = eligible(step, &active);
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in &cand {
            if active[j] {
                continue;
            }
            let zj = &z[j * n..(j + 1) * n];
            let nz: f64 = zj.iter().map(|v| v * v).sum();
            if base_norm[j] == 0.0 || nz <= COLLINEAR_RTOL * base_norm[j] {
                continue;
            }
            let dot: f64 = zj.iter().zip(&resid).map(|(a, b)| a * b).sum();
            let score = dot * dot / nz;
            if best.is_none_or(|(_, s, _)| score > s + TIE_RTOL * s.abs()) {
                best = Some((j, score, nz));
            }
        }

        let Some((j, _, nz)) = best else {
            steps.push(None);
            intercepts.push(*intercepts.last().unwrap());
            coefs.push(coefs.last().unwrap().clone());
            continue;
        };

        let norm = nz.sqrt();
        let q: Vec<f64> = z[j * n..(j + 1) * n].iter().map(|v| v / norm).collect();
        r_cols[j].push(norm);
        let c: f64 = q.iter().zip(&resid).map(|(a, b)| a * b).sum();
        resid.iter_mut().zip(&q).for_each(|(r, qi)| *r -= c * qi);
        qty.push(c);
        for l in 0..p {
            if active[l] || l == j {
                continue;
            }
            let zl = &mut z[l * n..(l + 1) * n];
            let proj: f64 = zl.iter().zip(&q).map(|(a, b)| a * b).sum();
            zl.iter_mut().zip(&q).for_each(|(v, qi)| *v -= proj * qi);
            r_cols[l].push(proj);
        }
        active[j] = true;
        order.push(j);
        q_basis.push(q);
        steps.push(Some(j));

        // Back-substitution R b = Q'y for the active set in entry order.
        let k = order.len();
        let mut b = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = qty[i];
            for (m, bm) in b.iter().enumerate().take(k).skip(i + 1) {
                s -= r_cols[order[m]][i] * bm;
            }
            b[i] = s / r_cols[order[i]][i];
        }
        let mut model: Vec<(usize, f64)> = order.iter().copied().zip(b).collect();
        model.sort_unstable_by_key(|&(j, _)| j);
        let icpt = ybar - model.iter().map(|&(j, v)| means[j] * v).sum::<f64>();
        intercepts.push(icpt);
        coefs.push(model);
    }

    ModelPath {
        steps,
        intercepts,
        coefs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsel::ols;
    use rand_distr::StandardNormal;

    fn gaussian(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
        let mut r = rng::stream(seed, &[]);
        let x = DMatrix::<f64>::from_fn(n, p, |_, _| r.sample(StandardNormal));
        let y = DVector::from_fn(n, |i, _| 2.0 * x[(i, 1)] - x[(i, 3)] + r.sample::<f64, _>(StandardNormal));
        (x, y)
    }

    fn rss(m: &CoefModel, x: &DMatrix<f64>, y: &DVector<f64>) -> f64 {
        (m.predict(x).unwrap() - y).norm_squared()
    }

    #[test]
    fn depth_zero_is_mean() {
        let (x, y) = gaussian(30, 4, 1);
        let path = forward_stepwise(&x, &y, 0).unwrap();
        assert_eq!(path.len(), 1);
        let m = path.model(0);
        assert_eq!(m.nonzero(), 0);
        let ybar = y.mean();
        let want: f64 = y.iter().map(|v| (v - ybar).powi(2)).sum();
        assert!((rss(m, &x, &y) - want).abs() < 1e-10);
    }

    #[test]
    fn strongest_feature_enters_first() {
        let (x, y) = gaussian(60, 6, 2);
        let path = forward_stepwise(&x, &y, 1).unwrap();
        assert_eq!(path.model(1).support, vec![1]);
    }

    #[test]
    fn coefficients_match_refit() {
        let (x, y) = gaussian(50, 8, 3);
        let path = forward_stepwise(&x, &y, 6).unwrap();
        for k in 1..=6 {
            let m = path.model(k);
            let xs = x.select_columns(&m.support);
            let refit = ols(&xs, &y).unwrap().model;
            assert!((refit.intercept - m.intercept).abs() < 1e-9);
            for (a, &j) in m.support.iter().enumerate() {
                assert!((refit.coefs[a] - m.coefs[j]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn orthogonal_design_enters_by_abs_correlation() {
        let (g, y) = gaussian(40, 6, 4);
        // centered orthogonal columns: orthonormalize [1 G] and drop the constant
        let aug = DMatrix::from_fn(40, 7, |i, j| if j == 0 { 1.0 } else { g[(i, j - 1)] });
        let q = aug.qr().q();
        let x = q.columns(1, 6).into_owned();
        let score: Vec<f64> = (0..6).map(|j| x.column(j).dot(&y).abs()).collect();
        let mut want: Vec<usize> = (0..6).collect();
        want.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
        let all: Vec<usize> = (0..6).collect();
        let run = stepwise_core(&x, &y, 6, |_, _| all.clone());
        let got: Vec<usize> = run.steps.iter().map(|s| s.unwrap()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn depth_guard() {
        let (x, y) = gaussian(5, 8, 5);
        assert!(forward_stepwise(&x, &y, 5).is_err());
        assert!(forward_stepwise(&x, &y, 4).is_ok());
    }

    #[test]
    fn collinear_column_skipped() {
        let (mut x, y) = gaussian(30, 4, 6);
        let c0 = x.column(1) * 3.0;
        x.set_column(2, &c0);
        let path = forward_stepwise(&x, &y, 3).unwrap();
        let last = path.model(3);
        assert!(!(last.support.contains(&1) && last.support.contains(&2)));
    }

    #[test]
    fn randfs_reduces_to_forward_stepwise() {
        let (x, y) = gaussian(40, 7, 7);
        let data = Dataset::new(x.clone(), y.clone()).unwrap();
        let opts = RandFsOptions {
            n_models: 1,
            depth: 5,
            mtry: 1.0,
            bootstrap: false,
        };
        let fit = randfs(&data, &opts, 11).unwrap();
        let fs = forward_stepwise(&x, &y, 5).unwrap();
        for k in 0..=5 {
            assert_eq!(&fit.averaged[k], fs.model(k));
        }
    }

    #[test]
    fn candidate_count_rounds_up() {
        assert_eq!(randfs_candidates(0.33, 10), 4);
        assert_eq!(randfs_candidates(0.1, 10), 1);
        assert_eq!(randfs_candidates(0.01, 10), 1);
        assert_eq!(randfs_candidates(1.0, 10), 10);
    }

    #[test]
    fn randfs_guards() {
        let (x, y) = gaussian(10, 12, 8);
        let data = Dataset::new(x, y).unwrap();
        let opts = RandFsOptions {
            n_models: 3,
            depth: 9,
            mtry: 0.5,
            bootstrap: true,
        };
        assert!(randfs(&data, &opts, 1).is_err());
        assert!(randfs(&data, &RandFsOptions { depth: 8, ..opts }, 1).is_ok());
        assert!(randfs(&data, &RandFsOptions { mtry: 0.0, depth: 3, ..opts }, 1).is_err());
    }

    #[test]
    fn fs_rss_nonincreasing_and_nested() {
        for seed in 0..10 {
            let (x, y) = gaussian(35, 9, 100 + seed);
            let path = forward_stepwise(&x, &y, 9).unwrap();
            for k in 1..path.len() {
                assert!(rss(path.model(k), &x, &y) <= rss(path.model(k - 1), &x, &y) * (1.0 + 1e-12));
                assert_eq!(path.model(k).nonzero(), k);
                assert!(path.model(k - 1).support.iter().all(|j| path.model(k).support.contains(j)));
            }
        }
    }
}
