//! Lasso by cyclic coordinate descent with warm starts, and the relaxed
//! lasso built on top of it.
//!
//! Objective (on the working scale):
//!
//! ```text
//! (1 / 2n) |y - b0 - X b|^2 + lambda |b|_1
//! ```
//!
//! By default features are centered and scaled to unit variance (divisor
//! `n`) before fitting and coefficients are mapped back to the original
//! scale. `lambda_max = max_j |x_j' y| / n` on the working scale is the
//! smallest penalty with an all-zero solution.

use nalgebra::{DMatrix, DVector};

use super::ols::lstsq;
use super::{CoefModel, SelectionPath};
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LassoOptions {
    pub standardize: bool,
    pub intercept: bool,
    /// Convergence threshold on the largest coefficient change in a sweep.
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for LassoOptions {
    fn default() -> Self {
        LassoOptions {
            standardize: true,
            intercept: true,
            tol: 1e-9,
            max_sweeps: 100_000,
        }
    }
}

/// Decreasing penalty values, optionally with relaxation weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaGrid {
    values: Vec<f64>,
    pub gamma_values: Option<Vec<f64>>,
}

impl LambdaGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure!(!values.is_empty(), "lambda grid is empty");
        ensure!(
            values.iter().all(|v| v.is_finite() && *v > 0.0),
            "lambda values must be positive"
        );
        ensure!(
            values.windows(2).all(|w| w[0] > w[1]),
            "lambda values must be strictly decreasing"
        );
        Ok(LambdaGrid {
            values,
            gamma_values: None,
        })
    }

    /// `count` values from `lambda_max` down to `ratio * lambda_max`,
    /// log-spaced.
    pub fn log_spaced(lambda_max: f64, ratio: f64, count: usize) -> Result<Self> {
        ensure!(lambda_max > 0.0, "lambda_max must be positive (is y constant?)");
        ensure!(ratio > 0.0 && ratio < 1.0, "ratio must lie in (0, 1)");
        ensure!(count >= 2, "need at least two lambda values");
        let (a, b) = (lambda_max.ln(), (lambda_max * ratio).ln());
        let step = (b - a) / (count - 1) as f64;
        let values = (0..count)
            .map(|i| if i == 0 { lambda_max } else { (a + step * i as f64).exp() })
            .collect();
        LambdaGrid::new(values)
    }

    /// Data-anchored grid: `lambda_min / lambda_max` is `1e-4` when `n > p`
    /// and `1e-2` otherwise.
    pub fn for_data(x: &DMatrix<f64>, y: &DVector<f64>, count: usize) -> Result<Self> {
        let ratio = if x.nrows() > x.ncols() { 1e-4 } else { 1e-2 };
        LambdaGrid::log_spaced(lambda_max(x, y, &LassoOptions::default()), ratio, count)
    }

    pub fn with_gammas(mut self, gammas: Vec<f64>) -> Result<Self> {
        ensure!(
            gammas.iter().all(|g| (0.0..=1.0).contains(g)),
            "gamma values must lie in [0, 1]"
        );
        self.gamma_values = Some(gammas);
        Ok(self)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Design on the working scale.
struct Working {
    x: DMatrix<f64>,
    y: DVector<f64>,
    means: DVector<f64>,
    scales: DVector<f64>,
    ybar: f64,
    /// `x_j' x_j / n`
    weights: Vec<f64>,
}

impl Working {
    fn new(x: &DMatrix<f64>, y: &DVector<f64>, opts: &LassoOptions) -> Self {
        let (n, p) = x.shape();
        let nf = n as f64;
        let means = if opts.intercept {
            super::column_means(x)
        } else {
            DVector::zeros(p)
        };
        let mut xw = super::center_columns(x, &means);
        let mut scales = DVector::from_element(p, 1.0);
        if opts.standardize {
            for (j, mut col) in xw.column_iter_mut().enumerate() {
                let sd = (col.norm_squared() / nf).sqrt();
                if sd > 0.0 {
                    col /= sd;
                    scales[j] = sd;
                }
            }
        }
        let ybar = if opts.intercept { y.mean() } else { 0.0 };
        let weights = xw.column_iter().map(|c| c.norm_squared() / nf).collect();
        Working {
            x: xw,
            y: y.add_scalar(-ybar),
            means,
            scales,
            ybar,
            weights,
        }
    }

    fn to_original(&self, b: &DVector<f64>) -> CoefModel {
        let coefs = b.component_div(&self.scales);
        let intercept = self.ybar - self.means.dot(&coefs);
        CoefModel::new(intercept, coefs)
    }

    fn lambda_max(&self) -> f64 {
        let n = self.x.nrows() as f64;
        self.x
            .column_iter()
            .map(|c| (c.dot(&self.y) / n).abs())
            .fold(0.0, f64::max)
    }
}

/// `max_j |x_j' (y - ybar)| / n` on the working scale.
pub fn lambda_max(x: &DMatrix<f64>, y: &DVector<f64>, opts: &LassoOptions) -> f64 {
    Working::new(x, y, opts).lambda_max()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoPath {
    pub path: SelectionPath,
    pub lambdas: Vec<f64>,
    /// False where coordinate descent hit `max_sweeps`.
    pub converged: Vec<bool>,
    pub sweeps: Vec<usize>,
}

/// Lasso path with the default options (standardized, with intercept).
pub fn lasso_path(x: &DMatrix<f64>, y: &DVector<f64>, grid: &LambdaGrid) -> Result<SelectionPath> {
    Ok(lasso_path_with(x, y, grid, &LassoOptions::default())?.path)
}

pub fn lasso_path_with(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    grid: &LambdaGrid,
    opts: &LassoOptions,
) -> Result<LassoPath> {
    let (n, p) = x.shape();
    ensure!(y.len() == n, "X has {n} rows but y has {} entries", y.len());
    ensure!(n >= 1, "lasso needs at least one row");
    let w = Working::new(x, y, opts);
    let lmax = w.lambda_max();
    let nf = n as f64;

    let mut b = DVector::<f64>::zeros(p);
    let mut resid = w.y.clone();
    let mut models = Vec::with_capacity(grid.len());
    let mut converged = Vec::with_capacity(grid.len());
    let mut sweeps = Vec::with_capacity(grid.len());

    for (k, &lambda) in grid.values().iter().enumerate() {
        if lambda >= lmax {
            b.fill(0.0);
            resid.copy_from(&w.y);
            models.push((k, w.to_original(&b)));
            converged.push(true);
            sweeps.push(0);
            continue;
        }
        let mut count = 0;
        let mut ok = false;
        'outer: while count < opts.max_sweeps {
            // full sweep
            let delta = sweep(&w, &mut b, &mut resid, lambda, nf, (0..p).collect::<Vec<_>>().iter().copied());
            count += 1;
            if delta < opts.tol {
                ok = true;
                break;
            }
            // iterate on the active set until it settles, then re-check all
            loop {
                if count >= opts.max_sweeps {
                    break 'outer;
                }
                let act: Vec<usize> = (0..p).filter(|&j| b[j] != 0.0).collect();
                let delta = sweep(&w, &mut b, &mut resid, lambda, nf, act.into_iter());
                count += 1;
                if delta < opts.tol {
                    break;
                }
            }
        }
        models.push((k, w.to_original(&b)));
        converged.push(ok);
        sweeps.push(count);
    }
    Ok(LassoPath {
        path: SelectionPath { models },
        lambdas: grid.values().to_vec(),
        converged,
        sweeps,
    })
}

fn sweep(
    w: &Working,
    b: &mut DVector<f64>,
    resid: &mut DVector<f64>,
    lambda: f64,
    n: f64,
    coords: impl Iterator<Item = usize>,
) -> f64 {
    let mut max_delta: f64 = 0.0;
    for j in coords {
        let wj = w.weights[j];
        if wj == 0.0 {
            continue;
        }
        let col = w.x.column(j);
        let old = b[j];
        let rho = col.dot(resid) / n + wj * old;
        let new = soft_threshold(rho, lambda) / wj;
        if new != old {
            resid.axpy(old - new, &col, 1.0);
            b[j] = new;
            max_delta = max_delta.max((new - old).abs() * wj.sqrt());
        }
    }
    max_delta
}

/// Largest violation of the lasso optimality conditions on the working
/// scale: `|x_j' r| / n <= lambda` off the support and
/// `x_j' r / n = lambda * sign(b_j)` on it.
pub fn kkt_violation(x: &DMatrix<f64>, y: &DVector<f64>, model: &CoefModel, lambda: f64, opts: &LassoOptions) -> f64 {
    let w = Working::new(x, y, opts);
    let n = x.nrows() as f64;
    let b = model.coefs.component_mul(&w.scales);
    let resid = &w.y - &w.x * &b;
    let mut worst: f64 = 0.0;
    for j in 0..x.ncols() {
        if w.weights[j] == 0.0 {
            continue;
        }
        let g = w.x.column(j).dot(&resid) / n;
        let v = if b[j] == 0.0 {
            (g.abs() - lambda).max(0.0)
        } else {
            (g - lambda * b[j].signum()).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// `gamma * lasso + (1 - gamma) * LS refit on the lasso support`.
pub fn relax(lasso: &CoefModel, x: &DMatrix<f64>, y: &DVector<f64>, gamma: f64) -> Result<CoefModel> {
    ensure!((0.0..=1.0).contains(&gamma), "gamma must lie in [0, 1], got {gamma}");
    let p = x.ncols();
    if lasso.support.is_empty() {
        return Ok(CoefModel::new(y.mean(), DVector::zeros(p)));
    }
    let xs = x.select_columns(&lasso.support);
    let means = super::column_means(&xs);
    let ybar = y.mean();
    let (b, _) = lstsq(&super::center_columns(&xs, &means), &y.add_scalar(-ybar));
    let mut coefs = DVector::zeros(p);
    for (a, &j) in lasso.support.iter().enumerate() {
        coefs[j] = b[a];
    }
    let refit = CoefModel::new(ybar - means.dot(&b), coefs);
    Ok(lasso.blend(&refit, gamma))
}

/// Relaxed lasso at a single `(lambda, gamma)`.
pub fn relaxed_lasso(x: &DMatrix<f64>, y: &DVector<f64>, lambda: f64, gamma: f64) -> Result<CoefModel> {
    let grid = LambdaGrid::new(vec![lambda])?;
    let path = lasso_path(x, y, &grid)?;
    relax(path.model(0), x, y, gamma)
}
