use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::{summarize, ResultRecord};
use crate::error::{ensure, Result};
use crate::linsel::{ols_subsample_ensemble, ols_through_origin};
use crate::rng::{self, purpose, StreamRng};
use crate::stats;

/// Settings for the two subsample-ensemble checks.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoremSpec {
    pub id: String,
    // feature-subsampling limit on an orthonormal design
    pub t1_n: usize,
    pub t1_p: usize,
    pub t1_m: Vec<usize>,
    pub t1_b_grid: Vec<usize>,
    pub t1_b_final: usize,
    /// Independent ensembles averaged per `B` on the grid.
    pub t1_reps: usize,
    // unbiasedness with row and feature subsampling
    pub t2_n: usize,
    pub t2_m: usize,
    pub t2_t: usize,
    pub t2_beta: Vec<f64>,
    pub t2_models: usize,
    pub t2_reps: usize,
    pub seed: u64,
}

impl TheoremSpec {
    pub fn new(seed: u64) -> Self {
        TheoremSpec {
            id: "theorems".into(),
            t1_n: 64,
            t1_p: 8,
            t1_m: vec![2, 4, 6],
            t1_b_grid: vec![100, 1000, 10_000],
            t1_b_final: 50_000,
            t1_reps: 20,
            t2_n: 100,
            t2_m: 3,
            t2_t: 30,
            t2_beta: vec![1.0, 1.0, 1.0, 0.0, 0.0],
            t2_models: 50,
            t2_reps: 2000,
            seed,
        }
    }
}

/// Ridge penalty whose shrinkage `1 / (1 + lambda)` matches the ensemble's
/// `m / p` on an orthonormal design.
pub fn implied_ridge_penalty(p: usize, m: usize) -> f64 {
    (p - m) as f64 / m as f64
}

/// `|b_ens - (m/p) b_ols|_inf / |b_ols|_inf` for one ensemble of `b` models.
pub fn theorem1_deviation(x: &DMatrix<f64>, y: &DVector<f64>, m: usize, b: usize, seed: u64) -> Result<f64> {
    let ols = ols_through_origin(x, y)?.model.coefs;
    let ens = ols_subsample_ensemble(x, y, m, None, b, seed)?.model.coefs;
    let shrink = m as f64 / x.ncols() as f64;
    Ok((ens - &ols * shrink).amax() / ols.amax())
}

fn gaussian(n: usize, p: usize, r: &mut StreamRng) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal))
}

/// Runs both checks and emits the deviation curve, its log-log slope, the
/// final deviation, the implied ridge penalty, and the componentwise Monte
/// Carlo means of the row-subsampled ensemble against `(m/p) beta`.
pub fn run_theorem_checks(spec: &TheoremSpec) -> Result<Vec<ResultRecord>> {
    let (n, p) = (spec.t1_n, spec.t1_p);
    ensure!(n >= p && p >= 1, "orthonormal design needs n >= p >= 1");
    ensure!(spec.t1_m.iter().all(|&m| m >= 1 && m <= p), "m must lie in [1, p]");
    ensure!(spec.t1_reps >= 2 && spec.t2_reps >= 2, "need at least two replications");
    ensure!(spec.t1_b_grid.len() >= 2, "need at least two ensemble sizes for the slope");
    let p2 = spec.t2_beta.len();
    ensure!(spec.t2_m >= 1 && spec.t2_m <= p2, "m must lie in [1, p]");
    ensure!(spec.t2_m + 1 < spec.t2_t, "row subsampling requires m < t - 1");
    ensure!(spec.t2_t <= spec.t2_n, "t must not exceed n");

    let mut out = Vec::new();
    let id = spec.id.as_str();

    let mut r = rng::stream(spec.seed, &[1, purpose::DESIGN]);
    let x = gaussian(n, p, &mut r).qr().q();
    let y = &x * DVector::from_element(p, 1.0) + DVector::from_fn(n, |_, _| r.sample(StandardNormal));
    for &m in &spec.t1_m {
        let tuned = format!("m={m}");
        let mut log_b = Vec::new();
        let mut log_dev = Vec::new();
        for &b in &spec.t1_b_grid {
            let devs: Vec<f64> = (0..spec.t1_reps)
                .into_par_iter()
                .map(|k| theorem1_deviation(&x, &y, m, b, rng::derive_seed(spec.seed, &[1, m as u64, b as u64, k as u64])))
                .collect::<Result<_>>()?;
            let rec = summarize(id, Some(b as f64), "theorem1", &tuned, "rel_deviation", &devs);
            log_b.push((b as f64).ln());
            log_dev.push(rec.value.ln());
            out.push(rec);
        }
        out.push(ResultRecord::summary(id, None, "theorem1", tuned.clone(), "log_log_slope", stats::ls_slope(&log_b, &log_dev), None));
        let b = spec.t1_b_final;
        let dev = theorem1_deviation(&x, &y, m, b, rng::derive_seed(spec.seed, &[1, m as u64, b as u64, u64::MAX]))?;
        out.push(ResultRecord::summary(id, Some(b as f64), "theorem1", tuned.clone(), "final_rel_deviation", dev, None));
        out.push(ResultRecord::summary(id, None, "theorem1", tuned.clone(), "shrinkage", m as f64 / p as f64, None));
        out.push(ResultRecord::summary(id, None, "theorem1", tuned, "ridge_penalty", implied_ridge_penalty(p, m), None));
    }

    let beta = DVector::from_vec(spec.t2_beta.clone());
    let coefs: Vec<DVector<f64>> = (0..spec.t2_reps)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(spec.seed, &[2, k as u64, purpose::DESIGN]);
            let x = gaussian(spec.t2_n, p2, &mut r);
            let y = &x * &beta + DVector::from_fn(spec.t2_n, |_, _| r.sample(StandardNormal));
            let seed = rng::derive_seed(spec.seed, &[2, k as u64, purpose::FIT]);
            Ok(ols_subsample_ensemble(&x, &y, spec.t2_m, Some(spec.t2_t), spec.t2_models, seed)?.model.coefs)
        })
        .collect::<Result<_>>()?;
    let shrink = spec.t2_m as f64 / p2 as f64;
    for j in 0..p2 {
        let col: Vec<f64> = coefs.iter().map(|c| c[j]).collect();
        let target = shrink * beta[j];
        out.push(summarize(id, Some(target), "theorem2", &format!("j={j}"), "mean_coef", &col));
    }
    out.push(ResultRecord::summary(id, None, "theorem2", format!("m={}", spec.t2_m), "ridge_penalty", implied_ridge_penalty(p2, spec.t2_m), None));
    Ok(out)
}
