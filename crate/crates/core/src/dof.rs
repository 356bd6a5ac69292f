//! Monte-Carlo degrees of freedom, `df = (1/sigma^2) sum_i Cov(yhat_i, y_i)`,
//! for a fixed design `X` and signal `f`.
//!
//! Replication `r` draws `y = f + eps` from its own stream and hands the fitter
//! a seed derived from `(seed, r)`. Fitters may return several fitted vectors
//! per call (a whole path or grid); every output then sees the same noise
//! draws, which keeps comparisons across grid points tight.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::cart::TreeConfig;
use crate::datagen::{Dataset, Generator, SnrLevel};
use crate::error::{ensure, Error, Result};
use crate::forest::fit_forest;
use crate::linsel::{lasso_path, randfs, relax, LambdaGrid, RandFsOptions};
use crate::rng::{self, purpose};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DofEstimate {
    pub dof: f64,
    /// Monte-Carlo standard error of `dof`.
    pub se: f64,
    pub n_reps: usize,
}

/// One fitted vector, with the number of nonzero coefficients for linear
/// estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub yhat: DVector<f64>,
    pub nonzero: Option<f64>,
}

impl From<DVector<f64>> for Fitted {
    fn from(yhat: DVector<f64>) -> Self {
        Fitted { yhat, nonzero: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofPoint {
    pub estimate: DofEstimate,
    /// Mean of `Fitted::nonzero` across replications, if reported.
    pub mean_nonzero: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DofCurve {
    pub fitter_id: String,
    /// `maxnodes` values or mean nonzero-coefficient counts.
    pub complexity_axis: Vec<f64>,
    pub dof_estimates: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Grid labels, e.g. `maxnodes=10` or `d=3`.
    pub labels: Vec<String>,
    pub n_reps: usize,
}

/// Degrees of freedom of a single fit-predict procedure.
pub fn estimate_dof<F>(fitter: F, x: &DMatrix<f64>, f: &DVector<f64>, sigma2: f64, n_reps: usize, seed: u64) -> Result<DofEstimate>
where
    F: Fn(&DMatrix<f64>, &DVector<f64>, u64) -> Result<DVector<f64>> + Sync,
{
    let points = estimate_dof_multi(
        |x, y, s| fitter(x, y, s).map(|v| vec![Fitted::from(v)]),
        x,
        f,
        sigma2,
        n_reps,
        seed,
    )?;
    Ok(points[0].estimate)
}

/// Degrees of freedom of every output of a multi-output fitter.
pub fn estimate_dof_multi<F>(
    fitter: F,
    x: &DMatrix<f64>,
    f: &DVector<f64>,
    sigma2: f64,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<DofPoint>>
where
    F: Fn(&DMatrix<f64>, &DVector<f64>, u64) -> Result<Vec<Fitted>> + Sync,
{
    ensure!(sigma2.is_finite() && sigma2 > 0.0, "sigma2 must be positive, got {sigma2}");
    ensure!(n_reps >= 2, "need at least two replications, got {n_reps}");
    let n = x.nrows();
    ensure!(f.len() == n, "signal has {} entries but X has {n} rows", f.len());
    let sd = sigma2.sqrt();

    let reps: Vec<(DVector<f64>, Vec<Fitted>)> = (0..n_reps)
        .into_par_iter()
        .map(|r| {
            let mut noise = rng::stream(seed, &[r as u64, purpose::NOISE]);
            let y = DVector::from_fn(n, |i, _| f[i] + sd * noise.sample::<f64, _>(StandardNormal));
            let fit_seed = rng::derive_seed(seed, &[r as u64, purpose::FIT]);
            let out = fitter(x, &y, fit_seed).map_err(|e| Error::Replication {
                rep: r,
                source: Box::new(e),
            })?;
            Ok((y, out))
        })
        .collect::<Result<_>>()?;

    let k = reps[0].1.len();
    ensure!(
        reps.iter().all(|(_, o)| o.len() == k && o.iter().all(|v| v.yhat.len() == n)),
        "fitter returned inconsistent outputs across replications"
    );
    let rf = n_reps as f64;
    let y_mean = reps.iter().fold(DVector::zeros(n), |acc, (y, _)| acc + y) / rf;

    Ok((0..k)
        .map(|out| {
            let yhat_mean = reps.iter().fold(DVector::zeros(n), |acc, (_, o)| acc + &o[out].yhat) / rf;
            let u: Vec<f64> = reps
                .iter()
                .map(|(y, o)| {
                    let a = &o[out].yhat - &yhat_mean;
                    let b = y - &y_mean;
                    a.dot(&b) / sigma2
                })
                .collect();
            let dof = u.iter().sum::<f64>() / (rf - 1.0);
            let se = crate::stats::sample_sd(&u) * rf.sqrt() / (rf - 1.0);
            let nonzero: Vec<f64> = reps.iter().filter_map(|(_, o)| o[out].nonzero).collect();
            DofPoint {
                estimate: DofEstimate { dof, se, n_reps },
                mean_nonzero: (nonzero.len() == n_reps).then(|| crate::stats::mean(&nonzero)),
            }
        })
        .collect())
}

/// Draws a design once and returns it with its noiseless signal and noise
/// variance, ready to be frozen for a dof experiment.
pub fn fixed_design(generator: &Generator, n: usize, snr: SnrLevel, seed: u64) -> Dataset {
    let mut r = rng::stream(seed, &[purpose::DESIGN]);
    generator.sample(n, snr, &mut r)
}

/// Forest dof over an `mtry x maxnodes` grid. One forest per `mtry` is grown
/// to the largest cap and evaluated at every smaller cap.
pub fn dof_curve_forest(
    design: &Dataset,
    mtry_list: &[f64],
    maxnodes_list: &[usize],
    n_trees: usize,
    n_reps: usize,
    seed: u64,
) -> Result<Vec<DofCurve>> {
    let (f, sigma2) = signal_of(design)?;
    ensure!(!mtry_list.is_empty() && !maxnodes_list.is_empty(), "empty grid");
    ensure!(maxnodes_list.iter().all(|&m| m >= 1), "maxnodes must be positive");
    let cap = *maxnodes_list.iter().max().unwrap();
    let fitter = |x: &DMatrix<f64>, y: &DVector<f64>, s: u64| -> Result<Vec<Fitted>> {
        let data = Dataset::new(x.clone(), y.clone())?;
        let mut out = Vec::with_capacity(mtry_list.len() * maxnodes_list.len());
        for &mtry in mtry_list {
            let cfg = TreeConfig::default().with_mtry(mtry).with_maxnodes(Some(cap));
            let forest = fit_forest(&data, &cfg, n_trees, s)?;
            for &m in maxnodes_list {
                out.push(forest.predict_with_leaf_cap(x, m)?.into());
            }
        }
        Ok(out)
    };
    let points = estimate_dof_multi(fitter, &design.x, f, sigma2, n_reps, seed)?;
    Ok(mtry_list
        .iter()
        .enumerate()
        .map(|(a, &mtry)| {
            let pts = &points[a * maxnodes_list.len()..(a + 1) * maxnodes_list.len()];
            DofCurve {
                fitter_id: format!("rf_mtry={}", fmt_param(mtry)),
                complexity_axis: maxnodes_list.iter().map(|&m| m as f64).collect(),
                dof_estimates: pts.iter().map(|p| p.estimate.dof).collect(),
                std_errors: pts.iter().map(|p| p.estimate.se).collect(),
                labels: maxnodes_list.iter().map(|m| format!("maxnodes={m}")).collect(),
                n_reps,
            }
        })
        .collect())
}

/// Settings for the linear-selector dof comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorDofSpec {
    pub depth_max: usize,
    /// Models per BaggFS / RandFS ensemble.
    pub n_models: usize,
    /// RandFS `mtry` values (BaggFS, `mtry = 1`, is always included).
    pub randfs_mtry: Vec<f64>,
    pub n_lambda: usize,
    /// Relaxation weights for the relaxed lasso curves.
    pub gammas: Vec<f64>,
}

impl Default for SelectorDofSpec {
    fn default() -> Self {
        SelectorDofSpec {
            depth_max: 10,
            n_models: 100,
            randfs_mtry: vec![0.1, 0.33, 0.67],
            n_lambda: 50,
            gammas: vec![0.0, 0.5],
        }
    }
}

/// Dof of FS, BaggFS, RandFS, lasso and relaxed lasso along their tuning
/// paths, plotted against the mean number of nonzero coefficients.
pub fn dof_curve_selectors(design: &Dataset, spec: &SelectorDofSpec, n_reps: usize, seed: u64) -> Result<Vec<DofCurve>> {
    let (f, sigma2) = signal_of(design)?;
    let (n, p) = design.x.shape();
    ensure!(spec.depth_max <= (n - 2).min(p), "depth grid exceeds min(n - 2, p)");

    // Lambda grid anchored on a pilot draw and frozen across replications.
    let mut pilot_rng = rng::stream(seed, &[u64::MAX, purpose::NOISE]);
    let sd = sigma2.sqrt();
    let pilot = DVector::from_fn(n, |i, _| f[i] + sd * pilot_rng.sample::<f64, _>(StandardNormal));
    let grid = LambdaGrid::for_data(&design.x, &pilot, spec.n_lambda)?;

    let ens_mtry: Vec<f64> = std::iter::once(1.0).chain(spec.randfs_mtry.iter().copied()).collect();
    let mut ids = vec!["fs".to_string()];
    ids.extend(ens_mtry.iter().map(|&m| {
        if m == 1.0 {
            "baggfs".to_string()
        } else {
            format!("randfs_mtry={}", fmt_param(m))
        }
    }));
    let path_len = spec.depth_max + 1;

    let fitter = |x: &DMatrix<f64>, y: &DVector<f64>, s: u64| -> Result<Vec<Fitted>> {
        let data = Dataset::new(x.clone(), y.clone())?;
        let mut out = Vec::new();
        let fs = crate::linsel::forward_stepwise(x, y, spec.depth_max)?;
        for m in fs.iter() {
            out.push(linear_fitted(m, x)?);
        }
        for &mtry in &ens_mtry {
            let opts = RandFsOptions {
                n_models: spec.n_models,
                depth: spec.depth_max,
                mtry,
                bootstrap: true,
            };
            let fit = randfs(&data, &opts, s)?;
            for m in &fit.averaged {
                out.push(linear_fitted(m, x)?);
            }
        }
        let lasso = lasso_path(x, y, &grid)?;
        for m in lasso.iter() {
            out.push(linear_fitted(m, x)?);
        }
        for &g in &spec.gammas {
            for m in lasso.iter() {
                out.push(linear_fitted(&relax(m, x, y, g)?, x)?);
            }
        }
        Ok(out)
    };
    let points = estimate_dof_multi(fitter, &design.x, f, sigma2, n_reps, seed)?;

    let mut curves = Vec::new();
    let mut offset = 0;
    let mut take = |id: String, len: usize, label: &dyn Fn(usize) -> String| {
        let pts = &points[offset..offset + len];
        offset += len;
        curves.push(DofCurve {
            fitter_id: id,
            complexity_axis: pts.iter().map(|p| p.mean_nonzero.unwrap_or(f64::NAN)).collect(),
            dof_estimates: pts.iter().map(|p| p.estimate.dof).collect(),
            std_errors: pts.iter().map(|p| p.estimate.se).collect(),
            labels: (0..len).map(label).collect(),
            n_reps,
        });
    };
    for id in ids {
        take(id, path_len, &|k| format!("d={k}"));
    }
    let lambdas = grid.values().to_vec();
    take("lasso".into(), lambdas.len(), &|k| format!("lambda={}", fmt_param(lambdas[k])));
    for &g in &spec.gammas {
        take(format!("relaxed_gamma={}", fmt_param(g)), lambdas.len(), &|k| {
            format!("lambda={}", fmt_param(lambdas[k]))
        });
    }
    Ok(curves)
}

fn linear_fitted(m: &crate::linsel::CoefModel, x: &DMatrix<f64>) -> Result<Fitted> {
    Ok(Fitted {
        yhat: m.predict(x)?,
        nonzero: Some(m.nonzero() as f64),
    })
}

fn signal_of(design: &Dataset) -> Result<(&DVector<f64>, f64)> {
    match (&design.f, design.sigma2) {
        (Some(f), Some(s)) => Ok((f, s)),
        _ => Err(Error::invalid("dof curves need a synthetic design with known signal and noise variance")),
    }
}

/// Compact decimal label for a grid parameter.
pub fn fmt_param(v: f64) -> String {
    let s = format!("{v:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{LinearSetting, MarsFunction};
    use crate::linsel::ols;

    fn design(n: usize, seed: u64) -> Dataset {
        let g = Generator::linear(LinearSetting::new(n, 6, 3, 0.35).unwrap()).unwrap();
        fixed_design(&g, n, SnrLevel::new(1.0).unwrap(), seed)
    }

    fn within(est: DofEstimate, want: f64, k: f64) -> bool {
        (est.dof - want).abs() <= k * est.se
    }

    #[test]
    fn intercept_only_has_one_dof() {
        let d = design(50, 1);
        let est = estimate_dof(
            |_, y, _| Ok(DVector::from_element(y.len(), y.mean())),
            &d.x,
            d.f.as_ref().unwrap(),
            d.sigma2.unwrap(),
            200,
            3,
        )
        .unwrap();
        assert!(within(est, 1.0, 3.0), "{est:?}");
    }

    #[test]
    fn ols_dof_is_trace_of_hat_matrix() {
        let d = design(40, 2);
        let cols = [0usize, 2, 4];
        let xs = d.x.select_columns(&cols);
        let est = estimate_dof(
            |_, y, _| ols(&xs, y)?.model.predict(&xs),
            &d.x,
            d.f.as_ref().unwrap(),
            d.sigma2.unwrap(),
            300,
            4,
        )
        .unwrap();
        assert!(within(est, 4.0, 3.0), "{est:?}");
    }

    #[test]
    fn interpolant_has_n_dof() {
        let d = design(30, 3);
        let est = estimate_dof(|_, y, _| Ok(y.clone()), &d.x, d.f.as_ref().unwrap(), d.sigma2.unwrap(), 200, 5).unwrap();
        assert!(within(est, 30.0, 3.0), "{est:?}");
    }

    #[test]
    fn ridge_dof_matches_trace() {
        let d = design(40, 6);
        let (n, p) = d.x.shape();
        let xc = {
            let m = DVector::from_iterator(p, d.x.column_iter().map(|c| c.mean()));
            let mut xc = d.x.clone();
            for (j, mut c) in xc.column_iter_mut().enumerate() {
                c.add_scalar_mut(-m[j]);
            }
            xc
        };
        for &lambda in &[0.5, 5.0, 50.0] {
            let a = (xc.tr_mul(&xc) + DMatrix::identity(p, p) * lambda).try_inverse().unwrap();
            let hat = &xc * a * xc.transpose() + DMatrix::from_element(n, n, 1.0 / n as f64);
            let trace = hat.trace();
            let est = estimate_dof(|_, y, _| Ok(&hat * y), &d.x, d.f.as_ref().unwrap(), d.sigma2.unwrap(), 300, 9).unwrap();
            assert!(within(est, trace, 3.0), "lambda {lambda}: {est:?} vs {trace}");
        }
    }

    #[test]
    fn shift_invariance() {
        let d = design(25, 7);
        let f = d.f.clone().unwrap();
        let fit = |_: &DMatrix<f64>, y: &DVector<f64>, _: u64| Ok(y * 0.5);
        let a = estimate_dof(fit, &d.x, &f, 1.0, 50, 1).unwrap();
        let b = estimate_dof(fit, &d.x, &f.add_scalar(10.0), 1.0, 50, 1).unwrap();
        assert!((a.dof - b.dof).abs() < 1e-9);
    }

    #[test]
    fn se_shrinks_with_reps() {
        let d = design(30, 8);
        let f = d.f.clone().unwrap();
        let fit = |_: &DMatrix<f64>, y: &DVector<f64>, _: u64| Ok(y * 0.3);
        let a = estimate_dof(fit, &d.x, &f, 1.0, 200, 2).unwrap();
        let b = estimate_dof(fit, &d.x, &f, 1.0, 800, 2).unwrap();
        let ratio = a.se / b.se;
        assert!((1.5..2.7).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn guards_and_failures() {
        let d = design(10, 9);
        let f = d.f.clone().unwrap();
        let ok = |_: &DMatrix<f64>, y: &DVector<f64>, _: u64| Ok(y.clone());
        assert!(estimate_dof(ok, &d.x, &f, 0.0, 10, 1).is_err());
        assert!(estimate_dof(ok, &d.x, &f, 1.0, 1, 1).is_err());
        let err = estimate_dof(
            |_, _, s| if s % 3 == 0 { Err(Error::invalid("boom")) } else { Ok(DVector::zeros(10)) },
            &d.x,
            &f,
            1.0,
            40,
            1,
        );
        assert!(matches!(err, Err(Error::Replication { .. })));
    }

    #[test]
    fn single_leaf_forest_has_about_one_dof() {
        let g = Generator::Mars(MarsFunction::MarsAdd);
        let d = fixed_design(&g, 60, SnrLevel::new(1.0).unwrap(), 3);
        let curves = dof_curve_forest(&d, &[0.2, 1.0], &[1], 20, 100, 5).unwrap();
        for c in curves {
            // bootstrap means vary around ybar; dof stays close to one
            assert!((c.dof_estimates[0] - 1.0).abs() < 3.0 * c.std_errors[0] + 0.1, "{c:?}");
        }
    }

    #[test]
    fn param_formatting() {
        assert_eq!(fmt_param(0.33), "0.33");
        assert_eq!(fmt_param(1.0), "1");
        assert_eq!(fmt_param(0.1), "0.1");
    }
}
