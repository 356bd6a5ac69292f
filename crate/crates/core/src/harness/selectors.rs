use nalgebra::DVector;

use super::{grid_tasks, summarize, ExperimentSpec, Metric, ResultRecord};
use crate::datagen::{Dataset, Generator, LinearGenerator, LinearSetting, SnrLevel};
use crate::dof::fmt_param;
use crate::error::{ensure, Error, Result};
use crate::linsel::{forward_stepwise, lasso_path, randfs, relax, CoefModel, LambdaGrid, RandFsOptions};
use crate::rng::{self, purpose};

/// Tuning grids of the linear-selector benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectorGrids {
    /// Depths `0..=depth_max` for FS, BaggFS and RandFS.
    pub depth_max: usize,
    pub n_lambda: usize,
    /// Relaxed-lasso weights.
    pub gammas: Vec<f64>,
    /// `mtry` values for the tuned RandFS.
    pub mtry_grid: Vec<f64>,
    /// `mtry` of the untuned RandFS.
    pub default_mtry: f64,
    /// Models per BaggFS / RandFS ensemble.
    pub n_models: usize,
}

impl Default for SelectorGrids {
    fn default() -> Self {
        SelectorGrids {
            depth_max: 10,
            n_lambda: 50,
            gammas: linspace(0.0, 1.0, 10),
            mtry_grid: linspace(0.1, 1.0, 10),
            default_mtry: 0.33,
            n_models: 100,
        }
    }
}

impl SelectorGrids {
    /// Depth `0..=10` and 50 penalties for small problems (`p <= 10`),
    /// otherwise depth up to 50 and 100 penalties; the depth never exceeds
    /// `min(n - 2, p)`.
    pub fn for_setting(s: &LinearSetting) -> Self {
        let small = s.p <= 10;
        let cap = s.n.saturating_sub(2).min(s.p);
        SelectorGrids {
            depth_max: if small { 10 } else { 50 }.min(cap),
            n_lambda: if small { 50 } else { 100 },
            ..Self::default()
        }
    }
}

fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| if i + 1 == count { hi } else { lo + (hi - lo) * i as f64 / (count - 1) as f64 })
        .collect()
}

/// Test error relative to the Bayes error, excluding the intercept:
/// `((b - beta)' Sigma (b - beta) + sigma^2) / sigma^2`.
pub fn rte_bayes(coefs: &DVector<f64>, generator: &LinearGenerator, snr: SnrLevel) -> f64 {
    let d = coefs - generator.beta();
    let sigma2 = generator.noise_variance(snr);
    ((generator.sigma() * &d).dot(&d) + sigma2) / sigma2
}

/// Validation-tuned FS, BaggFS, RandFS (fixed and tuned `mtry`), lasso and
/// relaxed lasso, scored by [`rte_bayes`]. Training and validation sets both
/// have `n` rows and come from separate streams.
pub fn run_selector_benchmark(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    ensure!(spec.metric == Metric::RteBayes, "selector benchmark needs the rte_bayes metric");
    let Generator::Linear(gen) = &spec.generator else {
        return Err(Error::invalid("selector benchmark needs a linear generator"));
    };
    let g = &spec.selectors;
    let (n, p) = (spec.n_train, gen.setting().p);
    ensure!(n >= 3, "need at least three training rows");
    ensure!(
        g.depth_max <= n - 2,
        "depth grid up to {} exceeds n - 2 = {}",
        g.depth_max,
        n - 2
    );
    ensure!(g.depth_max <= p, "depth grid up to {} exceeds p = {p}", g.depth_max);
    ensure!(g.n_lambda >= 2, "need at least two lambda values");
    ensure!(!g.gammas.is_empty() && !g.mtry_grid.is_empty(), "empty tuning grid");
    ensure!(g.n_models >= 1, "need at least one model per ensemble");

    let results = grid_tasks(spec.snr_grid.len(), spec.n_reps, |a, r| {
        let snr = spec.snr_grid[a];
        let (a, r) = (a as u64, r as u64);
        let train = gen.sample(n, snr, &mut rng::stream(spec.seed, &[a, r, purpose::TRAIN]));
        let val = gen.sample(n, snr, &mut rng::stream(spec.seed, &[a, r, purpose::VALIDATION]));
        let fit_seed = rng::derive_seed(spec.seed, &[a, r, purpose::FIT]);
        let picks = fit_and_tune(&train, &val, g, fit_seed)?;
        Ok(picks
            .into_iter()
            .map(|(name, tuned, model)| (name, tuned, rte_bayes(&model.coefs, gen, snr)))
            .collect::<Vec<_>>())
    })?;

    let null = DVector::zeros(p);
    let mut out = Vec::new();
    for (a, reps) in results.iter().enumerate() {
        let snr = spec.snr_grid[a];
        let nu = snr.value();
        for (r, picks) in reps.iter().enumerate() {
            for (name, tuned, rte) in picks {
                out.push(ResultRecord::rep(&spec.id, r, nu, name, tuned.clone(), "rte", *rte));
            }
        }
        for (k, (name, _, _)) in reps[0].iter().enumerate() {
            let vals: Vec<f64> = reps.iter().map(|p| p[k].2).collect();
            out.push(summarize(&spec.id, Some(nu), name, "", "rte", &vals));
        }
        out.push(ResultRecord::summary(&spec.id, Some(nu), "null", "", "rte", rte_bayes(&null, gen, snr), None));
    }
    Ok(out)
}

type Pick = (&'static str, String, CoefModel);

fn fit_and_tune(train: &Dataset, val: &Dataset, g: &SelectorGrids, seed: u64) -> Result<Vec<Pick>> {
    let val_err = |m: &CoefModel| -> Result<f64> { Ok((m.predict(&val.x)? - &val.y).norm_squared()) };
    // first minimum wins
    let best_of = |cands: Vec<(String, CoefModel)>| -> Result<(String, CoefModel)> {
        let mut best: Option<(f64, String, CoefModel)> = None;
        for (label, m) in cands {
            let e = val_err(&m)?;
            if best.as_ref().is_none_or(|b| e < b.0) {
                best = Some((e, label, m));
            }
        }
        let (_, label, m) = best.expect("nonempty candidate list");
        Ok((label, m))
    };
    let depth_path = |models: Vec<CoefModel>| -> Vec<(String, CoefModel)> {
        models.into_iter().enumerate().map(|(k, m)| (format!("d={k}"), m)).collect()
    };
    let ensemble = |mtry: f64| -> Result<Vec<CoefModel>> {
        let opts = RandFsOptions {
            n_models: g.n_models,
            depth: g.depth_max,
            mtry,
            bootstrap: true,
        };
        Ok(randfs(train, &opts, seed)?.averaged)
    };

    let mut picks: Vec<Pick> = Vec::new();
    let fs = forward_stepwise(&train.x, &train.y, g.depth_max)?;
    let (l, m) = best_of(depth_path(fs.iter().cloned().collect()))?;
    picks.push(("fs", l, m));
    let (l, m) = best_of(depth_path(ensemble(1.0)?))?;
    picks.push(("baggfs", l, m));
    let (l, m) = best_of(depth_path(ensemble(g.default_mtry)?))?;
    picks.push(("randfs", format!("mtry={};{l}", fmt_param(g.default_mtry)), m));
    let mut tuned = Vec::new();
    for &mtry in &g.mtry_grid {
        for (l, m) in depth_path(ensemble(mtry)?) {
            tuned.push((format!("mtry={};{l}", fmt_param(mtry)), m));
        }
    }
    let (l, m) = best_of(tuned)?;
    picks.push(("randfs_tuned", l, m));

    let grid = LambdaGrid::for_data(&train.x, &train.y, g.n_lambda)?;
    let path = lasso_path(&train.x, &train.y, &grid)?;
    let lam = |k: usize| format!("lambda={}", super::fmt_g10(grid.values()[k]));
    let (l, m) = best_of(path.iter().enumerate().map(|(k, m)| (lam(k), m.clone())).collect())?;
    picks.push(("lasso", l, m));
    let mut relaxed = Vec::new();
    for (k, m) in path.iter().enumerate() {
        for &gamma in &g.gammas {
            relaxed.push((format!("{};gamma={}", lam(k), fmt_param(gamma)), relax(m, &train.x, &train.y, gamma)?));
        }
    }
    let (l, m) = best_of(relaxed)?;
    picks.push(("relaxed_lasso", l, m));
    Ok(picks)
}
