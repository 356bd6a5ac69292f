use super::{grid_tasks, mse, mtry_label, summarize, ExperimentSpec, Metric, ResultRecord};
use crate::cart::TreeConfig;
use crate::error::{ensure, Result};
use crate::forest::fit_forest;
use crate::rng::{self, purpose};
use crate::stats;

const ARGMIN_OF_MEAN: &str = "argmin_of_mean";
const MEAN_OF_ARGMIN: &str = "mean_of_argmin";

/// Test error of a forest at every `mtry` in the grid, per SNR and
/// replication, and the optimal `mtry` under two aggregations: the argmin of
/// the mean error curve, and the mean of the per-replication argmins.
pub fn run_optimal_mtry(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    ensure!(spec.metric == Metric::OptimalMtry, "optimal-mtry run needs the optimal_mtry metric");
    let grid = &spec.mtry_grid;

    let results = grid_tasks(spec.snr_grid.len(), spec.n_reps, |a, r| {
        let snr = spec.snr_grid[a];
        let (a, r) = (a as u64, r as u64);
        let train = spec.generator.sample(spec.n_train, snr, &mut rng::stream(spec.seed, &[a, r, purpose::TRAIN]));
        let test = spec.generator.sample(spec.test_size, snr, &mut rng::stream(spec.seed, &[a, r, purpose::TEST]));
        let fit_seed = rng::derive_seed(spec.seed, &[a, r, purpose::FIT]);
        grid.iter()
            .map(|&m| {
                let forest = fit_forest(&train, &TreeConfig::default().with_mtry(m), spec.n_trees, fit_seed)?;
                Ok(mse(&forest.predict(&test.x)?, &test.y))
            })
            .collect::<Result<Vec<f64>>>()
    })?;

    let mut out = Vec::new();
    let mut trend_a = Vec::new();
    let mut trend_b = Vec::new();
    for (a, reps) in results.iter().enumerate() {
        let nu = spec.snr_grid[a].value();
        let mut per_rep_best = Vec::with_capacity(reps.len());
        for (r, errs) in reps.iter().enumerate() {
            for (k, &e) in errs.iter().enumerate() {
                out.push(ResultRecord::rep(&spec.id, r, nu, "rf", mtry_label(grid[k]), "test_mse", e));
            }
            let best = grid[argmin(errs)];
            per_rep_best.push(best);
            out.push(ResultRecord::rep(&spec.id, r, nu, MEAN_OF_ARGMIN, mtry_label(best), "optimal_mtry", best));
        }
        let mut mean_curve = Vec::with_capacity(grid.len());
        for (k, &m) in grid.iter().enumerate() {
            let col: Vec<f64> = reps.iter().map(|e| e[k]).collect();
            let rec = summarize(&spec.id, Some(nu), "rf", &mtry_label(m), "test_mse", &col);
            mean_curve.push(rec.value);
            out.push(rec);
        }
        let best_mean = grid[argmin(&mean_curve)];
        trend_a.push(best_mean);
        out.push(ResultRecord::summary(&spec.id, Some(nu), ARGMIN_OF_MEAN, mtry_label(best_mean), "optimal_mtry", best_mean, None));
        let rec = summarize(&spec.id, Some(nu), MEAN_OF_ARGMIN, "", "optimal_mtry", &per_rep_best);
        trend_b.push(rec.value);
        out.push(rec);
    }
    if spec.snr_grid.len() >= 3 {
        let snr: Vec<f64> = spec.snr_grid.iter().map(|s| s.value()).collect();
        out.push(ResultRecord::summary(&spec.id, None, ARGMIN_OF_MEAN, "", "spearman_snr", stats::spearman(&snr, &trend_a), None));
        out.push(ResultRecord::summary(&spec.id, None, MEAN_OF_ARGMIN, "", "spearman_snr", stats::spearman(&snr, &trend_b), None));
    }
    Ok(out)
}

/// Optimal-`mtry` curves extracted from [`run_optimal_mtry`] output.
#[derive(Debug, Clone, PartialEq)]
pub struct MtryTrend {
    pub snr: Vec<f64>,
    pub argmin_of_mean: Vec<f64>,
    pub mean_of_argmin: Vec<f64>,
}

impl MtryTrend {
    /// Spearman correlations of SNR with each curve.
    pub fn spearman(&self) -> (f64, f64) {
        (
            stats::spearman(&self.snr, &self.argmin_of_mean),
            stats::spearman(&self.snr, &self.mean_of_argmin),
        )
    }
}

pub fn optimal_mtry_trend(records: &[ResultRecord]) -> MtryTrend {
    let pick = |est: &str| -> Vec<(f64, f64)> {
        records
            .iter()
            .filter(|r| r.rep.is_none() && r.metric == "optimal_mtry" && r.estimator == est)
            .map(|r| (r.param.unwrap_or(f64::NAN), r.value))
            .collect()
    };
    let a = pick(ARGMIN_OF_MEAN);
    let b = pick(MEAN_OF_ARGMIN);
    MtryTrend {
        snr: a.iter().map(|x| x.0).collect(),
        argmin_of_mean: a.iter().map(|x| x.1).collect(),
        mean_of_argmin: b.iter().map(|x| x.1).collect(),
    }
}

/// First index of the smallest value.
fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}
