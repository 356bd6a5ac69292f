//! Experiment drivers: SNR sweeps, optimal-`mtry` curves, real-data noise
//! injection, the linear-selector benchmark, the ensemble theorems and the
//! interpolation probabilities.
//!
//! Every driver turns `(spec, seed)` into a list of [`ResultRecord`]s. Each
//! `(grid point, replication)` task owns its random streams, and results are
//! gathered in task order, so the output does not depend on the thread count.

mod interp;
mod optmtry;
mod realdata;
mod records;
mod selectors;
mod sweep;
mod theorems;

pub use interp::{interp_prob, interp_prob_all, interp_table, INBAG_PROB};
pub use optmtry::{optimal_mtry_trend, run_optimal_mtry, MtryTrend};
pub use realdata::{load_csv, parse_csv, run_real_noise, RealNoiseSpec, MIN_ROWS};
pub use records::{fmt_g10, summarize, to_csv_string, write_csv, write_csv_file, Manifest, ResultRecord, CSV_HEADER};
pub use selectors::{rte_bayes, run_selector_benchmark, SelectorGrids};
pub use sweep::run_snr_sweep_forest;
pub use theorems::{implied_ridge_penalty, run_theorem_checks, theorem1_deviation, TheoremSpec};

use rayon::prelude::*;

use crate::datagen::{Generator, LinearSetting, SnrLevel};
use crate::dof::fmt_param;
use crate::error::{ensure, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    MseDiff,
    RteBayes,
    RteReal,
    OptimalMtry,
    Dof,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::MseDiff => "mse_diff",
            Metric::RteBayes => "rte_bayes",
            Metric::RteReal => "rte_real",
            Metric::OptimalMtry => "optimal_mtry",
            Metric::Dof => "dof",
        }
    }
}

/// Declarative description of one synthetic experiment.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub id: String,
    pub generator: Generator,
    pub n_train: usize,
    pub snr_grid: Vec<SnrLevel>,
    /// Forest `mtry` values. For the SNR sweep the first entry is the
    /// reference (bagging) and the second the challenger.
    pub mtry_grid: Vec<f64>,
    pub n_trees: usize,
    pub n_reps: usize,
    pub test_size: usize,
    pub seed: u64,
    pub metric: Metric,
    pub selectors: SelectorGrids,
}

impl ExperimentSpec {
    /// Bagging versus a `mtry = 0.33` forest on fresh data per replication.
    pub fn snr_sweep(id: &str, generator: Generator, n_train: usize, snr_grid: Vec<SnrLevel>, seed: u64) -> Self {
        ExperimentSpec {
            id: id.to_string(),
            generator,
            n_train,
            snr_grid,
            mtry_grid: vec![1.0, 0.33],
            n_trees: crate::forest::DEFAULT_TREES,
            n_reps: 50,
            test_size: 1000,
            seed,
            metric: Metric::MseDiff,
            selectors: SelectorGrids::default(),
        }
    }

    /// Every feasible proportion `k / p`.
    pub fn optimal_mtry(id: &str, generator: Generator, n_train: usize, snr_grid: Vec<SnrLevel>, seed: u64) -> Self {
        let p = generator.p();
        ExperimentSpec {
            mtry_grid: (1..=p).map(|k| k as f64 / p as f64).collect(),
            metric: Metric::OptimalMtry,
            ..Self::snr_sweep(id, generator, n_train, snr_grid, seed)
        }
    }

    pub fn selector_benchmark(id: &str, setting: LinearSetting, snr_grid: Vec<SnrLevel>, seed: u64) -> Result<Self> {
        let selectors = SelectorGrids::for_setting(&setting);
        Ok(ExperimentSpec {
            id: id.to_string(),
            n_train: setting.n,
            generator: Generator::linear(setting)?,
            snr_grid,
            mtry_grid: Vec::new(),
            n_trees: 0,
            n_reps: 20,
            test_size: 0,
            seed,
            metric: Metric::RteBayes,
            selectors,
        })
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(!self.id.is_empty() && !self.id.contains(','), "experiment id must be nonempty and comma-free");
        ensure!(!self.snr_grid.is_empty(), "SNR grid is empty");
        ensure!(self.n_reps >= 2, "need at least two replications");
        ensure!(self.n_train >= 2, "training size must be at least 2");
        match self.metric {
            Metric::MseDiff | Metric::OptimalMtry => {
                ensure!(!self.mtry_grid.is_empty(), "mtry grid is empty");
                ensure!(
                    self.mtry_grid.iter().all(|m| *m > 0.0 && *m <= 1.0),
                    "mtry values must lie in (0, 1]"
                );
                ensure!(self.n_trees >= 1, "need at least one tree");
                ensure!(self.test_size >= 1, "test size must be positive");
            }
            _ => {}
        }
        if self.metric == Metric::MseDiff {
            ensure!(self.mtry_grid.len() == 2, "SNR sweep compares exactly two mtry values");
        }
        Ok(())
    }

    /// Key/value pairs for the run manifest.
    pub fn describe(&self) -> Vec<(String, String)> {
        let snr: Vec<String> = self.snr_grid.iter().map(|s| fmt_g10(s.value())).collect();
        let mtry: Vec<String> = self.mtry_grid.iter().map(|&m| fmt_param(m)).collect();
        vec![
            ("spec.id".into(), self.id.clone()),
            ("spec.generator".into(), self.generator.describe()),
            ("spec.n_train".into(), self.n_train.to_string()),
            ("spec.snr".into(), snr.join(",")),
            ("spec.mtry".into(), mtry.join(",")),
            ("spec.n_trees".into(), self.n_trees.to_string()),
            ("spec.reps".into(), self.n_reps.to_string()),
            ("spec.test_size".into(), self.test_size.to_string()),
            ("spec.metric".into(), self.metric.name().into()),
        ]
    }
}

/// Runs `task(a, r)` for every grid point `a` and replication `r` in
/// parallel and returns the results ordered by `(a, r)`.
pub(crate) fn grid_tasks<T, F>(n_points: usize, n_reps: usize, task: F) -> Result<Vec<Vec<T>>>
where
    T: Send,
    F: Fn(usize, usize) -> Result<T> + Sync,
{
    let flat: Vec<T> = (0..n_points * n_reps)
        .into_par_iter()
        .map(|i| task(i / n_reps, i % n_reps))
        .collect::<Result<_>>()?;
    let mut out: Vec<Vec<T>> = (0..n_points).map(|_| Vec::with_capacity(n_reps)).collect();
    for (i, t) in flat.into_iter().enumerate() {
        out[i / n_reps].push(t);
    }
    Ok(out)
}

pub(crate) fn mse(a: &crate::DVector<f64>, b: &crate::DVector<f64>) -> f64 {
    (a - b).norm_squared() / a.len() as f64
}

pub(crate) fn mtry_label(m: f64) -> String {
    format!("mtry={}", fmt_param(m))
}
