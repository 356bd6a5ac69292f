use super::{grid_tasks, mse, mtry_label, summarize, ExperimentSpec, Metric, ResultRecord};
use crate::cart::TreeConfig;
use crate::error::{ensure, Result};
use crate::forest::fit_forest;
use crate::rng::{self, purpose};

/// Test-error difference `Error(reference) - Error(challenger)` across the
/// SNR grid. Both forests of a replication share the training set, the test
/// set and the tree seeds.
pub fn run_snr_sweep_forest(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    ensure!(spec.metric == Metric::MseDiff, "SNR sweep needs the mse_diff metric");
    let (m_ref, m_alt) = (spec.mtry_grid[0], spec.mtry_grid[1]);

    let results = grid_tasks(spec.snr_grid.len(), spec.n_reps, |a, r| {
        let snr = spec.snr_grid[a];
        let path = [a as u64, r as u64];
        let train = spec.generator.sample(spec.n_train, snr, &mut rng::stream(spec.seed, &[path[0], path[1], purpose::TRAIN]));
        let test = spec.generator.sample(spec.test_size, snr, &mut rng::stream(spec.seed, &[path[0], path[1], purpose::TEST]));
        let fit_seed = rng::derive_seed(spec.seed, &[path[0], path[1], purpose::FIT]);
        let err = |mtry: f64| -> Result<f64> {
            let cfg = TreeConfig::default().with_mtry(mtry);
            let forest = fit_forest(&train, &cfg, spec.n_trees, fit_seed)?;
            Ok(mse(&forest.predict(&test.x)?, &test.y))
        };
        Ok((err(m_ref)?, err(m_alt)?))
    })?;

    let (lab_ref, lab_alt) = (mtry_label(m_ref), mtry_label(m_alt));
    let mut out = Vec::new();
    for (a, reps) in results.iter().enumerate() {
        let nu = spec.snr_grid[a].value();
        for (r, &(e_ref, e_alt)) in reps.iter().enumerate() {
            out.push(ResultRecord::rep(&spec.id, r, nu, "reference", lab_ref.clone(), "test_mse", e_ref));
            out.push(ResultRecord::rep(&spec.id, r, nu, "challenger", lab_alt.clone(), "test_mse", e_alt));
            out.push(ResultRecord::rep(&spec.id, r, nu, "difference", "", "mse_diff", e_ref - e_alt));
        }
        let refs: Vec<f64> = reps.iter().map(|e| e.0).collect();
        let alts: Vec<f64> = reps.iter().map(|e| e.1).collect();
        let diffs: Vec<f64> = reps.iter().map(|e| e.0 - e.1).collect();
        out.push(summarize(&spec.id, Some(nu), "reference", &lab_ref, "test_mse", &refs));
        out.push(summarize(&spec.id, Some(nu), "challenger", &lab_alt, "test_mse", &alts));
        out.push(summarize(&spec.id, Some(nu), "difference", "", "mse_diff", &diffs));
    }
    Ok(out)
}
