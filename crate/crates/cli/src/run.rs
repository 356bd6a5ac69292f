use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::Context;
use mtrylab::cart::{fit_tree, TreeConfig};
use mtrylab::datagen::{default_snr_grid, SnrLevel};
use mtrylab::dof::{dof_curve_forest, dof_curve_selectors, fixed_design, DofCurve, SelectorDofSpec};
use mtrylab::forest::fit_forest;
use mtrylab::harness::{
    fmt_g10, interp_table, load_csv, run_optimal_mtry, run_real_noise, run_selector_benchmark, run_snr_sweep_forest,
    run_theorem_checks, write_csv_file, ExperimentSpec, Manifest, RealNoiseSpec, ResultRecord, SelectorGrids,
    TheoremSpec,
};
use mtrylab::linsel::{forward_stepwise, randfs, relaxed_lasso, RandFsOptions};
use mtrylab::rng::{self, purpose};
use mtrylab::DVector;

use crate::args::*;

/// A failure with its exit code: 2 for bad input, 1 for everything else.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        let usage = e.chain().any(|c| {
            matches!(c.downcast_ref::<mtrylab::Error>(), Some(mtrylab::Error::InvalidArgument(_)))
        });
        if usage {
            Failure::Usage(format!("{e:#}"))
        } else {
            Failure::Runtime(e)
        }
    }
}

impl From<mtrylab::Error> for Failure {
    fn from(e: mtrylab::Error) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn usage<T>(msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure::Usage(msg.into()))
}

pub type Outcome = Result<(), Failure>;

/// Everything a command needs to leave behind besides its records.
pub struct Run<'a> {
    pub name: &'a str,
    pub out: &'a Path,
    pub manifest: Manifest,
}

impl Run<'_> {
    fn finish(mut self, records: &[ResultRecord], started: std::time::Instant) -> Outcome {
        let csv = self.out.join(format!("{}.csv", self.name));
        write_csv_file(&csv, records).with_context(|| format!("writing {}", csv.display()))?;
        self.manifest.set("run.rows", records.len());
        self.write_manifest(started)
    }

    fn write_manifest(mut self, started: std::time::Instant) -> Outcome {
        self.manifest.set("wall_time", format!("{:.3}", started.elapsed().as_secs_f64()));
        let path = self.out.join(format!("{}.manifest", self.name));
        self.manifest.write(&path).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    fn describe(&mut self, pairs: Vec<(String, String)>) {
        for (k, v) in pairs {
            self.manifest.set(&k, v);
        }
    }
}

pub fn execute(cmd: &Command, run: Run<'_>) -> Outcome {
    let started = std::time::Instant::now();
    match cmd {
        Command::Gen(a) => gen(a, run, started),
        Command::Fit(a) => fit(a, run, started),
        Command::Dof(a) => dof(a, run, started),
        Command::Sweep(a) => sweep(a, run, started),
        Command::Optmtry(a) => optmtry(a, run, started),
        Command::Realnoise(a) => realnoise(a, run, started),
        Command::Selbench(a) => selbench(a, run, started),
        Command::Theorems(a) => theorems(a, run, started),
        Command::Interp(a) => interp(a, run, started),
    }
}

fn snr(v: f64) -> Result<SnrLevel, Failure> {
    SnrLevel::new(v).map_err(|e| Failure::Usage(e.to_string()))
}

fn snr_list(v: &Option<Vec<f64>>) -> Result<Vec<SnrLevel>, Failure> {
    match v {
        Some(list) => list.iter().map(|&s| snr(s)).collect(),
        None => Ok(default_snr_grid()),
    }
}

fn load(path: &Path, response: Option<&str>) -> Result<mtrylab::datagen::Dataset, Failure> {
    Ok(load_csv(path, response).with_context(|| format!("loading {}", path.display()))?)
}

fn gen(a: &GenArgs, mut run: Run<'_>, started: std::time::Instant) -> Outcome {
    let (g, n) = a.model.generator(ModelName::Preset("low"), 500).or_else(usage)?;
    let data = g.sample(n, snr(a.snr)?, &mut rng::stream(a.seed, &[purpose::TRAIN]));
    let mut text = String::new();
    let mut header: Vec<String> = (1..=data.p()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    if a.with_signal {
        header.push("f".into());
    }
    text.push_str(&header.join(","));
    text.push('\n');
    for i in 0..data.n() {
        let mut cells: Vec<String> = data.x.row(i).iter().map(|&v| fmt_g10(v)).collect();
        cells.push(fmt_g10(data.y[i]));
        if let (true, Some(f)) = (a.with_signal, &data.f) {
            cells.push(fmt_g10(f[i]));
        }
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    let path = run.out.join("data.csv");
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    run.manifest.set("run.generator", g.describe());
    run.manifest.set("run.noise_variance", fmt_g10(g.noise_variance(snr(a.snr)?)));
    run.write_manifest(started)
}

fn fit(a: &FitArgs, mut run: Run<'_>, started: std::time::Instant) -> Outcome {
    let train = load(&a.data, a.response.as_deref())?;
    let test = match &a.test {
        Some(path) => Some(load(path, a.response.as_deref())?),
        None => None,
    };
    if let Some(t) = &test {
        if t.p() != train.p() {
            return usage(format!("test data has {} features, training data {}", t.p(), train.p()));
        }
    }
    let eval = test.as_ref().unwrap_or(&train);
    let tree_cfg = |mtry: f64, bootstrap: bool| {
        TreeConfig::default().with_mtry(mtry).with_maxnodes(a.maxnodes).with_bootstrap(bootstrap)
    };
    let lambda = || a.lambda.ok_or_else(|| Failure::Usage(format!("--estimator {} needs --lambda", a.estimator)));
    let (train_hat, eval_hat) = match a.estimator.as_str() {
        "rf" | "bagging" => {
            let mtry = if a.estimator == "bagging" { 1.0 } else { a.mtry };
            let m = fit_forest(&train, &tree_cfg(mtry, true), a.trees, a.seed)?;
            (m.predict(&train.x)?, m.predict(&eval.x)?)
        }
        "tree" => {
            let m = fit_tree(&train, &tree_cfg(1.0, false), a.seed)?;
            (m.predict(&train.x)?, m.predict(&eval.x)?)
        }
        "fs" => {
            let path = forward_stepwise(&train.x, &train.y, a.depth)?;
            let m = path.model(a.depth);
            (m.predict(&train.x)?, m.predict(&eval.x)?)
        }
        "randfs" => {
            let opts = RandFsOptions {
                n_models: a.models,
                depth: a.depth,
                mtry: a.mtry,
                bootstrap: true,
            };
            let fit = randfs(&train, &opts, a.seed)?;
            (fit.model().predict(&train.x)?, fit.model().predict(&eval.x)?)
        }
        "lasso" | "relaxed" => {
            let gamma = if a.estimator == "lasso" { 1.0 } else { a.gamma };
            let m = relaxed_lasso(&train.x, &train.y, lambda()?, gamma)?;
            (m.predict(&train.x)?, m.predict(&eval.x)?)
        }
        other => return usage(format!("unknown estimator '{other}'")),
    };

    let mut pred = String::from("row,y,yhat\n");
    for i in 0..eval.n() {
        let _ = writeln!(pred, "{},{},{}", i, fmt_g10(eval.y[i]), fmt_g10(eval_hat[i]));
    }
    let path = run.out.join("predictions.csv");
    fs::write(&path, pred).with_context(|| format!("writing {}", path.display()))?;

    let mse = |y: &DVector<f64>, h: &DVector<f64>| (y - h).norm_squared() / y.len() as f64;
    let mut records = vec![ResultRecord::summary("fit", None, &a.estimator, "", "train_mse", mse(&train.y, &train_hat), None)];
    if test.is_some() {
        records.push(ResultRecord::summary("fit", None, &a.estimator, "", "test_mse", mse(&eval.y, &eval_hat), None));
    }
    run.manifest.set("run.n_train", train.n());
    run.manifest.set("run.p", train.p());
    run.finish(&records, started)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn curve_records(c: &DofCurve) -> Vec<ResultRecord> {
    (0..c.dof_estimates.len())
        .map(|k| {
            ResultRecord::summary(
                "dof",
                Some(c.complexity_axis[k]),
                &c.fitter_id,
                c.labels[k].clone(),
                "dof",
                c.dof_estimates[k],
                Some(c.std_errors[k]),
            )
        })
        .collect()
}

fn dof(a: &DofArgs, mut run: Run<'_>, started: std::time::Instant) -> Outcome {
    let (g, n) = a.model.generator(ModelName::Preset("low"), 500).or_else(usage)?;
    let design = fixed_design(&g, n, snr(a.snr)?, a.seed);
    let curves = if a.family == "forest" {
        dof_curve_forest(&design, &a.mtry, &a.maxnodes, a.trees, a.reps, a.seed)?
    } else {
        let spec = SelectorDofSpec {
            depth_max: a.depth.unwrap_or_else(|| SelectorDofSpec::default().depth_max.min(n.saturating_sub(2)).min(g.p())),
            n_models: a.models,
            randfs_mtry: a.randfs_mtry.clone(),
            n_lambda: a.lambdas,
            gammas: a.gammas.clone(),
        };
        dof_curve_selectors(&design, &spec, a.reps, a.seed)?
    };
    let mut files = Vec::new();
    for c in &curves {
        let name = format!("dof_{}.csv", sanitize(&c.fitter_id));
        let path = run.out.join(&name);
        write_csv_file(&path, &curve_records(c)).with_context(|| format!("writing {}", path.display()))?;
        eprintln!("{}: {} points", c.fitter_id, c.dof_estimates.len());
        files.push(name);
    }
    run.manifest.set("run.generator", g.describe());
    run.manifest.set("run.n_train", n);
    run.manifest.set("run.files", files.join(","));
    run.write_manifest(started)
}

fn forest_spec(
    m: &ModelArgs,
    snr_grid: &Option<Vec<f64>>,
    seed: u64,
    optimal: bool,
) -> Result<ExperimentSpec, Failure> {
    let (g, n) = m.generator(ModelName::Mars, 500).or_else(usage)?;
    let grid = snr_list(snr_grid)?;
    Ok(if optimal {
        ExperimentSpec::optimal_mtry("optmtry", g, n, grid, seed)
    } else {
        ExperimentSpec::snr_sweep("sweep", g, n, grid, seed)
    })
}

fn sweep(a: &SweepArgs, mut run: Run<'_>, started: std::time::Instant) -> Outcome {
    let mut spec = forest_spec(&a.model, &a.snr, a.seed, false)?;
    spec.mtry_grid = a.mtry.clone();
    spec.n_trees = a.trees;
    spec.n_reps = a.reps;
    spec.test_size = a.test_size;
    spec.validate()?;
    run.describe(spec.describe());
    let records = run_snr_sweep_forest(&spec)?;
    run.finish(&records, started)
}

fn optmtry(a: &OptMtryArgs, mut run: Run<'_>, started: std::time::Instant) -> Outcome {
    let mut spec = forest_spec(&a.model, &a.snr, a.seed, true)?;
    if let Some(m) = &a.mtry {
        spec.mtry_grid = m.clone();
    }
    spec.n_trees = a.trees;
    spec.n_reps = a.reps;
    spec.test_size = a.test_size;
    spec.validate()?;
    run.describe(spec.describe());
    let records = run_optimal_mtry(&spec)?;
    run.finish(&records, started)
}

fn realnoise(a: &RealNoiseArgs, mut run: Run<'_>, started: std::time::Instant) -> Outcome {
    let data = load(&a.data, a.response.as_deref())?;
    if a.mtry.len() != 2 {
        return usage("--mtry takes exactly two values: reference and challenger");
    }
    let mut spec = RealNoiseSpec::new("realnoise", a.alpha.clone(), a.reps, a.seed);
    spec.n_folds = a.folds;
    spec.n_trees = a.trees;
    spec.mtry_pair = (a.mtry[0], a.mtry[1]);
    run.manifest.set("run.n", data.n());
    run.manifest.set("run.p", data.p());
    let records = run_real_noise(&data, &spec)?;
    run.finish(&records, started)
}

fn selbench(a: &SelBenchArgs, mut run: Run<'_>, started: std::time::Instant) -> Outcome {
    let grid = snr_list(&a.snr)?;
    let mut spec = ExperimentSpec::selector_benchmark("selbench", a.setting, grid, a.seed)?;
    spec.n_reps = a.reps;
    let base = SelectorGrids::for_setting(&a.setting);
    spec.selectors = SelectorGrids {
        depth_max: a.depth.unwrap_or(base.depth_max),
        n_lambda: a.lambdas.unwrap_or(base.n_lambda),
        gammas: a.gammas.clone().unwrap_or(base.gammas),
        mtry_grid: a.mtry.clone().unwrap_or(base.mtry_grid),
        default_mtry: base.default_mtry,
        n_models: a.models,
    };
    spec.validate()?;
    run.describe(spec.describe());
    run.manifest.set("spec.depth_max", spec.selectors.depth_max);
    run.manifest.set("spec.n_lambda", spec.selectors.n_lambda);
    let records = run_selector_benchmark(&spec)?;
    run.finish(&records, started)
}

fn theorems(a: &TheoremArgs, run: Run<'_>, started: std::time::Instant) -> Outcome {
    let spec = TheoremSpec {
        id: "theorems".into(),
        t1_n: a.n,
        t1_p: a.p,
        t1_m: a.m.clone(),
        t1_b_grid: a.b.clone(),
        t1_b_final: a.b_final,
        t1_reps: a.reps,
        t2_n: a.t2_n,
        t2_m: a.t2_m,
        t2_t: a.t2_t,
        t2_beta: a.t2_beta.clone(),
        t2_models: a.t2_models,
        t2_reps: a.t2_reps,
        seed: a.seed,
    };
    let records = run_theorem_checks(&spec)?;
    run.finish(&records, started)
}

fn interp(a: &InterpArgs, run: Run<'_>, started: std::time::Instant) -> Outcome {
    let records = interp_table(&a.b, &a.n)?;
    run.finish(&records, started)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sanitized_curve_names() {
        assert_eq!(sanitize("rf_mtry=0.33"), "rf_mtry_0.33");
        assert_eq!(sanitize("relaxed_gamma=0.5"), "relaxed_gamma_0.5");
    }

    #[test]
    fn invalid_argument_maps_to_usage() {
        let e: Failure = mtrylab::Error::InvalidArgument("x".into()).into();
        assert!(matches!(e, Failure::Usage(_)));
        let e: Failure = mtrylab::Error::Data("x".into()).into();
        assert!(matches!(e, Failure::Runtime(_)));
    }
}
