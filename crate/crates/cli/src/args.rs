use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mtrylab::datagen::{Generator, LinearSetting, MarsFunction};

#[derive(Debug, Parser)]
#[command(name = "mtrylab", version, about = "Randomization-as-regularization experiments for forests and forward selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic dataset and write it as CSV
    Gen(GenArgs),
    /// Fit one estimator to a CSV dataset
    Fit(FitArgs),
    /// Monte-Carlo degrees-of-freedom curves
    Dof(DofArgs),
    /// Bagging versus random forest across an SNR grid
    Sweep(SweepArgs),
    /// Optimal mtry per SNR
    Optmtry(OptMtryArgs),
    /// Shifted relative test error after noise injection on real data
    Realnoise(RealNoiseArgs),
    /// Linear selector benchmark (relative test error to Bayes)
    Selbench(SelBenchArgs),
    /// Subsample-ensemble theorem checks
    Theorems(TheoremArgs),
    /// Interpolation probabilities of bagged interpolators
    Interp(InterpArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Fit(_) => "fit",
            Command::Dof(_) => "dof",
            Command::Sweep(_) => "sweep",
            Command::Optmtry(_) => "optmtry",
            Command::Realnoise(_) => "realnoise",
            Command::Selbench(_) => "selbench",
            Command::Theorems(_) => "theorems",
            Command::Interp(_) => "interp",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Command::Gen(a) => &a.common,
            Command::Fit(a) => &a.common,
            Command::Dof(a) => &a.common,
            Command::Sweep(a) => &a.common,
            Command::Optmtry(a) => &a.common,
            Command::Realnoise(a) => &a.common,
            Command::Selbench(a) => &a.common,
            Command::Theorems(a) => &a.common,
            Command::Interp(a) => &a.common,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output directory, created if absent
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Worker threads (results do not depend on this)
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// key=value file of flag defaults; explicit flags win
    #[arg(long)]
    pub spec: Option<PathBuf>,
}

/// Data source flags shared by the synthetic commands.
#[derive(Debug, Args)]
pub struct ModelArgs {
    /// linear-low, linear-medium, linear-high5, linear-high10, linear, mars or marsadd
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelName>,
    /// Training size (defaults to the preset's n)
    #[arg(long)]
    pub n: Option<usize>,
    /// Features for `--model linear`
    #[arg(long)]
    pub p: Option<usize>,
    /// Signal features for `--model linear`
    #[arg(long)]
    pub s: Option<usize>,
    /// Correlation decay for linear models
    #[arg(long)]
    pub rho: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub snr: f64,
    #[arg(long)]
    pub seed: u64,
    /// Also write the noiseless signal as column `f`
    #[arg(long, default_value_t = false)]
    pub with_signal: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Training CSV (header row; response is the last column unless --response)
    #[arg(long)]
    pub data: PathBuf,
    /// Optional test CSV with the same columns
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long)]
    pub response: Option<String>,
    /// rf, bagging, tree, fs, randfs, lasso or relaxed
    #[arg(long, value_parser = ["rf", "bagging", "tree", "fs", "randfs", "lasso", "relaxed"])]
    pub estimator: String,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub mtry: f64,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long)]
    pub maxnodes: Option<usize>,
    #[arg(long, default_value_t = 5)]
    pub depth: usize,
    #[arg(long, default_value_t = 100)]
    pub models: usize,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct DofArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// forest or selectors
    #[arg(long, default_value = "forest", value_parser = ["forest", "selectors"])]
    pub family: String,
    #[arg(long)]
    pub snr: f64,
    #[arg(long, value_parser = parse_f64_list, default_value = "0.1,0.33,0.67,1")]
    pub mtry: ::std::vec::Vec<f64>,
    #[arg(long, value_parser = parse_usize_list, default_value = "5,10,20,40,80")]
    pub maxnodes: ::std::vec::Vec<usize>,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    /// Largest selection depth (selectors)
    #[arg(long)]
    pub depth: Option<usize>,
    /// Models per BaggFS / RandFS ensemble (selectors)
    #[arg(long, default_value_t = 100)]
    pub models: usize,
    #[arg(long, default_value_t = 50)]
    pub lambdas: usize,
    /// Relaxed-lasso weights (selectors)
    #[arg(long, value_parser = parse_f64_list, default_value = "0,0.5")]
    pub gammas: ::std::vec::Vec<f64>,
    /// RandFS mtry values (selectors)
    #[arg(long, value_parser = parse_f64_list, default_value = "0.1,0.33,0.67")]
    pub randfs_mtry: ::std::vec::Vec<f64>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// SNR values; default is the ten-point log grid from 0.05 to 6
    #[arg(long, value_parser = parse_f64_list)]
    pub snr: Option<::std::vec::Vec<f64>>,
    /// Reference and challenger mtry
    #[arg(long, value_parser = parse_f64_list, default_value = "1,0.33")]
    pub mtry: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct OptMtryArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_parser = parse_f64_list)]
    pub snr: Option<::std::vec::Vec<f64>>,
    /// mtry grid; default is every k/p
    #[arg(long, value_parser = parse_f64_list)]
    pub mtry: Option<::std::vec::Vec<f64>>,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long, default_value_t = 50)]
    pub reps: usize,
    #[arg(long, default_value_t = 1000)]
    pub test_size: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct RealNoiseArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub response: Option<String>,
    #[arg(long, value_parser = parse_f64_list, default_value = "0,0.01,0.05,0.1,0.25,0.5")]
    pub alpha: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 500)]
    pub trees: usize,
    #[arg(long, value_parser = parse_f64_list, default_value = "1,0.33")]
    pub mtry: ::std::vec::Vec<f64>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct SelBenchArgs {
    /// low, medium, high-5 or high-10
    #[arg(long, value_parser = parse_setting)]
    pub setting: LinearSetting,
    #[arg(long, value_parser = parse_f64_list)]
    pub snr: Option<::std::vec::Vec<f64>>,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    /// Largest depth of the FS / RandFS grids
    #[arg(long)]
    pub depth: Option<usize>,
    #[arg(long)]
    pub lambdas: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub models: usize,
    #[arg(long, value_parser = parse_f64_list)]
    pub gammas: Option<::std::vec::Vec<f64>>,
    /// mtry grid of the tuned RandFS
    #[arg(long, value_parser = parse_f64_list)]
    pub mtry: Option<::std::vec::Vec<f64>>,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TheoremArgs {
    #[arg(long, default_value_t = 64)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub p: usize,
    #[arg(long, value_parser = parse_usize_list, default_value = "2,4,6")]
    pub m: ::std::vec::Vec<usize>,
    /// Ensemble sizes for the convergence-rate fit
    #[arg(long, value_parser = parse_usize_list, default_value = "100,1000,10000")]
    pub b: ::std::vec::Vec<usize>,
    #[arg(long, default_value_t = 50_000)]
    pub b_final: usize,
    #[arg(long, default_value_t = 20)]
    pub reps: usize,
    #[arg(long, default_value_t = 100)]
    pub t2_n: usize,
    #[arg(long, default_value_t = 3)]
    pub t2_m: usize,
    #[arg(long, default_value_t = 30)]
    pub t2_t: usize,
    #[arg(long, value_parser = parse_f64_list, default_value = "1,1,1,0,0")]
    pub t2_beta: ::std::vec::Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub t2_models: usize,
    #[arg(long, default_value_t = 2000)]
    pub t2_reps: usize,
    #[arg(long)]
    pub seed: u64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct InterpArgs {
    #[arg(long, value_parser = parse_usize_list, default_value = "100,150,200")]
    pub b: ::std::vec::Vec<usize>,
    #[arg(long, value_parser = parse_usize_list, default_value = "50:2000:50")]
    pub n: ::std::vec::Vec<usize>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelName {
    Preset(&'static str),
    Linear,
    Mars,
    MarsAdd,
}

fn parse_model(s: &str) -> Result<ModelName, String> {
    let key = s.to_ascii_lowercase().replace('_', "-");
    Ok(match key.as_str() {
        "linear-low" | "low" => ModelName::Preset("low"),
        "linear-medium" | "medium" => ModelName::Preset("medium"),
        "linear-high5" | "linear-high-5" | "high-5" | "high5" => ModelName::Preset("high-5"),
        "linear-high10" | "linear-high-10" | "high-10" | "high10" => ModelName::Preset("high-10"),
        "linear" => ModelName::Linear,
        "mars" => ModelName::Mars,
        "marsadd" | "mars-add" => ModelName::MarsAdd,
        _ => return Err(format!("unknown model '{s}'")),
    })
}

fn parse_setting(s: &str) -> Result<LinearSetting, String> {
    match parse_model(s)? {
        ModelName::Preset(name) => Ok(LinearSetting::by_name(name).expect("preset exists")),
        _ => Err(format!("'{s}' is not a linear setting (low, medium, high-5, high-10)")),
    }
}

impl ModelArgs {
    /// Generator plus default training size.
    pub fn generator(&self, default: ModelName, mars_n: usize) -> Result<(Generator, usize), String> {
        let model = self.model.unwrap_or(default);
        let linear = |base: LinearSetting| -> Result<(Generator, usize), String> {
            let setting = LinearSetting::new(
                self.n.unwrap_or(base.n),
                self.p.unwrap_or(base.p),
                self.s.unwrap_or(base.s),
                self.rho.unwrap_or(base.rho),
            )
            .map_err(|e| e.to_string())?;
            Ok((Generator::linear(setting).map_err(|e| e.to_string())?, setting.n))
        };
        match model {
            ModelName::Preset(name) => linear(LinearSetting::by_name(name).expect("preset exists")),
            ModelName::Linear => {
                let (Some(p), Some(s)) = (self.p, self.s) else {
                    return Err("--model linear needs --p and --s".into());
                };
                linear(LinearSetting {
                    n: self.n.unwrap_or(100),
                    p,
                    s,
                    rho: 0.35,
                    ..LinearSetting::low()
                })
            }
            ModelName::Mars | ModelName::MarsAdd => {
                if self.p.is_some() || self.s.is_some() || self.rho.is_some() {
                    return Err("--p, --s and --rho apply to linear models only".into());
                }
                let f = if model == ModelName::Mars { MarsFunction::Mars } else { MarsFunction::MarsAdd };
                Ok((Generator::Mars(f), self.n.unwrap_or(mars_n)))
            }
        }
    }
}

/// Comma-separated values; each item may also be a range `a:b:step`
/// (inclusive of `b` when reached).
pub fn parse_f64_list(s: &str) -> Result<Vec<f64>, String> {
    let mut out = Vec::new();
    for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_num(v)?),
            [a, b, step] => {
                let (a, b, step) = (parse_num(a)?, parse_num(b)?, parse_num(step)?);
                if step <= 0.0 || b < a {
                    return Err(format!("bad range '{item}': need a <= b and step > 0"));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                out.extend((0..=count).map(|i| a + step * i as f64));
            }
            _ => return Err(format!("bad list item '{item}'")),
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

pub fn parse_usize_list(s: &str) -> Result<Vec<usize>, String> {
    parse_f64_list(s)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
                Ok(v as usize)
            } else {
                Err(format!("'{v}' is not a nonnegative integer"))
            }
        })
        .collect()
}

fn parse_num(s: &str) -> Result<f64, String> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| format!("'{s}' is not a number"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(parse_f64_list("0.1, 0.33,1").unwrap(), vec![0.1, 0.33, 1.0]);
        assert_eq!(parse_usize_list("50:200:50").unwrap(), vec![50, 100, 150, 200]);
        assert_eq!(parse_usize_list("1,5:7:1").unwrap(), vec![1, 5, 6, 7]);
        assert_eq!(parse_usize_list("50:2000:50").unwrap().len(), 40);
        assert!(parse_f64_list("").is_err());
        assert!(parse_f64_list("3:1:1").is_err());
        assert!(parse_usize_list("1.5").is_err());
        assert!(parse_f64_list("a").is_err());
    }

    #[test]
    fn model_names() {
        assert_eq!(parse_model("linear-low").unwrap(), ModelName::Preset("low"));
        assert_eq!(parse_model("high-5").unwrap(), ModelName::Preset("high-5"));
        assert!(parse_model("ridge").is_err());
        assert_eq!(parse_setting("high-10").unwrap(), LinearSetting::high10());
    }
}
