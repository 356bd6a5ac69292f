mod args;
mod run;

use std::ffi::OsString;
use std::fs;
use std::process::ExitCode;

use clap::Parser;
use mtrylab::harness::Manifest;

use args::Cli;
use run::{Failure, Run};

/// Manifest keys that describe a run rather than configure one.
const IGNORED_KEYS: [&str; 4] = ["command", "version", "wall-time", "spec"];

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args_os().map(|a| a.to_string_lossy().into_owned()).collect();
    let argv = match merge_spec_file(argv) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv.iter().map(OsString::from));
    match dispatch(&cli, &argv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: &Cli, argv: &[String]) -> run::Outcome {
    let common = cli.command.common();
    if common.workers == 0 {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    fs::create_dir_all(&common.out)
        .map_err(|e| Failure::Runtime(anyhow::anyhow!("creating {}: {e}", common.out.display())))?;

    let name = cli.command.name();
    let seed = seed_of(argv);
    let mut manifest = Manifest::new(name, seed.unwrap_or(0));
    if seed.is_none() {
        manifest.remove("seed");
    }
    for (k, v) in flag_pairs(argv) {
        if !matches!(k.as_str(), "seed" | "out" | "workers" | "spec") {
            manifest.set(&k, v);
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.workers)
        .build()
        .map_err(|e| Failure::Runtime(e.into()))?;
    let run = Run {
        name,
        out: &common.out,
        manifest,
    };
    pool.install(|| run::execute(&cli.command, run))
}

fn seed_of(argv: &[String]) -> Option<u64> {
    flag_pairs(argv).into_iter().find(|(k, _)| k == "seed").and_then(|(_, v)| v.parse().ok())
}

/// `--key value` and `--key=value` pairs in order; bare switches map to
/// `true`.
fn flag_pairs(argv: &[String]) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < argv.len() {
        if let Some(flag) = argv[i].strip_prefix("--") {
            if let Some((k, v)) = flag.split_once('=') {
                out.push((k.to_string(), v.to_string()));
            } else if i + 1 < argv.len() && !argv[i + 1].starts_with("--") {
                out.push((flag.to_string(), argv[i + 1].clone()));
                i += 1;
            } else {
                out.push((flag.to_string(), "true".into()));
            }
        }
        i += 1;
    }
    out
}

/// Appends `--key=value` for every entry of the `--spec` file whose flag is
/// not already on the command line.
fn merge_spec_file(mut argv: Vec<String>) -> Result<Vec<String>, String> {
    let given = flag_pairs(&argv);
    let Some((_, path)) = given.iter().find(|(k, _)| k == "spec") else {
        return Ok(argv);
    };
    let text = fs::read_to_string(path).map_err(|e| format!("reading spec file {path}: {e}"))?;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(format!("{path}: line {}: expected key=value", n + 1));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if IGNORED_KEYS.contains(&key.as_str()) || key.contains('.') {
            continue;
        }
        if given.iter().any(|(k, _)| *k == key) {
            continue;
        }
        match value {
            "true" => argv.push(format!("--{key}")),
            "false" => {}
            v => argv.push(format!("--{key}={v}")),
        }
    }
    Ok(argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn flag_pairs_both_forms() {
        let argv = strings(&["mtrylab", "dof", "--seed", "7", "--mtry=0.1,1", "--with-signal", "--reps", "3"]);
        let pairs = flag_pairs(&argv);
        assert_eq!(pairs[0], ("seed".into(), "7".into()));
        assert_eq!(pairs[1], ("mtry".into(), "0.1,1".into()));
        assert_eq!(pairs[2], ("with-signal".into(), "true".into()));
        assert_eq!(seed_of(&argv), Some(7));
    }

    #[test]
    fn spec_values_yield_to_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.spec");
        fs::write(&path, "# comment\nseed=3\nreps=10\ncommand=dof\nspec.id=x\nwall_time=1.0\nwith_signal=true\n").unwrap();
        let argv = strings(&["mtrylab", "gen", "--reps", "5", "--spec", path.to_str().unwrap()]);
        let merged = merge_spec_file(argv).unwrap();
        assert_eq!(merged[6..], strings(&["--seed=3", "--with-signal"]));
        fs::write(&path, "nonsense\n").unwrap();
        let argv = strings(&["mtrylab", "gen", "--spec", path.to_str().unwrap()]);
        assert!(merge_spec_file(argv).is_err());
    }
}
