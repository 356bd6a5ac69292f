use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::stats;

pub const CSV_HEADER: [&str; 8] = ["experiment", "rep", "param", "estimator", "tuned", "metric", "value", "se"];

/// One output row. Summary rows have no replication index.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub experiment: String,
    pub rep: Option<usize>,
    /// SNR, noise fraction alpha, B, ... depending on the experiment.
    pub param: Option<f64>,
    pub estimator: String,
    /// Selected or fixed tuning parameters, e.g. `d=3` or `mtry=0.4`.
    pub tuned: String,
    pub metric: String,
    pub value: f64,
    pub se: Option<f64>,
}

impl ResultRecord {
    pub fn rep(experiment: &str, rep: usize, param: f64, estimator: &str, tuned: impl Into<String>, metric: &str, value: f64) -> Self {
        ResultRecord {
            experiment: experiment.to_string(),
            rep: Some(rep),
            param: Some(param),
            estimator: estimator.to_string(),
            tuned: tuned.into(),
            metric: metric.to_string(),
            value,
            se: None,
        }
    }

    pub fn summary(experiment: &str, param: Option<f64>, estimator: &str, tuned: impl Into<String>, metric: &str, value: f64, se: Option<f64>) -> Self {
        ResultRecord {
            experiment: experiment.to_string(),
            rep: None,
            param,
            estimator: estimator.to_string(),
            tuned: tuned.into(),
            metric: metric.to_string(),
            value,
            se,
        }
    }

    fn fields(&self) -> [String; 8] {
        [
            self.experiment.clone(),
            self.rep.map(|r| r.to_string()).unwrap_or_default(),
            self.param.map(fmt_g10).unwrap_or_default(),
            self.estimator.clone(),
            self.tuned.clone(),
            self.metric.clone(),
            fmt_g10(self.value),
            self.se.map(fmt_g10).unwrap_or_default(),
        ]
    }
}

/// Mean and standard error (`sd / sqrt(n)`) summary row.
pub fn summarize(experiment: &str, param: Option<f64>, estimator: &str, tuned: &str, metric: &str, values: &[f64]) -> ResultRecord {
    ResultRecord::summary(experiment, param, estimator, tuned, metric, stats::mean(values), Some(stats::std_error(values)))
}

/// Formats with 10 significant digits in the style of C's `%.10g`.
pub fn fmt_g10(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let sci = format!("{v:.9e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..10).contains(&exp) {
        let fixed = format!("{:.*}", (9 - exp) as usize, v);
        trim_fraction(&fixed).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_fraction(mantissa), exp.abs())
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes records as CSV to any sink.
pub fn write_csv<W: Write>(sink: W, records: &[ResultRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record(r.fields())?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv(std::io::BufWriter::new(file), records)
}

pub fn to_csv_string(records: &[ResultRecord]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

/// Plain-text `key=value` sidecar describing a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, seed: u64) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("seed", seed);
        m.set("version", env!("CARGO_PKG_VERSION"));
        m
    }

    /// Sets or replaces a key. Newlines in values are escaped.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string().replace('\n', "\\n");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn remove(&mut self, key: &str) {
        self.entries.retain(|(k, _)| k != key);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}
