use std::io::Read;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{grid_tasks, mtry_label, summarize, ResultRecord};
use crate::cart::TreeConfig;
use crate::datagen::Dataset;
use crate::error::{ensure, Error, Result};
use crate::forest::fit_forest;
use crate::rng::{self, purpose};
use crate::stats;

/// Smallest dataset accepted for 10-fold cross-validation.
pub const MIN_ROWS: usize = 20;

const MISSING: [&str; 5] = ["", "NA", "?", "NaN", "nan"];

/// Reads a delimited file with a header row. See [`parse_csv`].
pub fn load_csv(path: &Path, response: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    parse_csv(file, &path.display().to_string(), response)
}

/// Parses comma-separated data with a header. The response is the named
/// column (default: the last one). Rows with a missing cell (empty, `NA`,
/// `?`, `NaN`) are dropped. Columns where most cells are not numbers are
/// one-hot encoded as `name=level`, levels sorted; a stray non-number in an
/// otherwise numeric column is an error. Error rows count file lines, the
/// header being line 1.
pub fn parse_csv<R: Read>(reader: R, source: &str, response: Option<&str>) -> Result<Dataset> {
    let perr = |row: usize, column: &str, message: String| Error::Parse {
        path: source.to_string(),
        row,
        column: column.to_string(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    ensure!(header.len() >= 2, "{source}: need at least one feature column and a response");
    let y_col = match response {
        None => header.len() - 1,
        Some(name) => header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("{source}: no column named '{name}'")))?,
    };

    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec?;
        if rec.len() != header.len() {
            let col = rec.len().min(header.len() - 1);
            return Err(perr(
                line,
                &header[col],
                format!("expected {} fields, found {}", header.len(), rec.len()),
            ));
        }
        if rec.iter().any(|c| MISSING.contains(&c)) {
            continue;
        }
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    ensure!(!rows.is_empty(), "{source}: no complete rows");

    let numeric_col = |j: usize| -> Result<Option<Vec<f64>>> {
        let parsed: Vec<Option<f64>> = rows.iter().map(|(_, r)| r[j].parse::<f64>().ok().filter(|v| v.is_finite())).collect();
        let good = parsed.iter().filter(|v| v.is_some()).count();
        if good == parsed.len() {
            return Ok(Some(parsed.into_iter().map(Option::unwrap).collect()));
        }
        if j == y_col || 2 * good > parsed.len() {
            let bad = parsed.iter().position(Option::is_none).unwrap();
            let (line, r) = &rows[bad];
            return Err(perr(*line, &header[j], format!("'{}' is not a number", r[j])));
        }
        Ok(None)
    };

    let y = DVector::from_vec(numeric_col(y_col)?.expect("response checked numeric"));
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for j in (0..header.len()).filter(|&j| j != y_col) {
        match numeric_col(j)? {
            Some(v) => columns.push(v),
            None => {
                let mut levels: Vec<&str> = rows.iter().map(|(_, r)| r[j].as_str()).collect();
                levels.sort_unstable();
                levels.dedup();
                for lv in levels {
                    columns.push(rows.iter().map(|(_, r)| f64::from(u8::from(r[j] == lv))).collect());
                }
            }
        }
    }
    let x = DMatrix::from_fn(rows.len(), columns.len(), |i, j| columns[j][i]);
    Dataset::new(x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RealNoiseSpec {
    pub id: String,
    /// Added noise variance as a fraction of the response variance.
    pub alphas: Vec<f64>,
    pub n_reps: usize,
    pub n_folds: usize,
    pub n_trees: usize,
    /// Reference (bagging) and challenger `mtry`.
    pub mtry_pair: (f64, f64),
    pub seed: u64,
}

impl RealNoiseSpec {
    pub fn new(id: &str, alphas: Vec<f64>, n_reps: usize, seed: u64) -> Self {
        RealNoiseSpec {
            id: id.to_string(),
            alphas,
            n_reps,
            n_folds: 10,
            n_trees: crate::forest::DEFAULT_TREES,
            mtry_pair: (1.0, 0.33),
            seed,
        }
    }
}

/// Relative test error `RTE = (Err(ref) - Err(alt)) / var(y) * 100` from
/// K-fold cross-validation after adding `N(0, alpha * var(y))` noise to the
/// response, and the shift `RTE(alpha) - RTE(0)` within each replication.
///
/// Within a replication the fold split, the standardized noise draw and the
/// tree seeds are shared by every `alpha` and by both forests.
pub fn run_real_noise(data: &Dataset, spec: &RealNoiseSpec) -> Result<Vec<ResultRecord>> {
    let n = data.n();
    ensure!(n >= MIN_ROWS, "dataset has {n} rows; at least {MIN_ROWS} are needed for cross-validation");
    ensure!(!spec.alphas.is_empty(), "alpha list is empty");
    ensure!(spec.alphas.iter().all(|a| a.is_finite() && *a >= 0.0), "alpha values must be nonnegative");
    ensure!(spec.n_reps >= 2, "need at least two replications");
    ensure!(spec.n_folds >= 2 && spec.n_folds <= n, "fold count must lie in [2, n]");
    ensure!(spec.n_trees >= 1, "need at least one tree");
    let var_y = stats::sample_variance(data.y.as_slice());
    ensure!(var_y > 0.0, "response is constant");

    // alpha = 0 first: it is the baseline of every shift.
    let mut levels = vec![0.0];
    levels.extend(spec.alphas.iter().copied().filter(|&a| a != 0.0));
    levels.dedup();

    let results = grid_tasks(spec.n_reps, levels.len(), |r, a| {
        let (r64, alpha) = (r as u64, levels[a]);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(spec.seed, &[r64, purpose::FOLDS]));
        let mut z_rng = rng::stream(spec.seed, &[r64, purpose::NOISE]);
        let sd = (alpha * var_y).sqrt();
        let y = DVector::from_fn(n, |i, _| {
            let z: f64 = z_rng.sample(StandardNormal);
            data.y[i] + sd * z
        });
        let noisy = Dataset::new(data.x.clone(), y)?;
        let fold = fold_assignment(&order, spec.n_folds);
        let mut sse = (0.0, 0.0);
        for k in 0..spec.n_folds {
            let (held, kept): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| fold[i] == k);
            let train = noisy.select_rows(&kept);
            let test = noisy.select_rows(&held);
            let fit_seed = rng::derive_seed(spec.seed, &[r64, k as u64, purpose::FIT]);
            let err = |mtry: f64| -> Result<f64> {
                let f = fit_forest(&train, &TreeConfig::default().with_mtry(mtry), spec.n_trees, fit_seed)?;
                Ok((f.predict(&test.x)? - &test.y).norm_squared())
            };
            sse.0 += err(spec.mtry_pair.0)?;
            sse.1 += err(spec.mtry_pair.1)?;
        }
        Ok((sse.0 - sse.1) / n as f64 / var_y * 100.0)
    })?;

    let label = format!("{} vs {}", mtry_label(spec.mtry_pair.0), mtry_label(spec.mtry_pair.1));
    let mut out = Vec::new();
    let mut shifted_means = Vec::new();
    for &alpha in &spec.alphas {
        let a = levels.iter().position(|&l| l == alpha).expect("level present");
        let rte: Vec<f64> = results.iter().map(|rep| rep[a]).collect();
        let shifted: Vec<f64> = results.iter().map(|rep| rep[a] - rep[0]).collect();
        for r in 0..spec.n_reps {
            out.push(ResultRecord::rep(&spec.id, r, alpha, "difference", label.clone(), "rte", rte[r]));
            out.push(ResultRecord::rep(&spec.id, r, alpha, "difference", label.clone(), "shifted_rte", shifted[r]));
        }
        out.push(summarize(&spec.id, Some(alpha), "difference", &label, "rte", &rte));
        let s = summarize(&spec.id, Some(alpha), "difference", &label, "shifted_rte", &shifted);
        shifted_means.push(s.value);
        out.push(s);
    }
    if spec.alphas.len() >= 2 {
        let slope = stats::ls_slope(&spec.alphas, &shifted_means);
        out.push(ResultRecord::summary(&spec.id, None, "difference", label, "shifted_rte_slope", slope, None));
    }
    Ok(out)
}

/// Fold of each row: contiguous blocks of the shuffled order, sizes
/// differing by at most one.
fn fold_assignment(order: &[usize], k: usize) -> Vec<usize> {
    let mut fold = vec![0; order.len()];
    for (pos, &row) in order.iter().enumerate() {
        fold[row] = pos * k / order.len();
    }
    fold
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_numeric_and_categorical() {
        let text = "a,color,b,y\n1,red,2,3\n2,blue,NA,4\n3,red,1,5\n4,green,0,6\n";
        let d = parse_csv(text.as_bytes(), "t", None).unwrap();
        assert_eq!(d.n(), 3);
        // a, color=green, color=red, b (blue only occurs in the dropped row)
        assert_eq!(d.p(), 4);
        assert_eq!(d.y.as_slice(), &[3.0, 5.0, 6.0]);
        assert_eq!(d.x.row(2).iter().copied().collect::<Vec<_>>(), vec![4.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn response_by_name() {
        let d = parse_csv("y,x1,x2\n1,2,3\n4,5,6\n".as_bytes(), "t", Some("y")).unwrap();
        assert_eq!(d.y.as_slice(), &[1.0, 4.0]);
        assert!(parse_csv("y,x\n1,2\n".as_bytes(), "t", Some("z")).is_err());
    }

    #[test]
    fn malformed_input_names_row_and_column() {
        match parse_csv("x,y\n1,2\n3\n".as_bytes(), "f.csv", None) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (3, "y")),
            other => panic!("{other:?}"),
        }
        match parse_csv("x,y\n1,2\n3,4\n5,oops\n".as_bytes(), "f.csv", None) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column.as_str()), (4, "y")),
            other => panic!("{other:?}"),
        }
        match parse_csv("x,z,y\n1,1,2\n3,1,4\n5,1x,4\n".as_bytes(), "f.csv", None) {
            Err(e @ Error::Parse { .. }) => assert!(e.to_string().contains("row 4, column z"), "{e}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn response_variance_uses_n_minus_one() {
        let d = parse_csv("x,y\n0,1\n1,2\n2,4\n3,7\n4,11\n".as_bytes(), "t", None).unwrap();
        // mean 5; squares of deviations 16 + 9 + 1 + 4 + 36 = 66
        assert_eq!(stats::sample_variance(d.y.as_slice()), 66.0 / 4.0);
    }

    fn toy(n: usize) -> Dataset {
        let mut r = rng::stream(4, &[]);
        let x = DMatrix::from_fn(n, 3, |_, _| r.random::<f64>());
        let y = DVector::from_fn(n, |i, _| 3.0 * x[(i, 0)] + x[(i, 1)] + 0.3 * r.sample::<f64, _>(StandardNormal));
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn zero_alpha_shift_is_exactly_zero() {
        let mut spec = RealNoiseSpec::new("r", vec![0.0, 0.5], 2, 9);
        spec.n_trees = 5;
        let recs = run_real_noise(&toy(40), &spec).unwrap();
        let zero: Vec<_> = recs.iter().filter(|r| r.metric == "shifted_rte" && r.param == Some(0.0)).collect();
        assert_eq!(zero.len(), 3);
        assert!(zero.iter().all(|r| r.value == 0.0));
        assert_eq!(recs.iter().filter(|r| r.metric == "shifted_rte_slope").count(), 1);
    }

    #[test]
    fn refuses_tiny_datasets() {
        let spec = RealNoiseSpec::new("r", vec![0.0], 2, 1);
        assert!(run_real_noise(&toy(19), &spec).is_err());
    }

    #[test]
    fn folds_are_balanced() {
        let order: Vec<usize> = (0..23).rev().collect();
        let mut sizes = [0usize; 10];
        for f in fold_assignment(&order, 10) {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 2 || s == 3));
    }
}
