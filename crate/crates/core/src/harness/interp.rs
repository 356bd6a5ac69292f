use super::ResultRecord;
use crate::error::{ensure, Result};

/// Probability that a given row lands in a bootstrap resample.
pub const INBAG_PROB: f64 = 0.632;

/// Log-probabilities of `Bin(b, INBAG_PROB)`, built by the pmf recursion.
fn log_pmf(b: usize) -> Vec<f64> {
    let (lq, lr) = (INBAG_PROB.ln(), (1.0 - INBAG_PROB).ln());
    let mut out = Vec::with_capacity(b + 1);
    let mut lp = b as f64 * lr;
    for k in 0..=b {
        out.push(lp);
        if k < b {
            lp += ((b - k) as f64).ln() - ((k + 1) as f64).ln() + lq - lr;
        }
    }
    out
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Probability that a row is in-bag in at least half of `b` bootstrap
/// resamples, `P(X >= ceil(b/2))` for `X ~ Bin(b, 0.632)`.
pub fn interp_prob(b: usize) -> f64 {
    assert!(b >= 1, "need at least one resample");
    let lp = log_pmf(b);
    log_sum_exp(&lp[b.div_ceil(2)..]).exp().min(1.0)
}

/// `interp_prob(b)^n`: every one of `n` rows is interpolated, treating rows
/// as independent. Computed from the lower tail to keep precision when
/// `interp_prob(b)` is close to one.
pub fn interp_prob_all(b: usize, n: usize) -> f64 {
    assert!(b >= 1, "need at least one resample");
    let lp = log_pmf(b);
    let lower = log_sum_exp(&lp[..b.div_ceil(2)]).exp();
    (n as f64 * (-lower).ln_1p()).exp()
}

/// `p_int(B)` for each `B`, and `p_int(B)^n` over the `n` grid.
pub fn interp_table(b_list: &[usize], n_list: &[usize]) -> Result<Vec<ResultRecord>> {
    ensure!(!b_list.is_empty(), "B list is empty");
    ensure!(b_list.iter().all(|&b| b >= 1), "B must be at least 1");
    let mut out = Vec::new();
    for &b in b_list {
        out.push(ResultRecord::summary("interp", Some(b as f64), "p_int", format!("B={b}"), "p_int", interp_prob(b), None));
        for &n in n_list {
            out.push(ResultRecord::summary("interp", Some(n as f64), "p_int_all", format!("B={b}"), "p_int_all", interp_prob_all(b, n), None));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct sum with integer binomial coefficients.
    fn direct(b: usize) -> f64 {
        let mut c = 1u128;
        let mut total = 0.0;
        for k in 0..=b {
            if k >= b.div_ceil(2) {
                total += c as f64 * INBAG_PROB.powi(k as i32) * (1.0 - INBAG_PROB).powi((b - k) as i32);
            }
            c = c * (b - k) as u128 / (k + 1) as u128;
        }
        total
    }

    #[test]
    fn two_resamples_by_hand() {
        assert!((interp_prob(2) - 0.864576).abs() < 1e-15);
        assert!((interp_prob(1) - 0.632).abs() < 1e-15);
    }

    #[test]
    fn matches_direct_sum() {
        for b in 1..=40 {
            assert!((interp_prob(b) - direct(b)).abs() < 1e-13, "B = {b}");
        }
    }

    #[test]
    fn monotone_in_even_b() {
        let v: Vec<f64> = (10..=400).step_by(2).map(interp_prob).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn all_rows_decay_in_n() {
        let v: Vec<f64> = (50..=2000).step_by(50).map(|n| interp_prob_all(100, n)).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]));
        assert!(interp_prob_all(100, 2000) < 0.05);
        let p = interp_prob(100);
        assert!((interp_prob_all(100, 7) - p.powi(7)).abs() < 1e-12);
    }

    #[test]
    fn table_layout() {
        let t = interp_table(&[100, 150], &[50, 100, 150]).unwrap();
        assert_eq!(t.len(), 2 * 4);
        assert!(interp_table(&[0], &[]).is_err());
    }
}
