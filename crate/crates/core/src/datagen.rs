//! Synthetic regression data: Gaussian linear models with Toeplitz feature
//! covariance, the MARS and additive MARS test functions on the unit cube,
//! and noise calibrated to a target signal-to-noise ratio.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Result};
use crate::rng::{self, StreamRng};

/// Regression data set. `f`, `sigma2` and `beta_true` are only known for
/// synthetic data.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub f: Option<DVector<f64>>,
    pub sigma2: Option<f64>,
    pub beta_true: Option<DVector<f64>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        ensure!(
            x.nrows() == y.len(),
            "X has {} rows but y has {} entries",
            x.nrows(),
            y.len()
        );
        Ok(Dataset {
            x,
            y,
            f: None,
            sigma2: None,
            beta_true: None,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `idx` (repeats allowed) as a new data set.
    pub fn select_rows(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i])),
            f: self
                .f
                .as_ref()
                .map(|f| DVector::from_iterator(idx.len(), idx.iter().map(|&i| f[i]))),
            sigma2: self.sigma2,
            beta_true: self.beta_true.clone(),
        }
    }
}

/// A signal-to-noise ratio `Var(f) / Var(eps)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SnrLevel(f64);

impl SnrLevel {
    pub fn new(nu: f64) -> Result<Self> {
        ensure!(nu.is_finite() && nu > 0.0, "SNR must be positive and finite, got {nu}");
        Ok(SnrLevel(nu))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// `count` SNR values log-equally spaced on `[lo, hi]`, endpoints exact.
pub fn snr_grid(count: usize, lo: f64, hi: f64) -> Result<Vec<SnrLevel>> {
    ensure!(count >= 2, "SNR grid needs at least two points, got {count}");
    ensure!(
        lo.is_finite() && hi.is_finite() && lo > 0.0 && lo < hi,
        "SNR grid bounds must satisfy 0 < lo < hi, got [{lo}, {hi}]"
    );
    let (a, b) = (lo.ln(), hi.ln());
    let step = (b - a) / (count - 1) as f64;
    (0..count)
        .map(|i| match i {
            0 => SnrLevel::new(lo),
            i if i == count - 1 => SnrLevel::new(hi),
            i => SnrLevel::new((a + step * i as f64).exp()),
        })
        .collect()
}

/// The canonical ten-point grid from 0.05 to 6.
pub fn default_snr_grid() -> Vec<SnrLevel> {
    snr_grid(10, 0.05, 6.0).expect("static grid")
}

/// `p x p` matrix with entries `rho^|i-j|`.
pub fn toeplitz_sigma(p: usize, rho: f64) -> Result<DMatrix<f64>> {
    ensure!(p >= 1, "dimension must be positive");
    ensure!((0.0..1.0).contains(&rho), "rho must lie in [0, 1), got {rho}");
    let powers: Vec<f64> = (0..p).map(|k| rho.powi(k as i32)).collect();
    Ok(DMatrix::from_fn(p, p, |i, j| powers[i.abs_diff(j)]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BetaType {
    /// First `s` coefficients equal to one, the rest zero.
    Type2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSetting {
    pub n: usize,
    pub p: usize,
    pub s: usize,
    pub rho: f64,
    pub beta_type: BetaType,
}

impl LinearSetting {
    pub fn new(n: usize, p: usize, s: usize, rho: f64) -> Result<Self> {
        let setting = LinearSetting {
            n,
            p,
            s,
            rho,
            beta_type: BetaType::Type2,
        };
        setting.validate()?;
        Ok(setting)
    }

    fn preset(n: usize, p: usize, s: usize) -> Self {
        LinearSetting {
            n,
            p,
            s,
            rho: 0.35,
            beta_type: BetaType::Type2,
        }
    }

    pub fn low() -> Self {
        Self::preset(100, 10, 5)
    }

    pub fn medium() -> Self {
        Self::preset(500, 100, 5)
    }

    pub fn high5() -> Self {
        Self::preset(50, 1000, 5)
    }

    pub fn high10() -> Self {
        Self::preset(100, 1000, 10)
    }

    /// Looks up a preset by name (`low`, `medium`, `high-5`, `high-10`).
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "low" => Some(Self::low()),
            "medium" => Some(Self::medium()),
            "high-5" | "high5" => Some(Self::high5()),
            "high-10" | "high10" => Some(Self::high10()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n >= 1, "n must be at least 1");
        ensure!(self.p >= 1, "p must be at least 1");
        ensure!(self.s >= 1, "s = 0 gives a zero signal; the SNR is undefined");
        ensure!(self.s <= self.p, "s = {} exceeds p = {}", self.s, self.p);
        ensure!(
            (0.0..1.0).contains(&self.rho),
            "rho must lie in [0, 1), got {}",
            self.rho
        );
        Ok(())
    }

    pub fn beta(&self) -> DVector<f64> {
        match self.beta_type {
            BetaType::Type2 => DVector::from_fn(self.p, |j, _| if j < self.s { 1.0 } else { 0.0 }),
        }
    }
}

/// Sampler for one linear setting. The Cholesky factor of the covariance is
/// computed once and reused for every draw.
#[derive(Debug, Clone)]
pub struct LinearGenerator {
    setting: LinearSetting,
    sigma: DMatrix<f64>,
    chol_l: DMatrix<f64>,
    beta: DVector<f64>,
    signal_var: f64,
}

impl LinearGenerator {
    pub fn new(setting: LinearSetting) -> Result<Self> {
        setting.validate()?;
        let sigma = toeplitz_sigma(setting.p, setting.rho)?;
        let chol_l = Cholesky::<f64, Dyn>::new(sigma.clone())
            .expect("Toeplitz covariance with rho < 1 is positive definite")
            .unpack();
        let beta = setting.beta();
        let signal_var = quad_form(&sigma, &beta);
        Ok(LinearGenerator {
            setting,
            sigma,
            chol_l,
            beta,
            signal_var,
        })
    }

    pub fn setting(&self) -> &LinearSetting {
        &self.setting
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn beta(&self) -> &DVector<f64> {
        &self.beta
    }

    /// `beta' Sigma beta`, the variance of the signal.
    pub fn signal_variance(&self) -> f64 {
        self.signal_var
    }

    pub fn noise_variance(&self, snr: SnrLevel) -> f64 {
        self.signal_var / snr.value()
    }

    /// `n x p` matrix with i.i.d. `N(0, Sigma)` rows.
    pub fn sample_x(&self, n: usize, rng: &mut StreamRng) -> DMatrix<f64> {
        let p = self.setting.p;
        let z = DMatrix::<f64>::from_fn(n, p, |_, _| rng.sample(StandardNormal));
        z * self.chol_l.transpose()
    }

    pub fn sample(&self, n: usize, snr: SnrLevel, rng: &mut StreamRng) -> Dataset {
        let x = self.sample_x(n, rng);
        let f = &x * &self.beta;
        let sigma2 = self.noise_variance(snr);
        let sd = sigma2.sqrt();
        let y = DVector::from_fn(n, |i, _| f[i] + sd * rng.sample::<f64, _>(StandardNormal));
        Dataset {
            x,
            y,
            f: Some(f),
            sigma2: Some(sigma2),
            beta_true: Some(self.beta.clone()),
        }
    }
}

pub(crate) fn quad_form(a: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    v.dot(&(a * v))
}

/// Linear-model data set of size `setting.n` at the given SNR.
pub fn gen_linear(setting: LinearSetting, snr: SnrLevel, seed: u64) -> Result<Dataset> {
    let gen = LinearGenerator::new(setting)?;
    let mut rng = rng::stream(seed, &[]);
    Ok(gen.sample(setting.n, snr, &mut rng))
}

/// Regression functions on `Unif(0,1)^5`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarsFunction {
    /// `10 sin(pi x1 x2) + 20 (x3 - 0.05)^2 + 10 x4 + 5 x5`
    Mars,
    /// `0.1 exp(4 x1) + 4 / (1 + exp(-20 (x2 - 0.5))) + 3 x3 + 2 x4 + x5`
    MarsAdd,
}

const MARS_VAR_SAMPLES: usize = 1_000_000;
const MARS_VAR_SEED: u64 = 0x4D41_5253;

impl MarsFunction {
    pub const P: usize = 5;

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            MarsFunction::Mars => {
                10.0 * (std::f64::consts::PI * x[0] * x[1]).sin()
                    + 20.0 * (x[2] - 0.05).powi(2)
                    + 10.0 * x[3]
                    + 5.0 * x[4]
            }
            MarsFunction::MarsAdd => {
                0.1 * (4.0 * x[0]).exp()
                    + 4.0 / (1.0 + (-20.0 * (x[1] - 0.5)).exp())
                    + 3.0 * x[2]
                    + 2.0 * x[3]
                    + x[4]
            }
        }
    }

    /// Monte-Carlo estimate of `Var(f(X))` under the uniform design, computed
    /// once from a fixed internal seed and cached.
    pub fn signal_variance(self) -> f64 {
        static MARS: OnceLock<f64> = OnceLock::new();
        static MARS_ADD: OnceLock<f64> = OnceLock::new();
        let cell = match self {
            MarsFunction::Mars => &MARS,
            MarsFunction::MarsAdd => &MARS_ADD,
        };
        *cell.get_or_init(|| self.mc_variance(MARS_VAR_SAMPLES, MARS_VAR_SEED))
    }

    fn mc_variance(self, samples: usize, seed: u64) -> f64 {
        let mut rng = rng::stream(seed, &[self as u64]);
        let mut row = [0.0; 5];
        // Welford
        let mut mean = 0.0;
        let mut m2 = 0.0;
        for k in 0..samples {
            for v in row.iter_mut() {
                *v = rng.random::<f64>();
            }
            let f = self.eval(&row);
            let delta = f - mean;
            mean += delta / (k + 1) as f64;
            m2 += delta * (f - mean);
        }
        m2 / (samples - 1) as f64
    }

    pub fn noise_variance(self, snr: SnrLevel) -> f64 {
        self.signal_variance() / snr.value()
    }

    pub fn sample(self, n: usize, snr: SnrLevel, rng: &mut StreamRng) -> Dataset {
        let mut x = DMatrix::<f64>::zeros(n, Self::P);
        let mut f = DVector::<f64>::zeros(n);
        let mut row = [0.0; 5];
        for i in 0..n {
            for (j, v) in row.iter_mut().enumerate() {
                *v = rng.random::<f64>();
                x[(i, j)] = *v;
            }
            f[i] = self.eval(&row);
        }
        let sigma2 = self.noise_variance(snr);
        let sd = sigma2.sqrt();
        let y = DVector::from_fn(n, |i, _| f[i] + sd * rng.sample::<f64, _>(StandardNormal));
        Dataset {
            x,
            y,
            f: Some(f),
            sigma2: Some(sigma2),
            beta_true: None,
        }
    }
}

pub fn gen_mars(n: usize, snr: SnrLevel, seed: u64) -> Result<Dataset> {
    ensure!(n >= 1, "n must be at least 1");
    Ok(MarsFunction::Mars.sample(n, snr, &mut rng::stream(seed, &[])))
}

pub fn gen_marsadd(n: usize, snr: SnrLevel, seed: u64) -> Result<Dataset> {
    ensure!(n >= 1, "n must be at least 1");
    Ok(MarsFunction::MarsAdd.sample(n, snr, &mut rng::stream(seed, &[])))
}

/// Any of the synthetic data sources, for experiment descriptions.
#[derive(Debug, Clone)]
pub enum Generator {
    Linear(LinearGenerator),
    Mars(MarsFunction),
}

impl Generator {
    pub fn linear(setting: LinearSetting) -> Result<Self> {
        Ok(Generator::Linear(LinearGenerator::new(setting)?))
    }

    pub fn p(&self) -> usize {
        match self {
            Generator::Linear(g) => g.setting().p,
            Generator::Mars(_) => MarsFunction::P,
        }
    }

    pub fn noise_variance(&self, snr: SnrLevel) -> f64 {
        match self {
            Generator::Linear(g) => g.noise_variance(snr),
            Generator::Mars(m) => m.noise_variance(snr),
        }
    }

    pub fn sample(&self, n: usize, snr: SnrLevel, rng: &mut StreamRng) -> Dataset {
        match self {
            Generator::Linear(g) => g.sample(n, snr, rng),
            Generator::Mars(m) => m.sample(n, snr, rng),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Generator::Linear(g) => {
                let s = g.setting();
                format!("linear(n={},p={},s={},rho={})", s.n, s.p, s.s, s.rho)
            }
            Generator::Mars(MarsFunction::Mars) => "mars".to_string(),
            Generator::Mars(MarsFunction::MarsAdd) => "marsadd".to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // exp(linspace(log(0.05), log(6), 10)) from an independent numpy script.
    const REFERENCE_GRID: [f64; 10] = [
        0.05,
        0.08511187200780794,
        0.14488061513346964,
        0.24662120743304702,
        0.419807852829051,
        0.7146126447571773,
        1.21644039911468,
        2.0706703910915083,
        3.5247726659387624,
        6.0,
    ];

    #[test]
    fn snr_grid_matches_reference() {
        let g = default_snr_grid();
        assert_eq!(g.len(), 10);
        for (a, b) in g.iter().zip(REFERENCE_GRID) {
            assert_abs_diff_eq!(a.value(), b, epsilon = 1e-13);
        }
        assert_eq!(g[0].value(), 0.05);
        assert_eq!(g[9].value(), 6.0);
        let rounded: Vec<f64> = g[..3].iter().map(|s| (s.value() * 100.0).round() / 100.0).collect();
        assert_eq!(rounded, vec![0.05, 0.09, 0.14]);
    }

    #[test]
    fn snr_grid_rejects_bad_bounds() {
        assert!(snr_grid(2, 1.0, 1.0).is_err());
        assert!(snr_grid(1, 0.1, 1.0).is_err());
        assert!(snr_grid(5, 0.0, 1.0).is_err());
        assert!(snr_grid(5, 2.0, 1.0).is_err());
        assert!(SnrLevel::new(0.0).is_err());
    }

    #[test]
    fn toeplitz_small_case() {
        let s = toeplitz_sigma(3, 0.35).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[1.0, 0.35, 0.1225, 0.35, 1.0, 0.35, 0.1225, 0.35, 1.0]);
        assert!((s - expected).abs().max() < 1e-15);
        assert_eq!(toeplitz_sigma(4, 0.0).unwrap(), DMatrix::identity(4, 4));
        assert!(toeplitz_sigma(3, 1.0).is_err());
    }

    #[test]
    fn toeplitz_cholesky_rebuilds() {
        let s = toeplitz_sigma(5, 0.35).unwrap();
        let l = Cholesky::new(s.clone()).unwrap().unpack();
        assert!((&l * l.transpose() - s).abs().max() < 1e-12);
    }

    #[test]
    fn toeplitz_positive_definite_up_to_099() {
        for &rho in &[0.0, 0.35, 0.7, 0.9, 0.99] {
            let s = toeplitz_sigma(30, rho).unwrap();
            assert_eq!(s, s.transpose());
            let eig = s.symmetric_eigenvalues();
            assert!(eig.min() > 0.0, "rho={rho}");
        }
    }

    #[test]
    fn low_setting_noise_variance() {
        // 5 + 2 (4 rho + 3 rho^2 + 2 rho^3 + rho^4), rho = 0.35
        let quad = 5.0 + 2.0 * (4.0 * 0.35 + 3.0 * 0.35f64.powi(2) + 2.0 * 0.35f64.powi(3) + 0.35f64.powi(4));
        assert_abs_diff_eq!(quad, 8.7365125, epsilon = 1e-12);
        let d = gen_linear(LinearSetting::low(), SnrLevel::new(3.52).unwrap(), 1).unwrap();
        assert_abs_diff_eq!(d.sigma2.unwrap(), quad / 3.52, epsilon = 1e-12);
        assert_eq!(d.x.shape(), (100, 10));
        assert_eq!(d.beta_true.as_ref().unwrap().sum(), 5.0);
    }

    #[test]
    fn presets_match_settings() {
        let shape = |s: LinearSetting| (s.n, s.p, s.s, s.rho);
        assert_eq!(shape(LinearSetting::low()), (100, 10, 5, 0.35));
        assert_eq!(shape(LinearSetting::medium()), (500, 100, 5, 0.35));
        assert_eq!(shape(LinearSetting::high5()), (50, 1000, 5, 0.35));
        assert_eq!(shape(LinearSetting::high10()), (100, 1000, 10, 0.35));
    }

    #[test]
    fn zero_signal_rejected() {
        assert!(LinearSetting::new(10, 5, 0, 0.35).is_err());
        assert!(LinearSetting::new(10, 5, 6, 0.35).is_err());
    }

    #[test]
    fn generators_are_deterministic() {
        let nu = SnrLevel::new(0.7).unwrap();
        assert_eq!(gen_linear(LinearSetting::low(), nu, 9).unwrap(), gen_linear(LinearSetting::low(), nu, 9).unwrap());
        assert_eq!(gen_mars(50, nu, 9).unwrap(), gen_mars(50, nu, 9).unwrap());
        assert_eq!(gen_marsadd(50, nu, 9).unwrap(), gen_marsadd(50, nu, 9).unwrap());
        assert_ne!(gen_mars(50, nu, 9).unwrap(), gen_mars(50, nu, 10).unwrap());
    }

    #[test]
    fn mars_function_values() {
        assert_abs_diff_eq!(MarsFunction::Mars.eval(&[0.5, 0.5, 0.05, 0.0, 0.0]), 7.0710678118654755, epsilon = 1e-12);
        assert_eq!(MarsFunction::Mars.eval(&[0.0, 0.7, 0.05, 0.0, 0.0]), 0.0);
        assert_abs_diff_eq!(MarsFunction::MarsAdd.eval(&[0.0, 0.5, 0.0, 0.0, 0.0]), 2.1, epsilon = 1e-12);
        assert_abs_diff_eq!(MarsFunction::MarsAdd.eval(&[0.0, 0.0, 1.0, 1.0, 1.0]), 6.10018159147481, epsilon = 1e-12);
    }

    #[test]
    fn mars_signal_variance_close_to_quadrature() {
        // Values from adaptive quadrature of the (additive) moments.
        let mars = MarsFunction::Mars.signal_variance();
        let add = MarsFunction::MarsAdd.signal_variance();
        assert!((mars / 50.82646377138101 - 1.0).abs() < 0.005, "mars {mars}");
        assert!((add / 6.296210732699101 - 1.0).abs() < 0.005, "marsadd {add}");
    }

    #[test]
    fn empirical_snr_near_target() {
        let gen = LinearGenerator::new(LinearSetting::new(100_000, 10, 5, 0.35).unwrap()).unwrap();
        let nu = SnrLevel::new(2.0).unwrap();
        let d = gen.sample(100_000, nu, &mut rng::stream(3, &[]));
        let f = d.f.as_ref().unwrap();
        let eps = &d.y - f;
        let var = |v: &DVector<f64>| crate::stats::sample_variance(v.as_slice());
        let snr = var(f) / var(&eps);
        assert!((snr / 2.0 - 1.0).abs() < 0.05, "empirical SNR {snr}");
        assert!(eps.mean().abs() < 4.0 * (d.sigma2.unwrap() / 1e5).sqrt());
    }

    #[test]
    fn independent_features_weakly_correlated() {
        let n = 2000;
        let d = gen_linear(LinearSetting::new(n, 6, 2, 0.0).unwrap(), SnrLevel::new(1.0).unwrap(), 4).unwrap();
        let bound = 4.0 / (n as f64).sqrt();
        for a in 0..6 {
            for b in (a + 1)..6 {
                let r = crate::stats::pearson(d.x.column(a).as_slice(), d.x.column(b).as_slice());
                assert!(r.abs() < bound, "corr({a},{b}) = {r}");
            }
        }
    }
}
