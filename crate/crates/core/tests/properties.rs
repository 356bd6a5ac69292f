use mtrylab::datagen::{toeplitz_sigma, Dataset};
use mtrylab::harness::{fmt_g10, summarize};
use mtrylab::linsel::{kkt_violation, lasso_path_with, ols, randfs, LambdaGrid, LassoOptions, RandFsOptions};
use mtrylab::{rng, stats, DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(n: usize, p: usize, seed: u64) -> (DMatrix<f64>, DVector<f64>) {
    let mut r = rng::stream(seed, &[]);
    let x = DMatrix::from_fn(n, p, |_, _| r.sample(StandardNormal));
    let y = DVector::from_fn(n, |i, _| x[(i, 0)] - 0.5 * x[(i, p - 1)] + r.sample::<f64, _>(StandardNormal));
    (x, y)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn lasso_solutions_satisfy_kkt(seed in 0u64..10_000, n in 15usize..60, p in 2usize..25, standardize in any::<bool>()) {
        let (x, y) = gaussian(n, p, seed);
        let opts = LassoOptions { standardize, ..LassoOptions::default() };
        let grid = LambdaGrid::for_data(&x, &y, 20).unwrap();
        let path = lasso_path_with(&x, &y, &grid, &opts).unwrap();
        for (k, &lambda) in path.lambdas.iter().enumerate() {
            prop_assert!(kkt_violation(&x, &y, path.path.model(k), lambda, &opts) <= 1e-6);
        }
    }

    #[test]
    fn randfs_shrinks_ols_on_orthogonal_designs(seed in 0u64..10_000, mtry in 0.1f64..1.0, bootstrap in any::<bool>()) {
        let (n, p) = (40, 6);
        let mut r = rng::stream(seed, &[1]);
        let mut a = DMatrix::<f64>::from_fn(n, p + 1, |_, _| r.sample(StandardNormal));
        a.column_mut(0).fill(1.0);
        let x = a.qr().q().columns(1, p).into_owned();
        let y = DVector::from_fn(n, |i, _| 3.0 * x[(i, 0)] + x[(i, 1)] + r.sample::<f64, _>(StandardNormal) * 0.1);
        let beta = ols(&x, &y).unwrap().model.coefs;
        let data = Dataset::new(x, y).unwrap();
        let opts = RandFsOptions { n_models: 10, depth: 4, mtry, bootstrap };
        let fit = randfs(&data, &opts, seed).unwrap();
        // row resampling breaks orthogonality, so only the unresampled case is exact
        if !bootstrap {
            for m in &fit.averaged {
                for j in 0..p {
                    prop_assert!(m.coefs[j].abs() <= beta[j].abs() * (1.0 + 1e-10) + 1e-12);
                }
            }
        }
    }

    #[test]
    fn toeplitz_is_symmetric_positive_definite(p in 1usize..40, rho in 0.0f64..0.99) {
        let s = toeplitz_sigma(p, rho).unwrap();
        prop_assert_eq!(&s, &s.transpose());
        prop_assert!(s.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn summary_se_is_sd_over_root_reps(values in prop::collection::vec(-1e3f64..1e3, 2..50)) {
        let rec = summarize("e", None, "est", "", "m", &values);
        let want = stats::sample_sd(&values) / (values.len() as f64).sqrt();
        prop_assert!((rec.se.unwrap() - want).abs() <= 1e-12 * want.max(1.0));
        prop_assert!((rec.value - stats::mean(&values)).abs() <= 1e-9);
    }

    #[test]
    fn g10_round_trips_ten_digits(v in prop::num::f64::NORMAL) {
        let back: f64 = fmt_g10(v).parse().unwrap();
        prop_assert!(((back - v) / v).abs() <= 5e-10);
    }
}
