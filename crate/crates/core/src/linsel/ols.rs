use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{center_columns, column_means, CoefModel};
use crate::error::{ensure, Result};

/// Least-squares fit plus whether the design was numerically rank deficient
/// (in which case the minimum-norm solution is returned).
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub model: CoefModel,
    pub rank_deficient: bool,
}

/// Ordinary least squares with an intercept.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    ensure!(x.nrows() == y.len(), "X has {} rows but y has {} entries", x.nrows(), y.len());
    ensure!(x.nrows() >= 1, "least squares needs at least one row");
    let means = column_means(x);
    let ybar = y.mean();
    let xc = center_columns(x, &means);
    let yc = y.add_scalar(-ybar);
    let (coefs, rank_deficient) = lstsq(&xc, &yc);
    let intercept = ybar - means.dot(&coefs);
    Ok(OlsFit {
        model: CoefModel::new(intercept, coefs),
        rank_deficient,
    })
}

/// Least squares without an intercept.
pub fn ols_through_origin(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<OlsFit> {
    ensure!(x.nrows() == y.len(), "X has {} rows but y has {} entries", x.nrows(), y.len());
    let (coefs, rank_deficient) = lstsq(x, y);
    Ok(OlsFit {
        model: CoefModel::new(0.0, coefs),
        rank_deficient,
    })
}

/// Solves `min |y - X b|` by Cholesky on the normal equations, falling back
/// to an SVD pseudoinverse when the Gram matrix is (nearly) singular.
pub(crate) fn lstsq(x: &DMatrix<f64>, y: &DVector<f64>) -> (DVector<f64>, bool) {
    let p = x.ncols();
    if p == 0 {
        return (DVector::zeros(0), false);
    }
    let gram = x.tr_mul(x);
    let rhs = x.tr_mul(y);
    if x.nrows() >= p {
        let scale = gram.diagonal().max();
        if let Some(chol) = Cholesky::<f64, Dyn>::new(gram.clone()) {
            let l = chol.l_dirty();
            let min_pivot = (0..p).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
            if scale > 0.0 && min_pivot > 1e-11 * scale {
                return (chol.solve(&rhs), false);
            }
        }
    }
    (pinv_solve(x, y), true)
}

/// Minimum-norm least-squares solution via SVD.
pub(crate) fn pinv_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
    if x.ncols() == 0 {
        return DVector::zeros(0);
    }
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = smax * 1e-10 * (x.nrows().max(x.ncols()) as f64);
    svd.solve(y, eps).expect("U and V were computed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_fn(6, 1, |i, _| i as f64 - 1.5);
        let y = &x.column(0) * 2.0;
        let fit = ols(&x, &y.into()).unwrap();
        assert!((fit.model.coefs[0] - 2.0).abs() < 1e-12);
        assert!(fit.model.intercept.abs() < 1e-12);
        assert!(!fit.rank_deficient);
    }

    #[test]
    fn orthonormal_design_gives_projections() {
        let mut r = rng::stream(1, &[]);
        let g = DMatrix::<f64>::from_fn(12, 3, |_, _| r.sample(StandardNormal));
        let q = g.qr().q();
        let y = DVector::<f64>::from_fn(12, |_, _| r.sample(StandardNormal));
        let fit = ols_through_origin(&q, &y).unwrap();
        assert!((fit.model.coefs - q.tr_mul(&y)).amax() < 1e-12);
    }

    #[test]
    fn matches_qr_reference() {
        let mut r = rng::stream(2, &[]);
        let x = DMatrix::<f64>::from_fn(20, 5, |_, _| r.sample(StandardNormal));
        let y = DVector::<f64>::from_fn(20, |_, _| r.sample(StandardNormal));
        // QR solve of the augmented design [1 X]
        let aug = DMatrix::from_fn(20, 6, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
        let qr = aug.qr();
        let b = qr.r().solve_upper_triangular(&qr.q().tr_mul(&y)).unwrap();
        let fit = ols(&x, &y).unwrap();
        assert!((fit.model.intercept - b[0]).abs() < 1e-10);
        for j in 0..5 {
            assert!((fit.model.coefs[j] - b[j + 1]).abs() < 1e-10);
        }
    }

    #[test]
    fn rank_deficiency_is_flagged() {
        let x = DMatrix::from_fn(10, 3, |i, j| if j == 2 { 2.0 * i as f64 } else { (i * (j + 1)) as f64 % 7.0 });
        let mut x2 = x.clone();
        x2.set_column(2, &(x.column(0) * 2.0));
        let y = DVector::from_fn(10, |i, _| i as f64);
        let fit = ols(&x2, &y).unwrap();
        assert!(fit.rank_deficient);
        // minimum-norm split between the two collinear columns
        assert!((fit.model.coefs[0] * 2.0 - fit.model.coefs[2] * 1.0).abs() < 1e-8 * fit.model.coefs.amax());
    }
}
