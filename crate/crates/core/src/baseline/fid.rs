//! Fréchet distance between Gaussian fits of two embedding sets.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

/// Eigenvalues down to this value are treated as roundoff and set to zero.
pub const EIGEN_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    /// Unbiased sample covariance (divisor n − 1), exactly symmetric.
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianFit {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

pub fn fit_gaussian(x: &EmbeddingSet) -> Result<GaussianFit> {
    let n = x.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, found: n });
    }
    let d = x.dim();
    let data = DMatrix::from_fn(n, d, |i, j| x.row(i)[j] as f64);
    let mean = DVector::from_fn(d, |j, _| data.column(j).sum() / n as f64);
    let centered = DMatrix::from_fn(n, d, |i, j| data[(i, j)] - mean[j]);
    let mut cov = DMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let v = centered.column(a).dot(&centered.column(b)) / (n - 1) as f64;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    Ok(GaussianFit { mean, cov, n })
}

fn eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, f64::EPSILON, 10_000).ok_or(Error::EigenFailure)
}

fn clamp_eigenvalues(values: &mut DVector<f64>) -> Result<()> {
    for v in values.iter_mut() {
        if *v < -EIGEN_TOLERANCE {
            return Err(Error::IllFormedCovariance(*v));
        }
        *v = v.max(0.0);
    }
    Ok(())
}

fn sym_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut e = eigen(m.clone())?;
    clamp_eigenvalues(&mut e.eigenvalues)?;
    e.eigenvalues.apply(|v| *v = v.sqrt());
    Ok(e.recompose())
}

/// `‖μ₁ − μ₂‖² + tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^½)`.
///
/// The trace of the product root is taken as the sum of square roots of
/// the eigenvalues of `Σ₁^½ Σ₂ Σ₁^½`, which is symmetric PSD and shares its
/// spectrum with `Σ₁Σ₂`.
pub fn fid(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    let root_a = sym_sqrt(&a.cov)?;
    let inner = &root_a * &b.cov * &root_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let mut e = eigen(inner)?;
    clamp_eigenvalues(&mut e.eigenvalues)?;
    let tr_root: f64 = e.eigenvalues.iter().map(|v| v.sqrt()).sum();
    let mean_term = (&a.mean - &b.mean).norm_squared();
    let value = mean_term + a.cov.trace() + b.cov.trace() - 2.0 * tr_root;
    Ok(value.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fit(mean: &[f64], cov: DMatrix<f64>) -> GaussianFit {
        GaussianFit {
            mean: DVector::from_column_slice(mean),
            cov,
            n: 100,
        }
    }

    #[test]
    fn fit_two_points() {
        let x = EmbeddingSet::from_rows(&[[0.0], [2.0]]).unwrap();
        let f = fit_gaussian(&x).unwrap();
        assert_eq!(f.mean[0], 1.0);
        assert_eq!(f.cov[(0, 0)], 2.0);
    }

    #[test]
    fn fit_constant_rows() {
        let x = EmbeddingSet::from_rows(&[[1.5, -2.0]; 5]).unwrap();
        let f = fit_gaussian(&x).unwrap();
        assert_eq!(f.mean.as_slice(), &[1.5, -2.0]);
        assert!(f.cov.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fit_needs_two_rows() {
        let x = EmbeddingSet::from_rows(&[[1.0]]).unwrap();
        assert!(matches!(fit_gaussian(&x), Err(Error::TooFewSamples { .. })));
    }

    #[test]
    fn identical_fits_give_zero() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let f = fit(&[1.0, 2.0], cov);
        assert!(fid(&f, &f).unwrap().abs() < 1e-10);
    }

    #[test]
    fn diagonal_closed_form() {
        let a = fit(&[0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![4.0, 1.0])));
        let b = fit(&[0.0, 0.0], DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 9.0])));
        // (2-1)^2 + (1-3)^2
        assert!((fid(&a, &b).unwrap() - 5.0).abs() < 1e-10);
    }

    #[test]
    fn strongly_negative_covariance_is_rejected() {
        let bad = fit(&[0.0], DMatrix::from_element(1, 1, -1.0));
        let ok = fit(&[0.0], DMatrix::from_element(1, 1, 1.0));
        assert!(matches!(fid(&bad, &ok), Err(Error::IllFormedCovariance(_))));
    }

    #[test]
    fn dimension_mismatch() {
        let a = fit(&[0.0], DMatrix::identity(1, 1));
        let b = fit(&[0.0, 0.0], DMatrix::identity(2, 2));
        assert!(matches!(fid(&a, &b), Err(Error::DimensionMismatch { .. })));
    }
}
