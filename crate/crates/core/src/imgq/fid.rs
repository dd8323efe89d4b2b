use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Sample mean and unbiased covariance of a feature set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub sample_count: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Builds statistics directly, checking shape, symmetry and finiteness.
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>, sample_count: usize) -> Result<Self> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(Error::invalid("covariance does not match mean dimension"));
        }
        if (&covariance - covariance.transpose()).abs().max() > 1e-8 {
            return Err(Error::invalid("covariance is not symmetric"));
        }
        let stats = GaussianStats {
            mean,
            covariance,
            sample_count,
        };
        stats.check_finite()?;
        Ok(stats)
    }

    fn check_finite(&self) -> Result<()> {
        if self.mean.iter().chain(self.covariance.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite Gaussian statistics"));
        }
        Ok(())
    }
}

/// Mean and unbiased covariance of `n` feature rows of equal length.
pub fn gaussian_stats<R: AsRef<[f64]>>(features: &[R]) -> Result<GaussianStats> {
    let n = features.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { needed: 2, got: n });
    }
    let d = features[0].as_ref().len();
    if d == 0 || features.iter().any(|r| r.as_ref().len() != d) {
        return Err(Error::invalid("feature rows must share a positive length"));
    }
    let mut mean = DVector::zeros(d);
    for r in features {
        mean += DVector::from_column_slice(r.as_ref());
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for r in features {
        let c = DVector::from_column_slice(r.as_ref()) - &mean;
        cov.ger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1) as f64;
    // exact symmetry, regardless of accumulation order
    let cov = (&cov + cov.transpose()) * 0.5;
    let stats = GaussianStats {
        mean,
        covariance: cov,
        sample_count: n,
    };
    stats.check_finite()?;
    Ok(stats)
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Squared Wasserstein-2 distance between two Gaussians:
/// `|μp - μq|² + tr(Σp + Σq - 2 (Σp Σq)^½)`.
///
/// The cross term is evaluated as `tr((Σp^½ Σq Σp^½)^½)`, whose argument is
/// symmetric positive semi-definite; tiny negative eigenvalues are clamped.
pub fn frechet_distance(p: &GaussianStats, q: &GaussianStats) -> Result<f64> {
    if p.dim() != q.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            p.dim(),
            q.dim()
        )));
    }
    p.check_finite()?;
    q.check_finite()?;
    let diff = &p.mean - &q.mean;
    let root_p = psd_sqrt(&p.covariance);
    let inner = &root_p * &q.covariance * &root_p;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|v| v.max(0.0).sqrt())
        .sum();
    let d = diff.norm_squared() + p.covariance.trace() + q.covariance.trace() - 2.0 * cross;
    Ok(d.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_points() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]];
        let s = gaussian_stats(&pts).unwrap();
        assert_eq!(s.mean.as_slice(), &[1.0, 1.0]);
        assert!((s.covariance[(0, 0)] - 4.0 / 3.0).abs() < 1e-15);
        assert!((s.covariance[(1, 1)] - 4.0 / 3.0).abs() < 1e-15);
        assert_eq!(s.covariance[(0, 1)], 0.0);
    }

    #[test]
    fn identical_rows_have_zero_covariance() {
        let rows = vec![vec![1.5, -2.0, 3.0]; 6];
        let s = gaussian_stats(&rows).unwrap();
        assert!(s.covariance.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            gaussian_stats(&[[1.0, 2.0]]),
            Err(Error::InsufficientSamples { needed: 2, got: 1 })
        ));
    }

    #[test]
    fn one_dimensional_closed_form() {
        let p = GaussianStats::new(DVector::from_element(1, 0.0), DMatrix::from_element(1, 1, 1.0), 2).unwrap();
        let q = GaussianStats::new(DVector::from_element(1, 2.0), DMatrix::from_element(1, 1, 1.0), 2).unwrap();
        assert!((frechet_distance(&p, &q).unwrap() - 4.0).abs() < 1e-12);
        assert!(frechet_distance(&p, &p).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mismatch_and_non_finite() {
        let p = GaussianStats::new(DVector::zeros(2), DMatrix::identity(2, 2), 2).unwrap();
        let q = GaussianStats::new(DVector::zeros(3), DMatrix::identity(3, 3), 2).unwrap();
        assert!(frechet_distance(&p, &q).is_err());
        let mut bad = p.clone();
        bad.mean[0] = f64::NAN;
        assert!(matches!(
            frechet_distance(&p, &bad),
            Err(Error::InvalidArgument(_))
        ));
    }
}
