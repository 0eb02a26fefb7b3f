use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Result, SuhmoError};

/// Eigenvalues more negative than this mean the input was not PSD.
const PSD_TOL: f64 = 1e-6;
/// Diagonal regularization added to sample covariances.
const COV_REG: f64 = 1e-6;

/// Mean and covariance of a feature population.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub n: usize,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of the feature vectors, with +1e-6·I
/// regularization on the covariance diagonal.
pub fn feature_stats(features: &[Vec<f64>]) -> Result<GaussianStats> {
    let n = features.len();
    if n < 2 {
        return Err(SuhmoError::Invalid(format!(
            "feature statistics need at least 2 items, got {n}"
        )));
    }
    let d = features[0].len();
    let mut mean = DVector::zeros(d);
    for f in features {
        if f.len() != d {
            return Err(SuhmoError::Invalid("inconsistent feature dimensions".into()));
        }
        mean += DVector::from_column_slice(f);
    }
    mean /= n as f64;
    let mut cov = DMatrix::zeros(d, d);
    for f in features {
        let c = DVector::from_column_slice(f) - &mean;
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov /= (n - 1) as f64;
    // syger fills the lower triangle; mirror it
    for i in 0..d {
        for j in i + 1..d {
            cov[(i, j)] = cov[(j, i)];
        }
    }
    for i in 0..d {
        cov[(i, i)] += COV_REG;
    }
    Ok(GaussianStats { mean, cov, n })
}

/// Symmetric PSD matrix square root via eigendecomposition. Small negative
/// eigenvalues (numerical noise) are clamped to zero; anything below −1e-6
/// is rejected as indefinite.
pub fn sqrtm_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    let mut vals = eig.eigenvalues;
    for v in vals.iter_mut() {
        if *v < -PSD_TOL {
            return Err(SuhmoError::Invalid(format!(
                "matrix is not PSD: eigenvalue {v}"
            )));
        }
        *v = v.max(0.0).sqrt();
    }
    let q = eig.eigenvectors;
    Ok(&q * DMatrix::from_diagonal(&vals) * q.transpose())
}

/// Fréchet distance between two Gaussians:
/// ‖μa − μb‖² + Tr(Σa + Σb − 2·(Σa Σb)^{1/2}), with the cross term computed
/// as sqrtm(Σa^{1/2} Σb Σa^{1/2}) for symmetry.
pub fn frechet(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(SuhmoError::Invalid(format!(
            "feature dimension mismatch: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let diff = &a.mean - &b.mean;
    let ra = sqrtm_spd(&a.cov)?;
    let inner = &ra * &b.cov * &ra;
    // symmetrize before the eigendecomposition to kill round-off asymmetry
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross = sqrtm_spd(&inner)?;
    let val = diff.norm_squared() + a.cov.trace() + b.cov.trace() - 2.0 * cross.trace();
    Ok(val)
}
