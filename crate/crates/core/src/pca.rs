//! Principal component analysis over flat displacement vectors.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Leading principal directions of a sample set.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaBasis {
    /// `K × D`, orthonormal rows, strongest direction first.
    components: DMatrix<f64>,
    mean: DVector<f64>,
    explained_variance_ratio: Vec<f64>,
}

impl PcaBasis {
    pub fn from_parts(components: DMatrix<f64>, mean: DVector<f64>, explained_variance_ratio: Vec<f64>) -> Result<Self> {
        if components.ncols() != mean.len() || components.nrows() != explained_variance_ratio.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("K x {} components with K ratios", mean.len()),
                got: format!(
                    "{} x {} components, {} ratios",
                    components.nrows(),
                    components.ncols(),
                    explained_variance_ratio.len()
                ),
            });
        }
        Ok(Self {
            components,
            mean,
            explained_variance_ratio,
        })
    }

    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn explained_variance_ratio(&self) -> &[f64] {
        &self.explained_variance_ratio
    }

    pub fn cumulative_variance(&self) -> f64 {
        self.explained_variance_ratio.iter().sum()
    }

    /// Number of retained components.
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let centred = DVector::from_column_slice(x) - &self.mean;
        (&self.components * centred).iter().copied().collect()
    }

    pub fn reconstruct(&self, coeffs: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(coeffs);
        (self.components.transpose() * c + &self.mean).iter().copied().collect()
    }
}

/// Fits the smallest basis whose cumulative explained variance reaches
/// `variance_target`.
pub fn pca_fit(samples: &[Vec<f64>], variance_target: f64) -> Result<PcaBasis> {
    if samples.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "PCA needs at least 2 samples, got {}",
            samples.len()
        )));
    }
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "variance target must lie in (0, 1], got {variance_target}"
        )));
    }
    let d = samples[0].len();
    if d == 0 || samples.iter().any(|s| s.len() != d) {
        return Err(Error::ShapeMismatch {
            expected: format!("{d} values per sample"),
            got: "ragged samples".into(),
        });
    }
    if samples.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("PCA samples"));
    }

    let n = samples.len();
    let data = DMatrix::from_fn(n, d, |i, j| samples[i][j]);
    let mean = data.row_mean().transpose();
    let mut centred = data;
    for mut row in centred.row_iter_mut() {
        row -= mean.transpose();
    }
    let cov = centred.tr_mul(&centred) / (n as f64 - 1.0);

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = values.iter().sum();
    if total <= 0.0 {
        return Err(Error::Degenerate("samples have zero variance"));
    }

    let tolerance = 1e-12;
    let mut k = 0;
    let mut cumulative = 0.0;
    for v in &values {
        k += 1;
        cumulative += v / total;
        if cumulative >= variance_target - tolerance {
            break;
        }
    }

    let mut components = DMatrix::zeros(k, d);
    for (row, &idx) in order.iter().take(k).enumerate() {
        let mut v = eig.eigenvectors.column(idx).into_owned();
        // Deterministic sign: largest-magnitude entry positive.
        let imax = v.iamax();
        if v[imax] < 0.0 {
            v = -v;
        }
        components.set_row(row, &v.transpose());
    }
    let ratios = values.iter().take(k).map(|v| v / total).collect();
    PcaBasis::from_parts(components, mean, ratios)
}
