//! Hankel matrices, projection onto them, and recovery of the latent series.

use nalgebra::DMatrix;

use crate::error::{Result, StpcaError};

/// `L × m` matrix, exact Hankel when built by [`hankel_from_series`] or [`nearest_hankel`].
#[derive(Debug, Clone, PartialEq)]
pub struct HankelMatrix {
    values: DMatrix<f64>,
}

impl HankelMatrix {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn embedding_dim(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    /// Whether `values[i][j] == values[i+1][j-1]` holds exactly.
    pub fn is_exact(&self) -> bool {
        is_hankel(&self.values, 0.0)
    }
}

/// Latent series `z` of length `m + L - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentSeries {
    pub values: Vec<f64>,
    pub source_window: Option<usize>,
}

impl LatentSeries {
    pub fn new(values: Vec<f64>) -> Self {
        Self {
            values,
            source_window: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn is_hankel(z: &DMatrix<f64>, tol: f64) -> bool {
    let (l, m) = z.shape();
    (0..l.saturating_sub(1))
        .all(|i| (1..m).all(|j| (z[(i, j)] - z[(i + 1, j - 1)]).abs() <= tol))
}

/// Row `i`, column `j` holds `z[i + j]`.
pub fn hankel_from_series(z: &[f64], embedding_dim: usize) -> Result<HankelMatrix> {
    if embedding_dim == 0 || embedding_dim > z.len() {
        return Err(StpcaError::Shape(format!(
            "embedding dimension {embedding_dim} incompatible with series of length {}",
            z.len()
        )));
    }
    let m = z.len() - embedding_dim + 1;
    Ok(HankelMatrix {
        values: DMatrix::from_fn(embedding_dim, m, |i, j| z[i + j]),
    })
}

/// Mean of each anti-diagonal `i + j = k`, for `k = 0..L+m-1`.
fn anti_diagonal_means(z: &DMatrix<f64>) -> Vec<f64> {
    let (l, m) = z.shape();
    if l == 0 || m == 0 {
        return Vec::new();
    }
    let mut sums = vec![0.0; l + m - 1];
    let mut counts = vec![0usize; l + m - 1];
    for j in 0..m {
        for i in 0..l {
            sums[i + j] += z[(i, j)];
            counts[i + j] += 1;
        }
    }
    sums.iter().zip(&counts).map(|(s, &c)| s / c as f64).collect()
}

/// Frobenius-nearest Hankel matrix: each anti-diagonal replaced by its mean.
pub fn nearest_hankel(z: &DMatrix<f64>) -> HankelMatrix {
    let means = anti_diagonal_means(z);
    HankelMatrix {
        values: DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| means[i + j]),
    }
}

/// Latent series read off `Z` by anti-diagonal averaging.
pub fn extract_latent(z: &DMatrix<f64>) -> LatentSeries {
    LatentSeries::new(anti_diagonal_means(z))
}
