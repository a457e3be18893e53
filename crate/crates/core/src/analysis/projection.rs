//! Singular-value projections of a Hankel matrix and the PCA baseline.

use nalgebra::{DMatrix, SVD};

use crate::embedding::HankelMatrix;
use crate::error::{Result, StpcaError};
use crate::fit::center_series;
use crate::series::{EmbeddingConfig, SeriesMatrix};

/// Top-`r` singular triplets of a matrix.
///
/// `components` holds one time series per column: right singular vectors for
/// [`hankel_svd_projections`], principal component scores for [`pca_baseline`].
/// `variance_proportions` covers the full spectrum (so it sums to one) while
/// `singular_values`, `left` and `components` are truncated to `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    pub singular_values: Vec<f64>,
    /// Left singular vectors, one per column (`rows × r`).
    pub left: DMatrix<f64>,
    /// `m × r`.
    pub components: DMatrix<f64>,
    pub variance_proportions: Vec<f64>,
}

impl ProjectionSet {
    /// Component `k` as a plain vector.
    pub fn component(&self, k: usize) -> Vec<f64> {
        self.components.column(k).iter().copied().collect()
    }
}

struct Triplets {
    values: Vec<f64>,
    left: DMatrix<f64>,
    right: DMatrix<f64>,
    proportions: Vec<f64>,
}

/// Sorted top-`r` SVD with a deterministic sign: each left vector's entry sum
/// is positive (largest-magnitude entry when the sum vanishes).
fn sorted_svd(a: &DMatrix<f64>, r: usize) -> Result<Triplets> {
    let k = a.nrows().min(a.ncols());
    if r == 0 || r > k {
        return Err(StpcaError::Parameter(format!(
            "number of components must lie in 1..={k}, got {r}"
        )));
    }
    let svd = SVD::new(a.clone(), true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V'");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[y].total_cmp(&svd.singular_values[x]));

    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let proportions = order
        .iter()
        .map(|&i| {
            if total > 0.0 {
                svd.singular_values[i].powi(2) / total
            } else {
                0.0
            }
        })
        .collect();

    let mut left = DMatrix::zeros(a.nrows(), r);
    let mut right = DMatrix::zeros(a.ncols(), r);
    let mut values = Vec::with_capacity(r);
    for (c, &i) in order.iter().take(r).enumerate() {
        let ucol = u.column(i);
        let sum: f64 = ucol.iter().sum();
        let sign = if sum.abs() > 1e-10 {
            sum.signum()
        } else {
            let peak = ucol.iter().copied().fold(0.0f64, |acc, x| {
                if x.abs() > acc.abs() {
                    x
                } else {
                    acc
                }
            });
            if peak < 0.0 {
                -1.0
            } else {
                1.0
            }
        };
        left.set_column(c, &(ucol * sign));
        right.set_column(c, &(v_t.row(i).transpose() * sign));
        values.push(svd.singular_values[i]);
    }
    Ok(Triplets {
        values,
        left,
        right,
        proportions,
    })
}

/// SVD `Z = U Σ R` of an `L × m` Hankel matrix; components are the first `r`
/// right singular vectors as length-`m` series.
pub fn hankel_svd_projections(z: &HankelMatrix, r: usize) -> Result<ProjectionSet> {
    let t = sorted_svd(z.values(), r)?;
    Ok(ProjectionSet {
        singular_values: t.values,
        left: t.left,
        components: t.right,
        variance_proportions: t.proportions,
    })
}

/// Ordinary PCA of the row-centered series: `left` holds the orthonormal
/// loadings (`n × r`) and `components` the score series `σ_k R_k` (`m × r`).
pub fn pca_baseline(x: &SeriesMatrix, r: usize) -> Result<ProjectionSet> {
    let cfg = EmbeddingConfig {
        scale_rows: false,
        center_rows: true,
        ..EmbeddingConfig::default()
    };
    let centered = center_series(x, &cfg)?;
    let t = sorted_svd(centered.values(), r)?;
    let mut scores = t.right;
    for (k, s) in t.values.iter().enumerate() {
        scores.column_mut(k).scale_mut(*s);
    }
    Ok(ProjectionSet {
        singular_values: t.values,
        left: t.left,
        components: scores,
        variance_proportions: t.proportions,
    })
}
