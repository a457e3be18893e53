//! The stPCA fit: center, build `H(X)`, take its dominant eigenpair, reshape into `W`.

use nalgebra::DMatrix;

use crate::eigen::{dominant_eigenpair_with, fix_sign, EigenMethod, SolverOptions};
use crate::embedding::{extract_latent, nearest_hankel, LatentSeries};
use crate::error::{Result, StpcaError};
use crate::operator::{gram_blocks, BlockTridiagOperator};
use crate::series::{EmbeddingConfig, SeriesMatrix};

/// Solver diagnostics carried alongside the fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub residual: f64,
    pub method: EigenMethod,
    pub second_eigenvalue: Option<f64>,
    /// Top eigenvalue repeated; `W` is one of several optimal transforms.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StpcaResult {
    /// `L × n`; row `i` is `W_i`. Unit Frobenius norm.
    pub w: DMatrix<f64>,
    pub alpha: f64,
    /// `L × m`, equal to `W · X̃`.
    pub z: DMatrix<f64>,
    pub z_extended: LatentSeries,
    pub embedding_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diagnostics: FitDiagnostics,
}

impl StpcaResult {
    /// `W` flattened row-wise, i.e. the eigenvector `V`.
    pub fn flattened_w(&self) -> Vec<f64> {
        self.w.transpose().as_slice().to_vec()
    }
}

/// Removes each row's mean and optionally scales rows to unit sample SD.
/// Constant rows become exactly zero.
pub fn center_series(x: &SeriesMatrix, cfg: &EmbeddingConfig) -> Result<SeriesMatrix> {
    let src = x.values();
    if src.iter().any(|v| !v.is_finite()) {
        return Err(StpcaError::InvalidData("non-finite value in series".into()));
    }
    let (n, m) = src.shape();
    if m < 2 {
        return Err(StpcaError::InsufficientSamples { needed: 2, got: m });
    }
    let mut out = src.clone();
    for i in 0..n {
        let mut row = out.row_mut(i);
        let first = row[0];
        if row.iter().all(|&v| v == first) {
            if cfg.center_rows || cfg.scale_rows {
                row.fill(0.0);
            }
            continue;
        }
        let mean = row.iter().sum::<f64>() / m as f64;
        if cfg.center_rows {
            row.iter_mut().for_each(|v| *v -= mean);
        }
        if cfg.scale_rows {
            let centre = if cfg.center_rows { 0.0 } else { mean };
            let var = row.iter().map(|v| (v - centre).powi(2)).sum::<f64>() / (m - 1) as f64;
            let sd = var.sqrt();
            if sd > 0.0 {
                row.iter_mut().for_each(|v| *v /= sd);
            }
        }
    }
    Ok(x.map_values(out))
}

pub fn fit_stpca(x: &SeriesMatrix, cfg: &EmbeddingConfig) -> Result<StpcaResult> {
    fit_stpca_with(x, cfg, &SolverOptions::default())
}

pub fn fit_stpca_with(
    x: &SeriesMatrix,
    cfg: &EmbeddingConfig,
    solver: &SolverOptions,
) -> Result<StpcaResult> {
    cfg.validate(x.m())?;
    let centered = center_series(x, cfg)?;
    let l = cfg.embedding_dim;
    let n = x.n();
    let op = BlockTridiagOperator::new(gram_blocks(&centered)?, cfg.lambda, l)?;
    let pair = dominant_eigenpair_with(&op, solver)?;

    let mut v = pair.vector;
    fix_sign(&mut v);
    let w = DMatrix::from_row_slice(l, n, &v);
    let z = &w * centered.values();
    let z_extended = extract_latent(&z);
    let embedding_error = embedding_error(&z);
    Ok(StpcaResult {
        w,
        alpha: pair.alpha,
        z,
        z_extended,
        embedding_error,
        iterations: pair.iterations,
        converged: pair.converged,
        diagnostics: FitDiagnostics {
            residual: pair.residual,
            method: pair.method,
            second_eigenvalue: pair.second,
            degenerate: pair.degenerate,
        },
    })
}

/// `-(1-λ) Σ |W_i X|² + λ Σ_{i<L} |W_i P - W_{i+1} Q|²` for a unit-Frobenius `W`
/// and an already centered `X`.
pub fn objective_value(w: &DMatrix<f64>, x: &SeriesMatrix, lambda: f64) -> Result<f64> {
    if w.ncols() != x.n() {
        return Err(StpcaError::Shape(format!(
            "W has {} columns but the series has {} variables",
            w.ncols(),
            x.n()
        )));
    }
    let fro = w.norm();
    if (fro - 1.0).abs() > 1e-8 {
        return Err(StpcaError::Constraint(format!(
            "W must have unit Frobenius norm, got {fro}"
        )));
    }
    let z = w * x.values();
    let (l, m) = z.shape();
    let variance: f64 = z.iter().map(|v| v * v).sum();
    let mut mismatch = 0.0;
    for i in 0..l.saturating_sub(1) {
        for j in 0..m - 1 {
            mismatch += (z[(i, j + 1)] - z[(i + 1, j)]).powi(2);
        }
    }
    Ok(-(1.0 - lambda) * variance + lambda * mismatch)
}

/// `‖Z − Ẑ‖_F` with `Ẑ` the nearest Hankel matrix.
pub fn embedding_error(z: &DMatrix<f64>) -> f64 {
    (z - nearest_hankel(z).values()).norm()
}
