//! Sliding-window fluctuation of the latent series and tipping-point flags.

use rayon::prelude::*;

use crate::eigen::SolverOptions;
use crate::error::{Result, StpcaError};
use crate::fit::fit_stpca_with;
use crate::series::{EmbeddingConfig, SeriesMatrix};

/// `Fl^z` per window, in window-start order.
#[derive(Debug, Clone, PartialEq)]
pub struct FluctuationSweep {
    /// Window start column, or its timestamp when the series carries one.
    pub positions: Vec<f64>,
    pub fl: Vec<f64>,
    pub window_width: usize,
    pub stride: usize,
}

impl FluctuationSweep {
    pub fn len(&self) -> usize {
        self.fl.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fl.is_empty()
    }

    /// Index of the first window whose column range covers `column`.
    pub fn first_window_containing(&self, column: usize) -> Option<usize> {
        let first = (column + 1).saturating_sub(self.window_width).div_ceil(self.stride);
        (first < self.len() && first * self.stride <= column).then_some(first)
    }
}

/// Sample standard deviation (divisor `len - 1`); zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let len = values.len();
    if len < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / len as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1) as f64).sqrt()
}

pub fn window_count(m: usize, width: usize, stride: usize) -> usize {
    if width == 0 || width > m || stride == 0 {
        0
    } else {
        (m - width) / stride + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub window_width: usize,
    pub stride: usize,
    /// Fit windows on the current rayon pool; output is identical either way.
    pub parallel: bool,
    pub solver: SolverOptions,
}

impl SweepOptions {
    pub fn new(window_width: usize, stride: usize) -> Self {
        Self {
            window_width,
            stride,
            parallel: false,
            solver: SolverOptions::default(),
        }
    }
}

/// Sequential sweep: one stPCA fit per window, re-centered within the window.
pub fn fluctuation_sweep(
    x: &SeriesMatrix,
    cfg: &EmbeddingConfig,
    window_width: usize,
    stride: usize,
) -> Result<FluctuationSweep> {
    fluctuation_sweep_with(x, cfg, &SweepOptions::new(window_width, stride))
}

pub fn fluctuation_sweep_with(
    x: &SeriesMatrix,
    cfg: &EmbeddingConfig,
    opts: &SweepOptions,
) -> Result<FluctuationSweep> {
    let (width, stride) = (opts.window_width, opts.stride);
    if stride == 0 {
        return Err(StpcaError::Parameter("stride must be at least 1".into()));
    }
    if width > x.m() {
        return Err(StpcaError::Parameter(format!(
            "window width {width} exceeds series length {}",
            x.m()
        )));
    }
    if width < cfg.embedding_dim {
        return Err(StpcaError::Parameter(format!(
            "window width {width} is below the embedding dimension {}",
            cfg.embedding_dim
        )));
    }
    cfg.validate(width)?;
    let count = window_count(x.m(), width, stride);
    let fit_window = |k: usize| -> Result<f64> {
        let window = x.window(k * stride, width)?;
        let fit = fit_stpca_with(&window, cfg, &opts.solver)?;
        Ok(sample_sd(&fit.z_extended.values))
    };
    let fl: Vec<f64> = if opts.parallel {
        (0..count).into_par_iter().map(fit_window).collect::<Result<_>>()?
    } else {
        (0..count).map(fit_window).collect::<Result<_>>()?
    };
    let positions = (0..count)
        .map(|k| {
            let start = k * stride;
            x.time_index().map_or(start as f64, |t| t[start])
        })
        .collect();
    Ok(FluctuationSweep {
        positions,
        fl,
        window_width: width,
        stride,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DetectionRule {
    /// Flag windows whose fluctuation exceeds the sweep mean.
    MeanExceed,
    /// Flag windows exceeding `factor` × median of the first `baseline_len` windows.
    FoldChange { factor: f64, baseline_len: usize },
}

impl Default for DetectionRule {
    fn default() -> Self {
        DetectionRule::MeanExceed
    }
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 0 {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

/// Flagged window indices (0-based, ascending).
pub fn detect_tipping(sweep: &FluctuationSweep, rule: DetectionRule) -> Result<Vec<usize>> {
    flag_windows(&sweep.fl, rule)
}

/// [`detect_tipping`] on bare fluctuation values.
pub fn flag_windows(fl: &[f64], rule: DetectionRule) -> Result<Vec<usize>> {
    if fl.is_empty() {
        return Err(StpcaError::Parameter("fluctuation sweep is empty".into()));
    }
    let threshold = match rule {
        DetectionRule::MeanExceed => fl.iter().sum::<f64>() / fl.len() as f64,
        DetectionRule::FoldChange {
            factor,
            baseline_len,
        } => {
            if baseline_len == 0 || baseline_len >= fl.len() {
                return Err(StpcaError::Parameter(format!(
                    "baseline length must lie in 1..{}, got {baseline_len}",
                    fl.len()
                )));
            }
            if !(factor > 0.0) {
                return Err(StpcaError::Parameter(format!(
                    "fold-change factor must be positive, got {factor}"
                )));
            }
            factor * median(&fl[..baseline_len])
        }
    };
    Ok(fl
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(k, _)| k)
        .collect())
}
