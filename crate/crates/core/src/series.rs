//! Observed multivariate series and the embedding configuration.

use nalgebra::DMatrix;

use crate::error::{Result, StpcaError};

/// `n` variables (rows) observed at `m` time points (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesMatrix {
    values: DMatrix<f64>,
    variable_names: Option<Vec<String>>,
    time_index: Option<Vec<f64>>,
}

impl SeriesMatrix {
    /// Validates `values`: finite entries, `n >= 1`, `m >= 2`.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(StpcaError::InsufficientSamples {
                needed: 1,
                got: 0,
            });
        }
        if values.ncols() < 2 {
            return Err(StpcaError::InsufficientSamples {
                needed: 2,
                got: values.ncols(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(StpcaError::InvalidData(format!(
                "non-finite value at row {row}, column {col}"
            )));
        }
        Ok(Self {
            values,
            variable_names: None,
            time_index: None,
        })
    }

    /// Builds from row-major nested vectors (one inner vector per variable).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(StpcaError::Shape(format!(
                "row {i} has {} values, expected {m}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn with_variable_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n() {
            return Err(StpcaError::Shape(format!(
                "{} variable names for {} rows",
                names.len(),
                self.n()
            )));
        }
        self.variable_names = Some(names);
        Ok(self)
    }

    pub fn with_time_index(mut self, times: Vec<f64>) -> Result<Self> {
        if times.len() != self.m() {
            return Err(StpcaError::Shape(format!(
                "{} timestamps for {} columns",
                times.len(),
                self.m()
            )));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(StpcaError::InvalidData(
                "time index must be finite and strictly increasing".into(),
            ));
        }
        self.time_index = Some(times);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn variable_names(&self) -> Option<&[String]> {
        self.variable_names.as_deref()
    }

    pub fn time_index(&self) -> Option<&[f64]> {
        self.time_index.as_deref()
    }

    /// Columns `[start, start + width)`, carrying names and timestamps along.
    pub fn window(&self, start: usize, width: usize) -> Result<Self> {
        if start + width > self.m() {
            return Err(StpcaError::Parameter(format!(
                "window [{start}, {}) exceeds {} columns",
                start + width,
                self.m()
            )));
        }
        let mut out = Self::new(self.values.columns(start, width).into_owned())?;
        out.variable_names = self.variable_names.clone();
        out.time_index = self
            .time_index
            .as_ref()
            .map(|t| t[start..start + width].to_vec());
        Ok(out)
    }

    /// Same metadata, new values of identical shape. Used by transforms.
    pub(crate) fn map_values(&self, values: DMatrix<f64>) -> Self {
        debug_assert_eq!(values.shape(), self.values.shape());
        Self {
            values,
            variable_names: self.variable_names.clone(),
            time_index: self.time_index.clone(),
        }
    }
}

/// Embedding dimension `L`, regularization weight `lambda`, and preprocessing switches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConfig {
    pub embedding_dim: usize,
    pub lambda: f64,
    pub center_rows: bool,
    pub scale_rows: bool,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            embedding_dim: 20,
            lambda: 0.95,
            center_rows: true,
            scale_rows: false,
        }
    }
}

impl EmbeddingConfig {
    pub fn new(embedding_dim: usize, lambda: f64) -> Self {
        Self {
            embedding_dim,
            lambda,
            ..Self::default()
        }
    }

    /// Checks `2 <= L <= m` and `0 <= lambda <= 1`.
    pub fn validate(&self, m: usize) -> Result<()> {
        if self.embedding_dim < 2 {
            return Err(StpcaError::Parameter(format!(
                "embedding dimension must be at least 2, got {}",
                self.embedding_dim
            )));
        }
        if self.embedding_dim > m {
            return Err(StpcaError::Parameter(format!(
                "embedding dimension {} exceeds series length {m}",
                self.embedding_dim
            )));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(StpcaError::Parameter(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}
