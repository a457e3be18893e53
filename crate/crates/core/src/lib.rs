//! Spatial-temporal PCA (stPCA).
//!
//! Reduces an `n`-variable time series to a single latent series whose Hankel
//! (delay-embedding) matrix best trades off projected variance against exact
//! delay structure, then tracks the latent series' windowed fluctuation to flag
//! approaching critical transitions.

pub mod analysis;
pub mod cli;
pub mod decision;
pub mod embedding;
pub mod eigen;
pub mod error;
pub mod fit;
pub mod io;
pub mod operator;
pub mod series;
pub mod synth;

pub use error::{Result, StpcaError};
pub use fit::{fit_stpca, StpcaResult};
pub use series::{EmbeddingConfig, SeriesMatrix};
