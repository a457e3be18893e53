//! Curve comparison, singular-value projections, and fluctuation sweeps.

pub mod frechet;
pub mod projection;
pub mod sweep;

pub use frechet::{discrete_frechet, pcfd, Curve};
pub use projection::{hankel_svd_projections, pca_baseline, ProjectionSet};
pub use sweep::{
    detect_tipping, flag_windows, fluctuation_sweep, fluctuation_sweep_with, sample_sd, DetectionRule,
    FluctuationSweep, SweepOptions,
};
