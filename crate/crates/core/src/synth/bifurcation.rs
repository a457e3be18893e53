//! Noisy networks driven through a fold or Hopf bifurcation at a known step.
//!
//! The control parameter rises linearly in the sweep index `τ`:
//! `p(τ) = (τ - τ*) / (τ* - 1)`, so `p(1) = -1` and `p(τ*) = 0`, capped at
//! `+0.3`. Each recorded sample integrates 100 Euler–Maruyama substeps of
//! `dt = 0.01` at the current `p`.
//!
//! * fold: `ẋ_i = -(x_i² + p) + c Σ_j A_ij (x_j - x_i)`, stable branch `√(-p)`.
//!   Past the fold the state escapes toward `-∞`; it is held at
//!   [`FOLD_FLOOR`] so the collapsed regime stays finite.
//! * Hopf: pairs `(x, y)` follow `ẋ = p x - ω y - x r²`, `ẏ = ω x + p y - y r²`
//!   with the same diffusive ring coupling applied per coordinate.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, StpcaError};
use crate::series::SeriesMatrix;

pub const FOLD_FLOOR: f64 = -5.0;
const P_MAX: f64 = 0.3;
const DT: f64 = 0.01;
const SUBSTEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BifurcationKind {
    Fold,
    Hopf,
}

impl std::str::FromStr for BifurcationKind {
    type Err = StpcaError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fold" => Ok(Self::Fold),
            "hopf" => Ok(Self::Hopf),
            other => Err(StpcaError::Parameter(format!(
                "unknown bifurcation kind '{other}'; expected 'fold' or 'hopf'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifNetConfig {
    pub kind: BifurcationKind,
    pub nodes: usize,
    pub tau_steps: usize,
    /// 1-based step at which `p` crosses zero.
    pub tau_star: usize,
    pub coupling: f64,
    /// Dynamical noise intensity (diffusion coefficient).
    pub noise: f64,
    /// Hopf rotation frequency.
    pub omega: f64,
    pub seed: u64,
}

impl BifNetConfig {
    pub fn fold() -> Self {
        Self {
            kind: BifurcationKind::Fold,
            nodes: 18,
            tau_steps: 300,
            tau_star: 200,
            coupling: 0.2,
            noise: 0.05,
            omega: 1.0,
            seed: 0,
        }
    }

    pub fn hopf() -> Self {
        Self {
            kind: BifurcationKind::Hopf,
            nodes: 16,
            tau_steps: 310,
            tau_star: 210,
            ..Self::fold()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(StpcaError::Parameter(format!(
                "network needs at least 2 nodes, got {}",
                self.nodes
            )));
        }
        if self.kind == BifurcationKind::Hopf && self.nodes % 2 != 0 {
            return Err(StpcaError::Parameter(format!(
                "Hopf network nodes come in (x, y) pairs; got {} nodes",
                self.nodes
            )));
        }
        if self.tau_star < 1 || self.tau_star > self.tau_steps {
            return Err(StpcaError::Parameter(format!(
                "tipping step {} outside 1..={}",
                self.tau_star, self.tau_steps
            )));
        }
        if self.tau_steps < 2 {
            return Err(StpcaError::Parameter("need at least 2 sweep steps".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(StpcaError::Parameter(format!("noise must be >= 0, got {}", self.noise)));
        }
        if !(self.coupling.is_finite() && self.omega.is_finite()) {
            return Err(StpcaError::Parameter("coupling and omega must be finite".into()));
        }
        Ok(())
    }

    /// Control parameter at 1-based step `tau`.
    pub fn parameter_at(&self, tau: usize) -> f64 {
        let slope = 1.0 / (self.tau_star.max(2) - 1) as f64;
        ((tau as f64 - self.tau_star as f64) * slope).min(P_MAX)
    }

    /// Number of ring sites: nodes for fold, node pairs for Hopf.
    fn sites(&self) -> usize {
        match self.kind {
            BifurcationKind::Fold => self.nodes,
            BifurcationKind::Hopf => self.nodes / 2,
        }
    }

    /// Deterministic drift at parameter `p`.
    pub fn drift(&self, s: &[f64], p: f64, out: &mut [f64]) {
        let k = self.sites();
        let c = self.coupling;
        match self.kind {
            BifurcationKind::Fold => {
                for i in 0..k {
                    let left = s[(i + k - 1) % k];
                    let right = s[(i + 1) % k];
                    out[i] = -(s[i] * s[i] + p) + c * (left + right - 2.0 * s[i]);
                }
            }
            BifurcationKind::Hopf => {
                for i in 0..k {
                    let (x, y) = (s[2 * i], s[2 * i + 1]);
                    let l = (i + k - 1) % k;
                    let r = (i + 1) % k;
                    let r2 = x * x + y * y;
                    out[2 * i] = p * x - self.omega * y - x * r2
                        + c * (s[2 * l] + s[2 * r] - 2.0 * x);
                    out[2 * i + 1] = self.omega * x + p * y - y * r2
                        + c * (s[2 * l + 1] + s[2 * r + 1] - 2.0 * y);
                }
            }
        }
    }

    /// Stable equilibrium for `p < 0`.
    pub fn equilibrium(&self, p: f64) -> Option<Vec<f64>> {
        if p >= 0.0 {
            return None;
        }
        Some(match self.kind {
            BifurcationKind::Fold => vec![(-p).sqrt(); self.nodes],
            BifurcationKind::Hopf => vec![0.0; self.nodes],
        })
    }
}

/// `nodes × tau_steps` trajectory plus the tipping step (`tau_star`, 1-based;
/// column `tau_star - 1`).
pub fn simulate_bifurcation_network(cfg: &BifNetConfig) -> Result<(SeriesMatrix, usize)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = cfg
        .equilibrium(cfg.parameter_at(1))
        .unwrap_or_else(|| vec![0.0; cfg.nodes]);
    let mut drift = vec![0.0; cfg.nodes];
    let diffusion = cfg.noise * DT.sqrt();
    let mut values = DMatrix::zeros(cfg.nodes, cfg.tau_steps);
    for tau in 1..=cfg.tau_steps {
        let p = cfg.parameter_at(tau);
        for _ in 0..SUBSTEPS {
            cfg.drift(&state, p, &mut drift);
            for (s, d) in state.iter_mut().zip(&drift) {
                let xi: f64 = StandardNormal.sample(&mut rng);
                *s += d * DT + diffusion * xi;
                if cfg.kind == BifurcationKind::Fold && *s < FOLD_FLOOR {
                    *s = FOLD_FLOOR;
                }
            }
        }
        values.set_column(tau - 1, &nalgebra::DVector::from_column_slice(&state));
    }
    let names = (0..cfg.nodes).map(|i| format!("node{}", i + 1)).collect();
    let times = (1..=cfg.tau_steps).map(|t| t as f64).collect();
    let series = SeriesMatrix::new(values)?
        .with_variable_names(names)?
        .with_time_index(times)?;
    Ok((series, cfg.tau_star))
}
