//! Seeded generators for desk-scale experiments.

pub mod bifurcation;
pub mod lorenz;
pub mod noise;

pub use bifurcation::{simulate_bifurcation_network, BifNetConfig, BifurcationKind};
pub use lorenz::{simulate_coupled_lorenz, LorenzConfig};
pub use noise::{add_observation_noise, NoiseSpec};
