use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Result, StpcaError};
use crate::series::SeriesMatrix;

/// Additive i.i.d. Gaussian observation noise with SD `intensity`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub intensity: f64,
    pub seed: u64,
}

pub fn add_observation_noise(x: &SeriesMatrix, spec: &NoiseSpec) -> Result<SeriesMatrix> {
    if !(spec.intensity >= 0.0 && spec.intensity.is_finite()) {
        return Err(StpcaError::Parameter(format!(
            "noise intensity must be finite and >= 0, got {}",
            spec.intensity
        )));
    }
    if spec.intensity == 0.0 {
        return Ok(x.clone());
    }
    let normal = Normal::new(0.0, spec.intensity)
        .map_err(|e| StpcaError::Parameter(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut values = x.values().clone();
    // Column-major order, so the stream is tied to (time, variable) positions.
    values.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    Ok(x.map_values(values))
}
