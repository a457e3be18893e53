//! Ring-coupled Lorenz oscillators integrated with fixed-step RK4.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, StpcaError};
use crate::series::SeriesMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorenzConfig {
    /// State dimension; `n / 3` oscillators.
    pub n: usize,
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
    /// Gain on `x_next - x_this` in each oscillator's `ẋ` equation.
    pub coupling: f64,
    pub dt: f64,
    pub sample_every: usize,
    pub transient_steps: usize,
    pub m: usize,
    pub seed: u64,
}

impl Default for LorenzConfig {
    fn default() -> Self {
        Self {
            n: 3,
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
            coupling: 1.0,
            dt: 0.01,
            sample_every: 5,
            transient_steps: 2000,
            m: 50,
            seed: 0,
        }
    }
}

impl LorenzConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n % 3 != 0 {
            return Err(StpcaError::Parameter(format!(
                "Lorenz dimension must be a positive multiple of 3, got {}",
                self.n
            )));
        }
        if !(self.dt > 0.0 && self.dt <= 0.02) {
            return Err(StpcaError::Parameter(format!(
                "time step must lie in (0, 0.02], got {}",
                self.dt
            )));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(StpcaError::Parameter(format!(
                "coupling must be finite and non-negative, got {}",
                self.coupling
            )));
        }
        if self.sample_every == 0 {
            return Err(StpcaError::Parameter("sample_every must be at least 1".into()));
        }
        if self.m < 2 {
            return Err(StpcaError::Parameter(format!(
                "need at least 2 samples, got {}",
                self.m
            )));
        }
        if ![self.sigma, self.rho, self.beta].iter().all(|v| v.is_finite()) {
            return Err(StpcaError::Parameter("Lorenz parameters must be finite".into()));
        }
        Ok(())
    }

    fn deriv(&self, s: &[f64], out: &mut [f64]) {
        let k = self.n / 3;
        for o in 0..k {
            let (x, y, z) = (s[3 * o], s[3 * o + 1], s[3 * o + 2]);
            let x_next = s[3 * ((o + 1) % k)];
            out[3 * o] = self.sigma * (y - x) + self.coupling * (x_next - x);
            out[3 * o + 1] = x * (self.rho - z) - y;
            out[3 * o + 2] = x * y - self.beta * z;
        }
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, f: impl Fn(&[f64], &mut [f64]), s: &mut [f64], dt: f64) {
        f(s, &mut self.k1);
        for i in 0..s.len() {
            self.tmp[i] = s[i] + 0.5 * dt * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..s.len() {
            self.tmp[i] = s[i] + 0.5 * dt * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..s.len() {
            self.tmp[i] = s[i] + dt * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..s.len() {
            s[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// `n × m` trajectory; rows ordered `x1, y1, z1, x2, ...`. The seed fixes the
/// initial conditions.
pub fn simulate_coupled_lorenz(cfg: &LorenzConfig) -> Result<SeriesMatrix> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state: Vec<f64> = (0..cfg.n)
        .map(|i| match i % 3 {
            2 => rng.random_range(10.0..40.0),
            _ => rng.random_range(-10.0..10.0),
        })
        .collect();
    let mut rk = Rk4::new(cfg.n);
    let f = |s: &[f64], out: &mut [f64]| cfg.deriv(s, out);
    for _ in 0..cfg.transient_steps {
        rk.step(f, &mut state, cfg.dt);
    }
    let mut values = DMatrix::zeros(cfg.n, cfg.m);
    for j in 0..cfg.m {
        if j > 0 {
            for _ in 0..cfg.sample_every {
                rk.step(f, &mut state, cfg.dt);
            }
        }
        values.set_column(j, &nalgebra::DVector::from_column_slice(&state));
    }
    let names = (0..cfg.n)
        .map(|i| format!("{}{}", ["x", "y", "z"][i % 3], i / 3 + 1))
        .collect();
    SeriesMatrix::new(values)
        .map_err(|_| StpcaError::InvalidData("Lorenz integration diverged".into()))?
        .with_variable_names(names)
}
