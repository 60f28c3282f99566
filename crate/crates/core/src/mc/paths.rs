//! Euler paths of the log-price.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::path_rng;
use crate::error::{invalid, Result};
use crate::exec::{self, Execution};
use crate::volatility::VolatilityModel;

/// One Euler step `z + ψ(z)√dt·ξ - ψ(z)²dt/2`; also returns `ψ(z)`.
pub(crate) fn euler_step(model: &VolatilityModel, z: f64, dt: f64, sqrt_dt: f64, xi: f64) -> Result<(f64, f64)> {
    let psi = model.psi(z)?;
    Ok((z + psi * sqrt_dt * xi - 0.5 * psi * psi * dt, psi))
}

/// Euler stepper for a single path with its own random stream.
pub(crate) struct Walker<'a> {
    model: &'a VolatilityModel,
    dt: f64,
    sqrt_dt: f64,
    pub(crate) rng: ChaCha8Rng,
}

impl<'a> Walker<'a> {
    pub(crate) fn new(model: &'a VolatilityModel, dt: f64, seed: u64, path: usize) -> Self {
        Self {
            model,
            dt,
            sqrt_dt: dt.sqrt(),
            rng: path_rng(seed, path),
        }
    }

    /// Advance `z` by one step; returns the new value and `ψ` at the old one.
    pub(crate) fn step(&mut self, z: f64) -> Result<(f64, f64)> {
        let xi: f64 = self.rng.sample(StandardNormal);
        euler_step(self.model, z, self.dt, self.sqrt_dt, xi)
    }
}

/// A reproducible batch of `m` Euler paths on `[0, T]`, generated on demand.
#[derive(Debug, Clone)]
pub struct PathBatch {
    model: VolatilityModel,
    z0: f64,
    dt: f64,
    steps: usize,
    m: usize,
    seed: u64,
}

pub fn simulate_paths(
    model: &VolatilityModel,
    z0: f64,
    maturity: f64,
    dt: f64,
    m: usize,
    seed: u64,
) -> Result<PathBatch> {
    if !z0.is_finite() {
        return invalid(format!("initial log-price must be finite, got {z0}"));
    }
    if !(maturity > 0.0) || !maturity.is_finite() {
        return invalid(format!("horizon must be positive, got {maturity}"));
    }
    let steps = steps_for(maturity, dt)?;
    if m == 0 {
        return invalid("path count must be at least 1");
    }
    Ok(PathBatch {
        model: model.clone(),
        z0,
        dt,
        steps,
        m,
        seed,
    })
}

/// Number of Euler steps of size `dt` in `[0, T]`; `dt` must divide `T`.
pub(crate) fn steps_for(maturity: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0) || !dt.is_finite() {
        return invalid(format!("time step must be positive, got {dt}"));
    }
    let ratio = maturity / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-9 * steps.max(1.0) {
        return invalid(format!("time step {dt} does not divide horizon {maturity}"));
    }
    Ok(steps as usize)
}

impl PathBatch {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// Log-price of path `j` at every step, `steps + 1` values from `z0`.
    pub fn path(&self, j: usize) -> Result<Vec<f64>> {
        let mut walker = Walker::new(&self.model, self.dt, self.seed, j);
        let mut z = self.z0;
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(z);
        for _ in 0..self.steps {
            z = walker.step(z)?.0;
            out.push(z);
        }
        Ok(out)
    }

    /// Final log-price of path `j`, without storing the path.
    pub fn terminal(&self, j: usize) -> Result<f64> {
        let mut walker = Walker::new(&self.model, self.dt, self.seed, j);
        let mut z = self.z0;
        for _ in 0..self.steps {
            z = walker.step(z)?.0;
        }
        Ok(z)
    }

    /// Final log-prices of all paths, in path order.
    pub fn terminal_values(&self, exec: Execution) -> Result<Vec<f64>> {
        exec::map_indexed(exec, self.m, |j| self.terminal(j))
            .into_iter()
            .collect()
    }

    /// Every path in full; `m·(steps + 1)` values.
    pub fn materialize(&self, exec: Execution) -> Result<Vec<Vec<f64>>> {
        exec::map_indexed(exec, self.m, |j| self.path(j)).into_iter().collect()
    }
}
