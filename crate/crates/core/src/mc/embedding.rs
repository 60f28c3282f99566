//! Path-level check of the two-stage exit construction.
//!
//! From `Z_0` the log-price runs until it leaves `(Z_0 - A, Z_0 + A)`, with
//! `A = min(ψ(Z_0)²√h/σ̄, σ̄√h)`. From the side it hit, it then runs until it
//! reaches `Z_0` or `Z_0 ± σ̄√h` on that side. If `A = σ̄√h` the second stage
//! is already complete. The increment lands in `{-σ̄√h, 0, +σ̄√h}` and the
//! elapsed time should average `h` up to higher-order terms.
//!
//! Barrier crossings between Euler steps are detected with the Brownian
//! bridge: a step from `x0` to `x1` that stays inside crosses a barrier `b`
//! with probability `exp(-2(b - x0)(b - x1) / (ψ²dt))`. Plain endpoint
//! checks overshoot every exit and bias the step duration upwards by a
//! term of order `√(dt/h)` (about 6% at `dt = h/400`), far beyond the
//! statistical error at `10^5` paths; [`Monitoring::Discrete`] keeps that
//! behavior available for comparison.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::paths::Walker;
use super::Estimate;
use crate::error::{invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::lattice::transition_probs;
use crate::volatility::VolatilityModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Check barriers at step endpoints only.
    Discrete,
    /// Endpoint checks plus a Brownian-bridge crossing test inside each step.
    #[default]
    BrownianBridge,
}

#[derive(Debug, Clone, Copy)]
pub struct EmbeddingOptions {
    /// Euler step; `None` means `h / 400`.
    pub dt: Option<f64>,
    /// Per-path time cap as a multiple of `h`.
    pub horizon_factor: f64,
    /// Largest tolerated fraction of paths hitting the cap.
    pub max_truncation: f64,
    pub monitoring: Monitoring,
    pub execution: Execution,
}

impl Default for EmbeddingOptions {
    fn default() -> Self {
        Self {
            dt: None,
            horizon_factor: 50.0,
            max_truncation: 0.01,
            monitoring: Monitoring::default(),
            execution: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct EmbeddingStats {
    pub z0: f64,
    pub h: f64,
    pub dt: f64,
    pub m: usize,
    pub seed: u64,
    pub monitoring: Monitoring,
    pub sigma_bar: f64,
    /// Grid spacing `σ̄√h`.
    pub dz: f64,
    /// First-stage half-width `A`.
    pub amplitude: f64,
    pub freq_down: Estimate,
    pub freq_mid: Estimate,
    pub freq_up: Estimate,
    pub target_down: f64,
    pub target_mid: f64,
    pub target_up: f64,
    /// Mean step duration in years.
    pub mean_duration: Estimate,
    pub target_duration: f64,
    /// Paths that completed both stages; frequencies and durations use these.
    pub completed: usize,
    pub truncated: usize,
    pub truncation_fraction: f64,
}

impl EmbeddingStats {
    /// Largest `|empirical - target| / SE` over the three frequencies and
    /// the mean duration.
    pub fn max_z_score(&self) -> f64 {
        [
            self.freq_down.z_score(self.target_down),
            self.freq_mid.z_score(self.target_mid),
            self.freq_up.z_score(self.target_up),
            self.mean_duration.z_score(self.target_duration),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

/// Outcome of one simulated step: increment sign and elapsed time, or
/// `None` when the cap was hit.
type Outcome = Option<(i8, f64)>;

pub fn verify_embedding(
    model: &VolatilityModel,
    z0: f64,
    h: f64,
    m: usize,
    seed: u64,
    dt: f64,
) -> Result<EmbeddingStats> {
    verify_embedding_with(
        model,
        z0,
        h,
        m,
        seed,
        EmbeddingOptions {
            dt: Some(dt),
            ..EmbeddingOptions::default()
        },
    )
}

pub fn verify_embedding_with(
    model: &VolatilityModel,
    z0: f64,
    h: f64,
    m: usize,
    seed: u64,
    opts: EmbeddingOptions,
) -> Result<EmbeddingStats> {
    if !z0.is_finite() {
        return invalid(format!("initial log-price must be finite, got {z0}"));
    }
    if !(h > 0.0) || !h.is_finite() {
        return invalid(format!("time step must be positive, got {h}"));
    }
    if m == 0 {
        return invalid("path count must be at least 1");
    }
    let dt = opts.dt.unwrap_or(h / 400.0);
    if !(dt > 0.0) || dt >= h {
        return invalid(format!("Euler step must lie in (0, h), got {dt}"));
    }
    if !(opts.horizon_factor > 1.0) {
        return invalid("horizon factor must exceed 1");
    }
    let sigma_bar = model.sigma_max();
    let target = transition_probs(z0, h, sigma_bar, model)?;
    let psi0 = model.psi(z0)?;
    let dz = sigma_bar * h.sqrt();
    let amplitude = (psi0 * psi0 * h.sqrt() / sigma_bar).min(dz);
    let cap = opts.horizon_factor * h;

    let run = |j: usize| -> Result<Outcome> {
        let mut walker = Walker::new(model, dt, seed, j);
        let mut clock = 0.0;
        let first = exit_interval(
            &mut walker,
            opts.monitoring,
            z0,
            z0 - amplitude,
            z0 + amplitude,
            &mut clock,
            cap,
            dt,
        )?;
        let Some(side) = first else { return Ok(None) };
        if amplitude >= dz {
            return Ok(Some((side, clock)));
        }
        let start = z0 + f64::from(side) * amplitude;
        let (lo, hi) = if side > 0 { (z0, z0 + dz) } else { (z0 - dz, z0) };
        let second = exit_interval(&mut walker, opts.monitoring, start, lo, hi, &mut clock, cap, dt)?;
        Ok(second.map(|s| {
            // leaving towards z0 ends the step at the middle node
            let inc = if (s > 0) == (side > 0) { side } else { 0 };
            (inc, clock)
        }))
    };
    let outcomes: Vec<Outcome> = exec::map_indexed(opts.execution, m, run)
        .into_iter()
        .collect::<Result<_>>()?;

    let truncated = outcomes.iter().filter(|o| o.is_none()).count();
    let truncation_fraction = truncated as f64 / m as f64;
    if truncation_fraction > opts.max_truncation {
        return Err(Error::Truncation { truncated, m });
    }
    let done: Vec<(i8, f64)> = outcomes.into_iter().flatten().collect();
    let completed = done.len();
    let count = |s: i8| done.iter().filter(|o| o.0 == s).count();
    let durations: Vec<f64> = done.iter().map(|o| o.1).collect();
    Ok(EmbeddingStats {
        z0,
        h,
        dt,
        m,
        seed,
        monitoring: opts.monitoring,
        sigma_bar,
        dz,
        amplitude,
        freq_down: Estimate::from_count(count(-1), completed),
        freq_mid: Estimate::from_count(count(0), completed),
        freq_up: Estimate::from_count(count(1), completed),
        target_down: target.down,
        target_mid: target.mid,
        target_up: target.up,
        mean_duration: Estimate::from_samples(&durations),
        target_duration: h,
        completed,
        truncated,
        truncation_fraction,
    })
}

/// Run from `z` until the path leaves `(lo, hi)`; returns `+1` or `-1` for
/// the barrier hit, or `None` if `clock` reaches `cap` first. `clock` is
/// advanced to the (estimated) crossing time.
#[allow(clippy::too_many_arguments)]
fn exit_interval(
    walker: &mut Walker<'_>,
    monitoring: Monitoring,
    mut z: f64,
    lo: f64,
    hi: f64,
    clock: &mut f64,
    cap: f64,
    dt: f64,
) -> Result<Option<i8>> {
    while *clock < cap {
        let (next, psi) = walker.step(z)?;
        if next >= hi || next <= lo {
            let barrier = if next >= hi { hi } else { lo };
            // linear interpolation of the crossing inside the step
            *clock += dt * ((barrier - z) / (next - z)).clamp(0.0, 1.0);
            return Ok(Some(if next >= hi { 1 } else { -1 }));
        }
        if monitoring == Monitoring::BrownianBridge {
            let var = psi * psi * dt;
            let p_hi = (-2.0 * (hi - z) * (hi - next) / var).exp();
            let p_lo = (-2.0 * (z - lo) * (next - lo) / var).exp();
            let u: f64 = walker.rng.random();
            if u < p_hi + p_lo {
                *clock += 0.5 * dt;
                return Ok(Some(if u < p_hi { 1 } else { -1 }));
            }
        }
        *clock += dt;
        z = next;
    }
    Ok(None)
}
