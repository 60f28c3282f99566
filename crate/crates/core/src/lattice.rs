//! Recombining log-price grid and trinomial transition probabilities.
//!
//! From log-price `z` the walk moves to `z - a`, `z`, or `z + a` with
//! `a = σ̄·√h`. The probabilities come from a two-stage exit construction:
//! the log-price first leaves `(z - A, z + A)` with `A = ψ(z)²·√h / σ̄`, then
//! from the side it hit it runs until it returns to `z` or reaches `z ± a`.
//! Since `e^Z` is a martingale, the exit probabilities reduce to
//!
//! ```text
//! p_up   = tanh(A/2) / (e^a - 1)
//! p_down = e^a · p_up
//! p_mid  = 1 - p_up - p_down
//! ```
//!
//! which satisfies `p_up·e^a + p_mid + p_down·e^{-a} = 1` exactly in real
//! arithmetic and has no cancellation for small `A`.
//!
//! The model has no time dependence, so probabilities are stored once per
//! spatial index. The full width `2n + 1` is kept even though level `k` only
//! reaches `|i| <= k`.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::volatility::VolatilityModel;

/// Below this embedding amplitude `tanh(A/2)` is replaced by `A/2`.
const SMALL_AMPLITUDE: f64 = 1e-8;
/// Largest simplex defect that is silently renormalized.
const SIMPLEX_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionProbs {
    pub up: f64,
    pub mid: f64,
    pub down: f64,
}

impl TransitionProbs {
    pub fn sum(&self) -> f64 {
        self.up + self.mid + self.down
    }

    /// `p_up·e^a + p_mid + p_down·e^{-a}`; one for a martingale step.
    pub fn discounted_mean(&self, a: f64) -> f64 {
        self.up * a.exp() + self.mid + self.down * (-a).exp()
    }
}

/// Probabilities of the moves `+a`, `0`, `-a` from log-price `z`.
pub fn transition_probs(z: f64, h: f64, sigma_bar: f64, model: &VolatilityModel) -> Result<TransitionProbs> {
    if !(h > 0.0) || !h.is_finite() {
        return invalid(format!("time step must be positive, got {h}"));
    }
    let psi = model.psi(z)?;
    if !(psi > 0.0) {
        return Err(Error::Degenerate { z, value: psi });
    }
    if psi > sigma_bar {
        return Err(Error::BoundViolation {
            z,
            value: psi,
            min: model.sigma_min(),
            max: sigma_bar,
        });
    }
    probs_from_amplitude(z, psi, h, sigma_bar)
}

fn probs_from_amplitude(z: f64, psi: f64, h: f64, sigma_bar: f64) -> Result<TransitionProbs> {
    let sqrt_h = h.sqrt();
    let a = sigma_bar * sqrt_h;
    let amp = (psi * psi * sqrt_h / sigma_bar).min(a);
    let half = if amp < SMALL_AMPLITUDE {
        0.5 * amp
    } else {
        (0.5 * amp).tanh()
    };
    let mut up = half / a.exp_m1();
    let mut down = a.exp() * up;
    let mut mid = 1.0 - up - down;
    if mid < 0.0 {
        if mid < -SIMPLEX_TOLERANCE {
            return Err(Error::ProbabilityDefect { z, deviation: -mid });
        }
        let norm = up + down;
        up /= norm;
        down /= norm;
        mid = 0.0;
    }
    Ok(TransitionProbs { up, mid, down })
}

/// Grid geometry plus per-node probabilities for `n` steps over `[0, T]`.
#[derive(Debug, Clone)]
pub struct Lattice {
    n: usize,
    maturity: f64,
    h: f64,
    sigma_bar: f64,
    s0: f64,
    z0: f64,
    dz: f64,
    spots: Vec<f64>,
    probs: Vec<TransitionProbs>,
}

pub fn build_lattice(model: &VolatilityModel, s0: f64, maturity: f64, n: usize) -> Result<Lattice> {
    Lattice::build(model, s0, maturity, n, Execution::default())
}

impl Lattice {
    pub fn build(model: &VolatilityModel, s0: f64, maturity: f64, n: usize, exec: Execution) -> Result<Self> {
        if !(s0 > 0.0) || !s0.is_finite() {
            return invalid(format!("initial spot must be positive, got {s0}"));
        }
        if !(maturity > 0.0) || !maturity.is_finite() {
            return invalid(format!("maturity must be positive, got {maturity}"));
        }
        if n == 0 {
            return invalid("step count must be at least 1");
        }
        let h = maturity / n as f64;
        let sigma_bar = model.sigma_max();
        let dz = sigma_bar * h.sqrt();
        let z0 = s0.ln();
        let width = 2 * n + 1;
        let offset = n as f64;
        let spots = (0..width).map(|j| s0 * ((j as f64 - offset) * dz).exp()).collect();
        let probs = exec::map_indexed(exec, width, |j| {
            transition_probs(z0 + (j as f64 - offset) * dz, h, sigma_bar, model)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            n,
            maturity,
            h,
            sigma_bar,
            s0,
            z0,
            dz,
            spots,
            probs,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn sigma_bar(&self) -> f64 {
        self.sigma_bar
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn z0(&self) -> f64 {
        self.z0
    }

    /// Log-price step `σ̄·√h`.
    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// Time of level `k`.
    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.h
    }

    /// Log-price at spatial index `i ∈ [-n, n]`.
    pub fn z(&self, i: i64) -> f64 {
        self.z0 + i as f64 * self.dz
    }

    /// Discounted spot at spatial index `i`; exactly `s0` at `i = 0`.
    #[inline]
    pub fn spot(&self, i: i64) -> f64 {
        self.spots[self.slot(i)]
    }

    #[inline]
    pub fn probs(&self, i: i64) -> TransitionProbs {
        self.probs[self.slot(i)]
    }

    /// Spots for indices `-n..=n`.
    pub fn spots(&self) -> &[f64] {
        &self.spots
    }

    /// Probabilities for indices `-n..=n`.
    pub fn all_probs(&self) -> &[TransitionProbs] {
        &self.probs
    }

    #[inline]
    fn slot(&self, i: i64) -> usize {
        debug_assert!(i.unsigned_abs() as usize <= self.n);
        (i + self.n as i64) as usize
    }

    /// Debug dump with columns `i,z,s,p_up,p_mid,p_down`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["i", "z", "s", "p_up", "p_mid", "p_down"])?;
        let n = self.n as i64;
        for i in -n..=n {
            let p = self.probs(i);
            w.write_record([
                i.to_string(),
                self.z(i).to_string(),
                self.spot(i).to_string(),
                p.up.to_string(),
                p.mid.to_string(),
                p.down.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
