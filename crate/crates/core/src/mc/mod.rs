//! Continuous-path Monte Carlo checks of the lattice.
//!
//! The log-price `Z = ln S` of the discounted spot follows
//! `dZ = ψ(Z) dW - ψ(Z)²/2 dt` and is simulated with an Euler scheme. Three
//! tools are built on it:
//!
//! * [`simulate_paths`]: a lazily generated batch of Euler paths;
//! * [`verify_embedding`]: simulates one step of the two-stage exit
//!   construction behind the transition probabilities and compares the
//!   empirical increments and step durations with their targets;
//! * [`evaluate_strategies`]: plays the stop rules read off a solved lattice
//!   on simulated paths.
//!
//! Randomness comes from ChaCha8 with one stream per path: path `j` uses
//! the generator seeded with `seed` and switched to stream `j`. Every path is
//! therefore reproducible on its own, and parallel and sequential runs give
//! bit-identical results (reductions run in path order).

mod embedding;
mod paths;
mod strategy;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub use embedding::{verify_embedding, verify_embedding_with, EmbeddingOptions, EmbeddingStats, Monitoring};
pub use paths::{simulate_paths, PathBatch};
pub use strategy::{evaluate_strategies, evaluate_strategies_with, Adversary, AdversaryResult, Mode, StrategyEstimate};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Mean and `sd / √m` of `values`, summed in order.
    pub fn from_samples(values: &[f64]) -> Self {
        let m = values.len();
        if m == 0 {
            return Self {
                mean: f64::NAN,
                std_error: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / m as f64;
        if m < 2 {
            return Self { mean, std_error: 0.0 };
        }
        let ss: f64 = values.iter().map(|x| (x - mean) * (x - mean)).sum();
        let std_error = (ss / (m - 1) as f64 / m as f64).sqrt();
        Self { mean, std_error }
    }

    /// Frequency `count / m` with the binomial standard error.
    pub fn from_count(count: usize, m: usize) -> Self {
        let p = count as f64 / m as f64;
        Self {
            mean: p,
            std_error: (p * (1.0 - p) / m as f64).sqrt(),
        }
    }

    /// `|mean - target|` in units of standard error (infinite when the error
    /// is zero and the mean misses).
    pub fn z_score(&self, target: f64) -> f64 {
        let gap = (self.mean - target).abs();
        if gap == 0.0 {
            0.0
        } else {
            gap / self.std_error
        }
    }
}

pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}
