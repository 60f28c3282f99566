//! Recombining trinomial trees for finite-maturity game (Israeli) options
//! under one-dimensional local-volatility models.
//!
//! The discounted spot follows `dS/S = σ(S) dW`. Sampling the log-price at a
//! sequence of embedded stopping times yields a recombining trinomial walk on
//! the grid `S0·exp(σ̄·√h·i)`, with state-dependent transition probabilities.
//! The game value is computed by the Dynkin backward recursion
//! `J_k = max(f, min(g, E[J_{k+1}]))`, which also yields both players'
//! stopping regions.
//!
//! Modules:
//! - [`volatility`]: local-volatility functions with enforced bounds.
//! - [`payoff`]: buyer/seller payoff pairs (game calls, puts, American limits, custom).
//! - [`lattice`]: grid geometry and trinomial transition probabilities.
//! - [`solver`]: backward recursion, stop flags, stopping regions, brute-force oracle.
//! - [`mc`]: Euler path simulation, embedding verification, strategy evaluation.
//! - [`convergence`]: sweeps over step counts and empirical rate diagnostics.
//!
//! With the `parallel` feature (default) the inner loops run on rayon; without
//! it every routine runs sequentially and produces bit-identical results.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod convergence;
pub mod error;
pub mod exec;
pub mod lattice;
pub mod mc;
pub mod payoff;
pub mod solver;
pub mod volatility;

pub use convergence::{sweep, SweepResult};
pub use error::{Error, Result};
pub use exec::Execution;
pub use lattice::{build_lattice, transition_probs, Lattice, TransitionProbs};
pub use mc::{
    evaluate_strategies, simulate_paths, verify_embedding, EmbeddingStats, Mode, PathBatch, StrategyEstimate,
};
pub use payoff::{Convention, GamePayoff, PayoffKind, PayoffSpec};
pub use solver::{
    brute_force_value, solve, solve_with, stopping_region, OracleValue, RegionRow, Side, Solution, SolveOptions,
    StoppingRegion,
};
pub use volatility::{ModelSpec, VolatilityModel};
