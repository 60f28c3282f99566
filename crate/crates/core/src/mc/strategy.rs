//! Playing lattice stop rules on simulated paths.
//!
//! At every Euler time `t` the path is mapped to the nearest lattice level
//! `k = round(t/h)` and nearest node `i = round((Z - z0)/dz)`, clamped to the
//! nodes reachable at that level. The tree buyer stops where the buyer flag
//! is set (always at maturity), the tree seller where the seller flag is
//! set. When both stop at once the buyer's exercise wins. The payment is the
//! discounted buyer payoff `f` on exercise and `g` on cancellation, both
//! evaluated at the simulated spot.
//!
//! The true game value involves all continuous-time strategies, which is out
//! of reach. The one-sided modes instead pit one tree rule against a small
//! fixed family of heuristic opponents ([`Adversary`]): buyer-only reports
//! the worst case for the tree buyer, seller-only the worst case for the
//! tree seller. These are sanity bounds, not optimality proofs.

use serde::{Deserialize, Serialize};

use super::paths::{steps_for, Walker};
use super::Estimate;
use crate::error::{invalid, Result};
use crate::exec::{self, Execution};
use crate::payoff::GamePayoff;
use crate::solver::Solution;
use crate::volatility::VolatilityModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Tree buyer against tree seller.
    #[default]
    Both,
    /// Tree buyer against each heuristic seller.
    BuyerOnly,
    /// Tree seller against each heuristic buyer.
    SellerOnly,
}

/// Heuristic opponent rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adversary {
    /// Never stops (a buyer is still forced to exercise at maturity).
    Never,
    /// Stops at the first time the undiscounted spot touches or crosses the
    /// strike.
    FirstTouch,
    /// Stops at the first simulation time at or after `quarter·T/4`.
    Fixed { quarter: u8 },
}

impl Adversary {
    pub fn name(&self) -> String {
        match self {
            Adversary::Never => "never".to_string(),
            Adversary::FirstTouch => "first_touch".to_string(),
            Adversary::Fixed { quarter } => format!("fixed_{quarter}_4"),
        }
    }

    /// The family used by the one-sided modes; `first_touch` needs a strike.
    pub fn family(has_strike: bool) -> Vec<Adversary> {
        let mut v = vec![Adversary::Never];
        if has_strike {
            v.push(Adversary::FirstTouch);
        }
        v.extend((0..4).map(|quarter| Adversary::Fixed { quarter }));
        v
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AdversaryResult {
    pub adversary: String,
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StrategyEstimate {
    pub mode: Mode,
    pub mean: f64,
    pub std_error: f64,
    pub m: usize,
    pub seed: u64,
    pub dt: f64,
    /// Opponent that produced `mean` in the one-sided modes.
    pub worst_adversary: Option<String>,
    /// Per-opponent results in the one-sided modes.
    pub adversaries: Vec<AdversaryResult>,
}

#[derive(Clone, Copy)]
enum Rule {
    Tree,
    Heuristic(Adversary),
}

pub fn evaluate_strategies(
    solution: &Solution,
    model: &VolatilityModel,
    payoff: &GamePayoff,
    mode: Mode,
    m: usize,
    seed: u64,
    dt: f64,
) -> Result<StrategyEstimate> {
    evaluate_strategies_with(solution, model, payoff, mode, m, seed, dt, Execution::default())
}

#[allow(clippy::too_many_arguments)]
pub fn evaluate_strategies_with(
    solution: &Solution,
    model: &VolatilityModel,
    payoff: &GamePayoff,
    mode: Mode,
    m: usize,
    seed: u64,
    dt: f64,
    execution: Execution,
) -> Result<StrategyEstimate> {
    let lattice = solution.lattice();
    let maturity = lattice.maturity();
    if (payoff.maturity() - maturity).abs() > 1e-12 * maturity {
        return invalid("payoff maturity differs from the solved lattice");
    }
    if payoff.rate() != solution.rate() {
        return invalid("payoff rate differs from the solved lattice");
    }
    if m == 0 {
        return invalid("path count must be at least 1");
    }
    let steps = steps_for(maturity, dt)?;

    // (buyer rule, seller rule) per game
    let family = Adversary::family(payoff.strike().is_some());
    let games: Vec<(Rule, Rule)> = match mode {
        Mode::Both => vec![(Rule::Tree, Rule::Tree)],
        Mode::BuyerOnly => family.iter().map(|&a| (Rule::Tree, Rule::Heuristic(a))).collect(),
        Mode::SellerOnly => family.iter().map(|&a| (Rule::Heuristic(a), Rule::Tree)).collect(),
    };

    let n = lattice.n();
    let h = lattice.h();
    let z0 = lattice.z0();
    let dz = lattice.dz();
    let rate = payoff.rate();
    let strike = payoff.strike();
    let cancellable = payoff.is_cancellable();

    let run = |path: usize| -> Result<Vec<f64>> {
        let mut walker = Walker::new(model, dt, seed, path);
        let mut pay: Vec<Option<f64>> = vec![None; games.len()];
        let mut open = games.len();
        let mut z = z0;
        let mut prev_gap: Option<f64> = None;
        for j in 0..=steps {
            if j > 0 {
                z = walker.step(z)?.0;
            }
            let t = if j == steps { maturity } else { j as f64 * dt };
            // the root spot is exact rather than exp(ln s0)
            let spot = if j == 0 { lattice.s0() } else { z.exp() };
            let k = ((t / h).round() as usize).min(n);
            let kk = k as i64;
            let i = ((z - z0) / dz).round().clamp(-kk as f64, kk as f64) as i64;
            let gap = strike.map(|kx| (rate * t).exp() * spot - kx);
            let touched = match (gap, prev_gap) {
                (Some(g), Some(p)) => g == 0.0 || (g > 0.0) != (p > 0.0),
                (Some(g), None) => g == 0.0,
                _ => false,
            };
            prev_gap = gap;
            let heuristic = |a: Adversary| match a {
                Adversary::Never => false,
                Adversary::FirstTouch => touched,
                Adversary::Fixed { quarter } => t >= f64::from(quarter) * maturity / 4.0 - 1e-12 * maturity,
            };
            for (slot, &(buyer, seller)) in pay.iter_mut().zip(&games) {
                if slot.is_some() {
                    continue;
                }
                let buyer_stops = j == steps
                    || match buyer {
                        Rule::Tree => solution.buyer_stop(k, i),
                        Rule::Heuristic(a) => heuristic(a),
                    };
                let seller_stops = cancellable
                    && match seller {
                        Rule::Tree => solution.seller_stop(k, i),
                        Rule::Heuristic(a) => heuristic(a),
                    };
                if buyer_stops {
                    *slot = Some(payoff.f(t, spot));
                } else if seller_stops {
                    *slot = payoff.g(t, spot);
                }
                if slot.is_some() {
                    open -= 1;
                }
            }
            if open == 0 {
                break;
            }
        }
        Ok(pay
            .into_iter()
            .map(|p| p.expect("maturity forces every game to end"))
            .collect())
    };
    let per_path: Vec<Vec<f64>> = exec::map_indexed(execution, m, run)
        .into_iter()
        .collect::<Result<_>>()?;

    let estimates: Vec<Estimate> = (0..games.len())
        .map(|g| Estimate::from_samples(&per_path.iter().map(|p| p[g]).collect::<Vec<_>>()))
        .collect();

    let (best, adversaries) = match mode {
        Mode::Both => (0, Vec::new()),
        _ => {
            let results = family
                .iter()
                .zip(&estimates)
                .map(|(a, e)| AdversaryResult {
                    adversary: a.name(),
                    mean: e.mean,
                    std_error: e.std_error,
                })
                .collect();
            let better = |x: f64, y: f64| if mode == Mode::BuyerOnly { x < y } else { x > y };
            let idx = (1..estimates.len()).fold(0, |b, g| {
                if better(estimates[g].mean, estimates[b].mean) {
                    g
                } else {
                    b
                }
            });
            (idx, results)
        }
    };
    Ok(StrategyEstimate {
        mode,
        mean: estimates[best].mean,
        std_error: estimates[best].std_error,
        m,
        seed,
        dt,
        worst_adversary: (mode != Mode::Both).then(|| family[best].name()),
        adversaries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::payoff::PayoffSpec;
    use crate::solver::solve;

    fn setup(s0: f64, penalty: f64, n: usize) -> (Solution, VolatilityModel, GamePayoff) {
        let model = VolatilityModel::truncated_cev();
        let l = build_lattice(&model, s0, 2.0, n).unwrap();
        let p = PayoffSpec::game_call(100.0, penalty, 0.06, 2.0).build().unwrap();
        let sol = solve(&l, &p, false).unwrap();
        (sol, model, p)
    }

    #[test]
    fn seller_cancels_at_once_deep_in_the_money() {
        let (sol, model, p) = setup(110.0, 12.0, 200);
        let e = evaluate_strategies(&sol, &model, &p, Mode::Both, 1_000, 1, 0.01).unwrap();
        assert_eq!(e.mean, 22.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn zero_penalty_pays_immediate_exercise() {
        let (sol, model, p) = setup(90.0, 0.0, 200);
        let e = evaluate_strategies(&sol, &model, &p, Mode::Both, 1_000, 1, 0.01).unwrap();
        assert_eq!(e.mean, p.f(0.0, 90.0));
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn one_sided_modes_bracket_the_pair() {
        let (sol, model, p) = setup(90.0, 12.0, 200);
        let both = evaluate_strategies(&sol, &model, &p, Mode::Both, 20_000, 4, 0.01).unwrap();
        let buyer = evaluate_strategies(&sol, &model, &p, Mode::BuyerOnly, 20_000, 4, 0.01).unwrap();
        let seller = evaluate_strategies(&sol, &model, &p, Mode::SellerOnly, 20_000, 4, 0.01).unwrap();
        assert_eq!(buyer.adversaries.len(), 6);
        assert!(
            buyer.mean >= both.mean - 4.0 * (both.std_error + buyer.std_error),
            "{buyer:?} {both:?}"
        );
        assert!(
            seller.mean <= both.mean + 4.0 * (both.std_error + seller.std_error),
            "{seller:?} {both:?}"
        );
        let min = buyer.adversaries.iter().map(|a| a.mean).fold(f64::INFINITY, f64::min);
        assert_eq!(buyer.mean, min);
        // against the tree seller, the pair mean is close to the lattice value
        assert!(
            (both.mean - sol.value()).abs() < 4.0 * both.std_error + 0.2,
            "{both:?} {}",
            sol.value()
        );
    }

    #[test]
    fn parallel_equals_sequential() {
        let (sol, model, p) = setup(95.0, 12.0, 100);
        let run = |ex| evaluate_strategies_with(&sol, &model, &p, Mode::BuyerOnly, 2_000, 9, 0.02, ex).unwrap();
        let a = run(Execution::Parallel);
        let b = run(Execution::Sequential);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.std_error, b.std_error);
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let (sol, model, p) = setup(95.0, 12.0, 100);
        assert!(evaluate_strategies(&sol, &model, &p, Mode::Both, 10, 1, 0.3)
            .unwrap_err()
            .is_validation());
        assert!(evaluate_strategies(&sol, &model, &p, Mode::Both, 0, 1, 0.01)
            .unwrap_err()
            .is_validation());
        let other = PayoffSpec::game_call(100.0, 12.0, 0.06, 1.0).build().unwrap();
        assert!(evaluate_strategies(&sol, &model, &other, Mode::Both, 10, 1, 0.01)
            .unwrap_err()
            .is_validation());
    }

    #[test]
    fn adversary_names() {
        let names: Vec<String> = Adversary::family(true).iter().map(Adversary::name).collect();
        assert_eq!(
            names,
            [
                "never",
                "first_touch",
                "fixed_0_4",
                "fixed_1_4",
                "fixed_2_4",
                "fixed_3_4"
            ]
        );
        assert_eq!(Adversary::family(false).len(), 5);
    }
}
