//! Exhaustive Dynkin-game evaluation on tiny trees.
//!
//! Every adapted stopping time on the trinomial history tree (at most three
//! steps) is enumerated for both players. A stopping time is stored as the
//! stop level along each root-to-leaf history; rules that differ only after
//! stopping induce the same time, so this covers every stop/continue rule.
//! The expected payment of each pair is summed over histories, and both
//! `inf_ζ sup_η` and `sup_η inf_ζ` are returned. Nothing here uses the
//! backward recursion.

use crate::error::{invalid, Result};
use crate::lattice::Lattice;
use crate::payoff::GamePayoff;

pub const MAX_ORACLE_STEPS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleValue {
    /// `inf over seller times of sup over buyer times`.
    pub inf_sup: f64,
    /// `sup over buyer times of inf over seller times`.
    pub sup_inf: f64,
}

struct History {
    prob: f64,
    /// Spatial index after each of the `n` moves, with index 0 the root.
    nodes: Vec<i64>,
}

fn histories(lattice: &Lattice) -> Vec<History> {
    let n = lattice.n();
    let count = 3usize.pow(n as u32);
    (0..count)
        .map(|code| {
            let mut nodes = vec![0i64];
            let mut prob = 1.0;
            let mut c = code;
            // most significant digit is the first move, so leaves of a
            // common prefix are contiguous
            let mut digits = vec![0usize; n];
            for d in digits.iter_mut().rev() {
                *d = c % 3;
                c /= 3;
            }
            for d in digits {
                let here = *nodes.last().unwrap();
                let p = lattice.probs(here);
                let (step, q) = match d {
                    0 => (-1, p.down),
                    1 => (0, p.mid),
                    _ => (1, p.up),
                };
                prob *= q;
                nodes.push(here + step);
            }
            History { prob, nodes }
        })
        .collect()
}

/// All stopping times on a subtree whose root is at level `level`, as stop
/// levels per leaf of the subtree (leaves in lexicographic order).
fn stopping_times(level: usize, n: usize) -> Vec<Vec<u8>> {
    if level == n {
        return vec![vec![n as u8]];
    }
    let width = 3usize.pow((n - level) as u32);
    let children = stopping_times(level + 1, n);
    let mut out = vec![vec![level as u8; width]];
    for a in &children {
        for b in &children {
            for c in &children {
                let mut v = Vec::with_capacity(width);
                v.extend_from_slice(a);
                v.extend_from_slice(b);
                v.extend_from_slice(c);
                out.push(v);
            }
        }
    }
    out
}

pub fn brute_force_value(lattice: &Lattice, payoff: &GamePayoff) -> Result<OracleValue> {
    let n = lattice.n();
    if n > MAX_ORACLE_STEPS {
        return invalid(format!("oracle supports at most {MAX_ORACLE_STEPS} steps, got {n}"));
    }
    if (payoff.maturity() - lattice.maturity()).abs() > 1e-12 * lattice.maturity() {
        return invalid("payoff maturity differs from lattice maturity");
    }
    let paths = histories(lattice);
    let payoff_at = |level: usize, path: &History| {
        let t = lattice.time(level);
        let s = lattice.spot(path.nodes[level]);
        (payoff.f(t, s), payoff.g(t, s))
    };
    // per path, per level: (f, g)
    let table: Vec<Vec<(f64, Option<f64>)>> = paths
        .iter()
        .map(|p| (0..=n).map(|k| payoff_at(k, p)).collect())
        .collect();

    let buyer_times = stopping_times(0, n);
    let seller_times = if payoff.is_cancellable() {
        buyer_times.clone()
    } else {
        vec![vec![n as u8; paths.len()]]
    };

    let expected = |zeta: &[u8], eta: &[u8]| -> f64 {
        paths
            .iter()
            .zip(&table)
            .zip(zeta.iter().zip(eta))
            .map(|((path, row), (&z, &e))| {
                let pay = if z < e {
                    row[z as usize].1.expect("seller stops only when cancellable")
                } else {
                    row[e as usize].0
                };
                path.prob * pay
            })
            .sum()
    };

    let matrix: Vec<Vec<f64>> = seller_times
        .iter()
        .map(|z| buyer_times.iter().map(|e| expected(z, e)).collect())
        .collect();

    let inf_sup = matrix
        .iter()
        .map(|row| row.iter().copied().fold(f64::NEG_INFINITY, f64::max))
        .fold(f64::INFINITY, f64::min);
    let sup_inf = (0..buyer_times.len())
        .map(|j| matrix.iter().map(|row| row[j]).fold(f64::INFINITY, f64::min))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(OracleValue { inf_sup, sup_inf })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::payoff::PayoffSpec;
    use crate::volatility::VolatilityModel;

    #[test]
    fn counts_stopping_times() {
        assert_eq!(stopping_times(0, 1).len(), 2);
        assert_eq!(stopping_times(0, 2).len(), 9);
        assert_eq!(stopping_times(0, 3).len(), 730);
        assert!(stopping_times(0, 3).iter().all(|t| t.len() == 27));
    }

    #[test]
    fn history_probabilities_sum_to_one() {
        let l = build_lattice(&VolatilityModel::truncated_cev(), 100.0, 1.0, 3).unwrap();
        let total: f64 = histories(&l).iter().map(|h| h.prob).sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_large_trees() {
        let l = build_lattice(&VolatilityModel::truncated_cev(), 100.0, 1.0, 4).unwrap();
        let p = PayoffSpec::game_call(100.0, 5.0, 0.0, 1.0).build().unwrap();
        assert!(brute_force_value(&l, &p).unwrap_err().is_validation());
    }

    #[test]
    fn zero_penalty_is_immediate_payoff() {
        let l = build_lattice(&VolatilityModel::constant(0.3).unwrap(), 100.0, 1.0, 2).unwrap();
        let p = PayoffSpec::game_put(105.0, 0.0, 0.06, 1.0).build().unwrap();
        let v = brute_force_value(&l, &p).unwrap();
        assert!((v.inf_sup - 5.0).abs() < 1e-14);
        assert!((v.sup_inf - 5.0).abs() < 1e-14);
    }

    #[test]
    fn one_step_by_hand() {
        // n = 1, r = 0, constant vol: seller either cancels (pays g(0) unless
        // buyer also stops) or waits; hand-computed value
        // min(g0, max(f0, E f1)) with f0 = 0 at the money.
        let l = build_lattice(&VolatilityModel::constant(0.3).unwrap(), 100.0, 1.0, 1).unwrap();
        let p = PayoffSpec::game_call(100.0, 5.0, 0.0, 1.0).build().unwrap();
        let pr = l.probs(0);
        let e1 = pr.up * (l.spot(1) - 100.0);
        let want = 5.0f64.min(e1.max(0.0));
        let v = brute_force_value(&l, &p).unwrap();
        assert!((v.inf_sup - want).abs() < 1e-12);
        assert!((v.sup_inf - want).abs() < 1e-12);
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn recursion_matches_enumeration(
            n in 1usize..=3,
            put in proptest::bool::ANY,
            s0 in 60.0f64..140.0,
            strike in 80.0f64..120.0,
            penalty in 0.0f64..15.0,
            rate in 0.0f64..0.1,
            cev in proptest::bool::ANY,
        ) {
            let model = if cev { VolatilityModel::truncated_cev() } else { VolatilityModel::constant(0.25).unwrap() };
            let spec = if put {
                PayoffSpec::game_put(strike, penalty, rate, 0.75)
            } else {
                PayoffSpec::game_call(strike, penalty, rate, 0.75)
            };
            let p = spec.build().unwrap();
            let l = build_lattice(&model, s0, 0.75, n).unwrap();
            let v = crate::solver::solve(&l, &p, false).unwrap().value();
            let o = brute_force_value(&l, &p).unwrap();
            proptest::prop_assert!((v - o.inf_sup).abs() <= 1e-12 * (1.0 + v.abs()), "{} vs {:?}", v, o);
            proptest::prop_assert!((v - o.sup_inf).abs() <= 1e-12 * (1.0 + v.abs()), "{} vs {:?}", v, o);
        }
    }
}
