//! Dynkin-game backward recursion on the trinomial lattice.
//!
//! ```text
//! J(n, i) = f(T, s_i)
//! J(k, i) = max( f(t_k, s_i), min( g(t_k, s_i), Σ p(i)·J(k+1, i + move) ) )
//! ```
//!
//! The expectation is summed in the fixed order down, mid, up. Levels are
//! strictly sequential; nodes within a level are independent and may be
//! updated in parallel with bit-identical results.
//!
//! Stop flags mark nodes where the value sits on an obstacle:
//! `J - f <= tol` for the buyer and `g - J <= tol` for the seller, with
//! `tol = stop_tolerance · (1 + s0)`. Every node at maturity is a buyer stop.
//!
//! Far from the root the node values can exceed what double precision
//! resolves to within `tol`: at `s ≈ 10^15` one ulp is about 1, and rounding
//! accumulated over the remaining levels can swamp a penalty of that size.
//! Before maturity a node is flagged only if the worst-case accumulated
//! rounding error `4·ε·(n - k + 1)·max(|f|, |g|, |J|)` is at most `tol`;
//! unresolved nodes carry no flags. With the default tolerance this only
//! affects nodes hundreds of times the initial spot away.

mod oracle;
mod region;

use std::io::Write;

pub use oracle::{brute_force_value, OracleValue, MAX_ORACLE_STEPS};
pub use region::{stopping_region, RegionRow, Side, StoppingRegion};

use crate::error::{invalid, Error, Result};
use crate::exec::{self, Execution};
use crate::lattice::Lattice;
use crate::payoff::GamePayoff;

const BUYER: u8 = 1;
const SELLER: u8 = 2;
/// Per-level rounding allowance used to decide whether a node is resolved.
const ROUNDING_FACTOR: f64 = 4.0;

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Retain the full value surface `J(k, i)` (O(n²) memory).
    pub keep_surface: bool,
    /// Relative tolerance for stop flags, scaled by `1 + s0`.
    pub stop_tolerance: f64,
    pub execution: Execution,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            keep_surface: false,
            stop_tolerance: 1e-9,
            execution: Execution::default(),
        }
    }
}

impl SolveOptions {
    pub fn keep_surface(mut self, keep: bool) -> Self {
        self.keep_surface = keep;
        self
    }

    pub fn sequential(mut self) -> Self {
        self.execution = Execution::Sequential;
        self
    }

    pub fn execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn stop_tolerance(mut self, tol: f64) -> Self {
        self.stop_tolerance = tol;
        self
    }
}

/// Output of [`solve`].
#[derive(Debug, Clone)]
pub struct Solution {
    value: f64,
    lattice: Lattice,
    rate: f64,
    cancellable: bool,
    tolerance: f64,
    // level k occupies flags[k*k .. (k+1)*(k+1)], index i + k
    flags: Vec<u8>,
    surface: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Copy, Default)]
struct Node {
    value: f64,
    flag: u8,
    bad_order: bool,
}

pub fn solve(lattice: &Lattice, payoff: &GamePayoff, keep_surface: bool) -> Result<Solution> {
    solve_with(lattice, payoff, SolveOptions::default().keep_surface(keep_surface))
}

pub fn solve_with(lattice: &Lattice, payoff: &GamePayoff, opts: SolveOptions) -> Result<Solution> {
    let t_mat = lattice.maturity();
    if (payoff.maturity() - t_mat).abs() > 1e-12 * t_mat {
        return invalid(format!(
            "payoff maturity {} differs from lattice maturity {}",
            payoff.maturity(),
            t_mat
        ));
    }
    if !(opts.stop_tolerance > 0.0) || !opts.stop_tolerance.is_finite() {
        return invalid("stop tolerance must be positive");
    }
    let n = lattice.n();
    let tol = opts.stop_tolerance * (1.0 + lattice.s0());
    let width = 2 * n + 1;
    let mut flags = vec![0u8; (n + 1) * (n + 1)];
    let mut surface = opts.keep_surface.then(|| Vec::with_capacity(n + 1));

    let mut prev = vec![Node::default(); width];
    let mut next = vec![Node::default(); width];

    // maturity: forced buyer stop
    {
        let t = lattice.time(n);
        exec::for_each_mut(opts.execution, &mut prev, 256, |j, node| {
            let s = lattice.spots()[j];
            let f = payoff.f(t, s);
            let mut flag = BUYER;
            let mut bad_order = false;
            if let Some(g) = payoff.g(t, s) {
                bad_order = g < f;
                if g - f <= tol {
                    flag |= SELLER;
                }
            }
            *node = Node {
                value: f,
                flag,
                bad_order,
            };
        });
        check_order(&prev, n, 0, n, lattice, payoff)?;
        store_level(&mut flags, &mut surface, &prev, n, n);
    }

    for k in (0..n).rev() {
        let t = lattice.time(k);
        let lo = n - k;
        let band = &mut next[lo..=n + k];
        let prev_ref = &prev;
        let noise = ROUNDING_FACTOR * f64::EPSILON * (n - k + 1) as f64;
        exec::for_each_mut(opts.execution, band, 256, |j, node| {
            let slot = lo + j;
            let p = lattice.all_probs()[slot];
            let cont =
                p.down * prev_ref[slot - 1].value + p.mid * prev_ref[slot].value + p.up * prev_ref[slot + 1].value;
            let s = lattice.spots()[slot];
            let f = payoff.f(t, s);
            *node = match payoff.g(t, s) {
                Some(g) => {
                    let value = f.max(g.min(cont));
                    let mut flag = 0;
                    if value - f <= tol {
                        flag |= BUYER;
                    }
                    if g - value <= tol {
                        flag |= SELLER;
                    }
                    if noise * f.abs().max(g.abs()).max(value.abs()) > tol {
                        flag = 0;
                    }
                    Node {
                        value,
                        flag,
                        bad_order: g < f,
                    }
                }
                None => {
                    let value = f.max(cont);
                    let resolved = noise * f.abs().max(value.abs()) <= tol;
                    let flag = if resolved && value - f <= tol { BUYER } else { 0 };
                    Node {
                        value,
                        flag,
                        bad_order: false,
                    }
                }
            };
        });
        check_order(&next, k, lo, n, lattice, payoff)?;
        store_level(&mut flags, &mut surface, &next, k, n);
        std::mem::swap(&mut prev, &mut next);
    }

    if let Some(s) = surface.as_mut() {
        s.reverse();
    }
    Ok(Solution {
        value: prev[n].value,
        lattice: lattice.clone(),
        rate: payoff.rate(),
        cancellable: payoff.is_cancellable(),
        tolerance: tol,
        flags,
        surface,
    })
}

fn check_order(row: &[Node], k: usize, lo: usize, n: usize, lattice: &Lattice, payoff: &GamePayoff) -> Result<()> {
    let hi = 2 * n - lo;
    if let Some(j) = (lo..=hi).find(|&j| row[j].bad_order) {
        let i = j as i64 - n as i64;
        let (t, s) = (lattice.time(k), lattice.spot(i));
        return Err(Error::ObstacleOrder {
            k,
            i,
            f: payoff.f(t, s),
            g: payoff.g(t, s).unwrap_or(f64::INFINITY),
        });
    }
    Ok(())
}

fn store_level(flags: &mut [u8], surface: &mut Option<Vec<Vec<f64>>>, row: &[Node], k: usize, n: usize) {
    let band = &row[n - k..=n + k];
    for (dst, node) in flags[k * k..(k + 1) * (k + 1)].iter_mut().zip(band) {
        *dst = node.flag;
    }
    if let Some(s) = surface.as_mut() {
        s.push(band.iter().map(|node| node.value).collect());
    }
}

impl Solution {
    /// The game value `V_n = J(0, 0)`.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn n(&self) -> usize {
        self.lattice.n()
    }

    pub fn h(&self) -> f64 {
        self.lattice.h()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn is_cancellable(&self) -> bool {
        self.cancellable
    }

    /// Absolute tolerance used for the stop flags.
    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    fn flag(&self, k: usize, i: i64) -> u8 {
        assert!(
            k <= self.n() && i.unsigned_abs() as usize <= k,
            "node ({k}, {i}) outside the tree"
        );
        self.flags[k * k + (i + k as i64) as usize]
    }

    pub fn buyer_stop(&self, k: usize, i: i64) -> bool {
        self.flag(k, i) & BUYER != 0
    }

    pub fn seller_stop(&self, k: usize, i: i64) -> bool {
        self.flag(k, i) & SELLER != 0
    }

    /// `J(k, i)` when the surface was retained.
    pub fn surface_value(&self, k: usize, i: i64) -> Option<f64> {
        let s = self.surface.as_ref()?;
        if k > self.n() || i.unsigned_abs() as usize > k {
            return None;
        }
        Some(s[k][(i + k as i64) as usize])
    }

    pub fn has_surface(&self) -> bool {
        self.surface.is_some()
    }

    /// Dump `k,i,t,s,J,f,g,buyer_stop,seller_stop`; requires a retained surface.
    pub fn write_surface_csv<W: Write>(&self, payoff: &GamePayoff, out: W) -> Result<()> {
        if self.surface.is_none() {
            return invalid("surface was not retained; solve with keep_surface");
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "i", "t", "s", "J", "f", "g", "buyer_stop", "seller_stop"])?;
        for k in 0..=self.n() {
            let t = self.lattice.time(k);
            for i in -(k as i64)..=k as i64 {
                let s = self.lattice.spot(i);
                let g = payoff.g(t, s).map(|g| g.to_string()).unwrap_or_default();
                w.write_record([
                    k.to_string(),
                    i.to_string(),
                    t.to_string(),
                    s.to_string(),
                    self.surface_value(k, i).unwrap_or(f64::NAN).to_string(),
                    payoff.f(t, s).to_string(),
                    g,
                    u8::from(self.buyer_stop(k, i)).to_string(),
                    u8::from(self.seller_stop(k, i)).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::build_lattice;
    use crate::payoff::{Convention, PayoffSpec};
    use crate::volatility::VolatilityModel;
    use proptest::prelude::*;

    fn cev() -> VolatilityModel {
        VolatilityModel::truncated_cev()
    }

    #[test]
    fn flat_call_rows() {
        let p = PayoffSpec::game_call(100.0, 12.0, 0.06, 2.0).build().unwrap();
        for (s0, want) in [(100.0, 12.0), (105.0, 17.0), (110.0, 22.0)] {
            let l = build_lattice(&cev(), s0, 2.0, 400).unwrap();
            let v = solve(&l, &p, false).unwrap().value();
            assert!((v - want).abs() < 1e-9, "s0 {s0}: {v}");
        }
    }

    #[test]
    fn zero_penalty_gives_immediate_payoff() {
        for kind in [
            PayoffSpec::game_call(100.0, 0.0, 0.06, 2.0),
            PayoffSpec::game_put(100.0, 0.0, 0.06, 2.0),
        ] {
            let p = kind.build().unwrap();
            for s0 in [80.0, 100.0, 120.0] {
                let l = build_lattice(&cev(), s0, 2.0, 50).unwrap();
                let sol = solve(&l, &p, false).unwrap();
                assert_eq!(sol.value(), p.f(0.0, s0));
                assert!(sol.buyer_stop(0, 0) && sol.seller_stop(0, 0));
            }
        }
    }

    #[test]
    fn surface_invariants() {
        let p = PayoffSpec::game_put(100.0, 5.0, 0.06, 1.0).build().unwrap();
        let l = build_lattice(&cev(), 95.0, 1.0, 60).unwrap();
        let sol = solve(&l, &p, true).unwrap();
        let n = sol.n();
        for k in 0..=n {
            let t = l.time(k);
            for i in -(k as i64)..=k as i64 {
                let j = sol.surface_value(k, i).unwrap();
                let s = l.spot(i);
                let (f, g) = (p.f(t, s), p.g(t, s).unwrap());
                assert!(f <= j && j <= g, "({k},{i}): {f} {j} {g}");
            }
        }
        for i in -(n as i64)..=n as i64 {
            assert_eq!(sol.surface_value(n, i).unwrap(), p.f(1.0, l.spot(i)));
            assert!(sol.buyer_stop(n, i));
        }
        assert_eq!(sol.surface_value(0, 0).unwrap(), sol.value());
        assert_eq!(sol.surface_value(3, 4), None);
    }

    #[test]
    fn rolling_rows_match_full_surface() {
        let p = PayoffSpec::game_call(100.0, 8.0, 0.06, 2.0).build().unwrap();
        let l = build_lattice(&cev(), 90.0, 2.0, 300).unwrap();
        let a = solve(&l, &p, false).unwrap();
        let b = solve(&l, &p, true).unwrap();
        assert_eq!(a.value(), b.value());
        assert_eq!(a.flags, b.flags);
    }

    #[test]
    fn parallel_is_bit_identical() {
        let p = PayoffSpec::game_put(100.0, 12.0, 0.06, 2.0).build().unwrap();
        let l = build_lattice(&cev(), 90.0, 2.0, 700).unwrap();
        let a = solve_with(&l, &p, SolveOptions::default().sequential()).unwrap();
        let b = solve_with(&l, &p, SolveOptions::default().execution(Execution::Parallel)).unwrap();
        assert_eq!(a.value().to_bits(), b.value().to_bits());
        assert_eq!(a.flags, b.flags);
    }

    #[test]
    fn maturity_mismatch_is_rejected() {
        let p = PayoffSpec::game_call(100.0, 12.0, 0.06, 1.0).build().unwrap();
        let l = build_lattice(&cev(), 100.0, 2.0, 10).unwrap();
        assert!(solve(&l, &p, false).unwrap_err().is_validation());
    }

    #[test]
    fn obstacle_order_violation_is_reported() {
        // g < f above s = 120
        let p = GamePayoff::custom(|_, s: f64| s, Some(|_: f64, s: f64| s.min(120.0)), 1.0, 0.0).unwrap();
        let l = build_lattice(&VolatilityModel::constant(0.3).unwrap(), 100.0, 1.0, 20).unwrap();
        match solve(&l, &p, false) {
            Err(Error::ObstacleOrder { f, g, .. }) => assert!(g < f),
            other => panic!("expected obstacle error, got {other:?}"),
        }
    }

    #[test]
    fn american_has_no_seller_flags_and_dominates() {
        let l = build_lattice(&cev(), 90.0, 2.0, 200).unwrap();
        let am = PayoffSpec::american_put(100.0, 0.06, 2.0).build().unwrap();
        let game = PayoffSpec::game_put(100.0, 12.0, 0.06, 2.0).build().unwrap();
        let a = solve(&l, &am, false).unwrap();
        let g = solve(&l, &game, false).unwrap();
        assert!(g.value() <= a.value());
        for k in 0..=200 {
            for i in -(k as i64)..=k as i64 {
                assert!(!a.seller_stop(k, i));
            }
        }
    }

    #[test]
    fn american_call_without_dividends_is_european() {
        // discounted call payoff is a submartingale: the buyer waits
        let l = build_lattice(&cev(), 100.0, 1.0, 200).unwrap();
        let am = PayoffSpec::american_call(100.0, 0.06, 1.0).build().unwrap();
        let sol = solve(&l, &am, false).unwrap();
        assert!(sol.value() > am.f(0.0, 100.0));
        for k in 0..200 {
            for i in -(k as i64)..=k as i64 {
                if sol.buyer_stop(k, i) {
                    assert_eq!(am.f(l.time(k), l.spot(i)), 0.0, "({k},{i})");
                }
            }
        }
    }

    #[test]
    fn literal_convention_solves() {
        let p = PayoffSpec::game_call(100.0, 12.0, 0.06, 2.0)
            .with_convention(Convention::Literal)
            .build()
            .unwrap();
        let l = build_lattice(&cev(), 110.0, 2.0, 100).unwrap();
        let v = solve(&l, &p, false).unwrap().value();
        assert!(v > 10.0 && v <= 22.0);
    }

    #[test]
    fn unresolved_far_nodes_carry_no_flags() {
        // spots near 1e15 at the top of a 2000-step tree cannot resolve a
        // penalty of 12; they must not show up as seller stops
        let p = PayoffSpec::game_call(100.0, 12.0, 0.06, 2.0).build().unwrap();
        let l = build_lattice(&cev(), 100.0, 2.0, 2000).unwrap();
        let sol = solve(&l, &p, false).unwrap();
        for k in 1500..2000 {
            for i in -(k as i64)..=k as i64 {
                if sol.seller_stop(k, i) {
                    panic!("seller stop at ({k},{i}), spot {}", l.spot(i));
                }
            }
        }
        // the resolved part of the region is untouched
        assert!(sol.seller_stop(0, 0));
    }

    #[test]
    fn tolerance_must_be_positive() {
        let p = PayoffSpec::game_call(100.0, 12.0, 0.06, 1.0).build().unwrap();
        let l = build_lattice(&cev(), 100.0, 1.0, 2).unwrap();
        for tol in [0.0, -1.0, f64::NAN] {
            assert!(solve_with(&l, &p, SolveOptions::default().stop_tolerance(tol))
                .unwrap_err()
                .is_validation());
        }
    }

    #[test]
    fn surface_csv_requires_surface() {
        let p = PayoffSpec::game_call(100.0, 12.0, 0.06, 1.0).build().unwrap();
        let l = build_lattice(&cev(), 100.0, 1.0, 2).unwrap();
        let mut buf = Vec::new();
        assert!(solve(&l, &p, false).unwrap().write_surface_csv(&p, &mut buf).is_err());
        solve(&l, &p, true).unwrap().write_surface_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 1 + 3 + 5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn monotone_in_penalty(
            put in any::<bool>(),
            s0 in 70.0f64..130.0,
            d1 in 0.0f64..20.0,
            d2 in 0.0f64..20.0,
        ) {
            let (lo, hi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            let l = build_lattice(&cev(), s0, 1.0, 80).unwrap();
            let mk = |d| if put {
                PayoffSpec::game_put(100.0, d, 0.06, 1.0)
            } else {
                PayoffSpec::game_call(100.0, d, 0.06, 1.0)
            }.build().unwrap();
            let v_lo = solve(&l, &mk(lo), false).unwrap().value();
            let v_hi = solve(&l, &mk(hi), false).unwrap().value();
            prop_assert!(v_lo <= v_hi + 1e-12);
        }

        #[test]
        fn game_below_american(s0 in 70.0f64..130.0, d in 0.0f64..20.0) {
            let l = build_lattice(&cev(), s0, 1.0, 80).unwrap();
            let g = solve(&l, &PayoffSpec::game_put(100.0, d, 0.06, 1.0).build().unwrap(), false).unwrap();
            let a = solve(&l, &PayoffSpec::american_put(100.0, 0.06, 1.0).build().unwrap(), false).unwrap();
            prop_assert!(g.value() <= a.value() + 1e-12);
        }
    }
}
