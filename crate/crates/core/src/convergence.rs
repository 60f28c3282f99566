//! Price sweeps over the number of tree steps.
//!
//! One solve per `(s0, n)` cell. Cells are independent and run in parallel;
//! each solve inside a cell is sequential, so the recorded wall time is a
//! single-thread figure. Results are assembled in cell order.
//!
//! The true price is unknown, so the only observable rate is that of the
//! successive differences `|V_{n_j} - V_{n_{j+1}}|`. The fitted slope of
//! `ln diff` against `ln n` is reported as an *empirical Cauchy rate*; it is a
//! diagnostic, not an error bound.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::exec::{self, Execution};
use crate::lattice::Lattice;
use crate::payoff::PayoffSpec;
use crate::solver::{solve_with, SolveOptions};
use crate::volatility::VolatilityModel;

/// Caveat attached to every fitted rate.
pub const RATE_CAVEAT: &str =
    "empirical Cauchy rate: slope of ln|V_n - V_n'| against ln n over successive n; not an error bound";

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub s0: f64,
    pub n: usize,
    pub value: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepDiff {
    pub s0: f64,
    pub n_from: usize,
    pub n_to: usize,
    pub abs_diff: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRate {
    pub s0: f64,
    /// Least-squares slope, or `None` with fewer than two nonzero diffs.
    pub empirical_cauchy_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    /// Row-major over `s0` then `n`.
    pub rows: Vec<SweepRow>,
    pub diffs: Vec<SweepDiff>,
    pub rates: Vec<SweepRate>,
    pub rate_caveat: &'static str,
}

pub fn sweep(model: &VolatilityModel, payoff: &PayoffSpec, s0_list: &[f64], n_list: &[usize]) -> Result<SweepResult> {
    sweep_with(model, payoff, s0_list, n_list, Execution::default())
}

/// As [`sweep`]; `execution` controls whether cells run concurrently.
pub fn sweep_with(
    model: &VolatilityModel,
    payoff: &PayoffSpec,
    s0_list: &[f64],
    n_list: &[usize],
    execution: Execution,
) -> Result<SweepResult> {
    if s0_list.is_empty() || n_list.is_empty() {
        return invalid("sweep needs at least one s0 and one n");
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("n values must be strictly ascending");
    }
    let game = payoff.build()?;
    let cells = s0_list.len() * n_list.len();
    let rows: Vec<SweepRow> = exec::map_indexed(execution, cells, |c| {
        let s0 = s0_list[c / n_list.len()];
        let n = n_list[c % n_list.len()];
        let start = Instant::now();
        let lattice = Lattice::build(model, s0, payoff.maturity, n, Execution::Sequential)?;
        let sol = solve_with(&lattice, &game, SolveOptions::default().sequential())?;
        let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
        Ok(SweepRow {
            s0,
            n,
            value: sol.value(),
            wall_time_ms,
        })
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let mut diffs = Vec::new();
    let mut rates = Vec::new();
    for group in rows.chunks(n_list.len()) {
        let s0 = group[0].s0;
        let here: Vec<SweepDiff> = group
            .windows(2)
            .map(|w| SweepDiff {
                s0,
                n_from: w[0].n,
                n_to: w[1].n,
                abs_diff: (w[1].value - w[0].value).abs(),
            })
            .collect();
        let points: Vec<(f64, f64)> = here
            .iter()
            .filter(|d| d.abs_diff > 0.0)
            .map(|d| ((d.n_from as f64).ln(), d.abs_diff.ln()))
            .collect();
        rates.push(SweepRate {
            s0,
            empirical_cauchy_rate: slope(&points),
        });
        diffs.extend(here);
    }
    Ok(SweepResult {
        rows,
        diffs,
        rates,
        rate_caveat: RATE_CAVEAT,
    })
}

fn slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

impl SweepResult {
    /// Value at `(s0, n)`, if that cell was computed.
    pub fn value(&self, s0: f64, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.s0 == s0 && r.n == n).map(|r| r.value)
    }

    /// CSV with columns `s0,n,value,wall_time_ms`.
    pub fn write_rows_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s0", "n", "value", "wall_time_ms"])?;
        for r in &self.rows {
            w.write_record([
                r.s0.to_string(),
                r.n.to_string(),
                r.value.to_string(),
                r.wall_time_ms.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `s0,n_from,n_to,abs_diff`.
    pub fn write_diffs_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["s0", "n_from", "n_to", "abs_diff"])?;
        for d in &self.diffs {
            w.write_record([
                d.s0.to_string(),
                d.n_from.to_string(),
                d.n_to.to_string(),
                d.abs_diff.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call() -> PayoffSpec {
        PayoffSpec::game_call(100.0, 12.0, 0.06, 2.0)
    }

    #[test]
    fn flat_rows_are_constant() {
        let model = VolatilityModel::truncated_cev();
        let r = sweep(&model, &call(), &[100.0, 105.0, 110.0], &[50, 100, 200]).unwrap();
        assert_eq!(r.rows.len(), 9);
        for (row, want) in r
            .rows
            .iter()
            .zip([12.0, 12.0, 12.0, 17.0, 17.0, 17.0, 22.0, 22.0, 22.0])
        {
            assert!((row.value - want).abs() < 1e-9, "{row:?}");
            assert!(row.wall_time_ms > 0.0);
        }
        assert!(r.diffs.iter().all(|d| d.abs_diff < 1e-9));
    }

    #[test]
    fn cells_are_in_request_order_and_match_direct_solves() {
        let model = VolatilityModel::truncated_cev();
        let r = sweep(&model, &call(), &[90.0, 80.0], &[20, 40, 80, 160]).unwrap();
        let order: Vec<(f64, usize)> = r.rows.iter().map(|x| (x.s0, x.n)).collect();
        assert_eq!(order[0], (90.0, 20));
        assert_eq!(order[4], (80.0, 20));
        assert_eq!(r.diffs.len(), 6);
        assert_eq!(r.rates.len(), 2);
        let l = Lattice::build(&model, 80.0, 2.0, 40, Execution::Parallel).unwrap();
        let direct = crate::solver::solve(&l, &call().build().unwrap(), false)
            .unwrap()
            .value();
        assert_eq!(r.value(80.0, 40), Some(direct));
        let seq = sweep_with(
            &model,
            &call(),
            &[90.0, 80.0],
            &[20, 40, 80, 160],
            Execution::Sequential,
        )
        .unwrap();
        assert!(r.rows.iter().zip(&seq.rows).all(|(a, b)| a.value == b.value));
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [100.0f64, 200.0, 400.0]
            .iter()
            .map(|&n| (n.ln(), (3.0 * n.powf(-0.5)).ln()))
            .collect();
        assert!((slope(&pts).unwrap() + 0.5).abs() < 1e-12);
        assert_eq!(slope(&pts[..1]), None);
    }

    #[test]
    fn rejects_bad_lists() {
        let model = VolatilityModel::truncated_cev();
        assert!(sweep(&model, &call(), &[], &[10]).unwrap_err().is_validation());
        assert!(sweep(&model, &call(), &[100.0], &[20, 10]).unwrap_err().is_validation());
        assert!(sweep(&model, &call(), &[-1.0], &[10]).unwrap_err().is_validation());
    }

    #[test]
    fn csv_headers() {
        let model = VolatilityModel::truncated_cev();
        let r = sweep(&model, &call(), &[90.0], &[10, 20]).unwrap();
        let mut a = Vec::new();
        r.write_rows_csv(&mut a).unwrap();
        assert!(String::from_utf8(a)
            .unwrap()
            .starts_with("s0,n,value,wall_time_ms\n90,10,"));
        let mut b = Vec::new();
        r.write_diffs_csv(&mut b).unwrap();
        assert!(String::from_utf8(b)
            .unwrap()
            .starts_with("s0,n_from,n_to,abs_diff\n90,10,20,"));
    }
}
