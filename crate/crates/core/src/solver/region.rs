//! Stopping regions in undiscounted spot coordinates.
//!
//! Row `k` lists the maximal runs of consecutive stopping nodes at time
//! `t_k`, each mapped to `[e^{r t_k}·s_lo, e^{r t_k}·s_hi]`.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::Solution;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buyer,
    Seller,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Buyer => "buyer",
            Side::Seller => "seller",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionRow {
    pub k: usize,
    pub t: f64,
    /// Disjoint, ascending `[lo, hi]` intervals of undiscounted spot.
    pub intervals: Vec<[f64; 2]>,
    /// Node index ranges `[i_lo, i_hi]` matching `intervals`.
    pub nodes: Vec<[i64; 2]>,
}

impl RegionRow {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Smallest stopping spot in the row.
    pub fn lower(&self) -> Option<f64> {
        self.intervals.first().map(|iv| iv[0])
    }

    /// Largest stopping spot in the row.
    pub fn upper(&self) -> Option<f64> {
        self.intervals.last().map(|iv| iv[1])
    }
}

#[derive(Debug, Clone)]
pub struct StoppingRegion {
    pub side: Side,
    pub rows: Vec<RegionRow>,
    /// Log-grid spacing of the underlying tree.
    pub dz: f64,
}

pub fn stopping_region(solution: &Solution, side: Side) -> StoppingRegion {
    let lattice = solution.lattice();
    let rows = (0..=solution.n())
        .map(|k| {
            let t = lattice.time(k);
            let growth = (solution.rate() * t).exp();
            let kk = k as i64;
            let stop = |i: i64| match side {
                Side::Buyer => solution.buyer_stop(k, i),
                Side::Seller => solution.seller_stop(k, i),
            };
            let mut nodes = Vec::new();
            let mut run: Option<i64> = None;
            for i in -kk..=kk + 1 {
                let inside = i <= kk && stop(i);
                match (inside, run) {
                    (true, None) => run = Some(i),
                    (false, Some(start)) => {
                        nodes.push([start, i - 1]);
                        run = None;
                    }
                    _ => {}
                }
            }
            let intervals = nodes
                .iter()
                .map(|&[a, b]| [growth * lattice.spot(a), growth * lattice.spot(b)])
                .collect();
            RegionRow { k, t, intervals, nodes }
        })
        .collect();
    StoppingRegion {
        side,
        rows,
        dz: lattice.dz(),
    }
}

impl StoppingRegion {
    /// Latest time with a nonempty row, if any.
    pub fn last_active_time(&self) -> Option<f64> {
        self.rows.iter().rev().find(|r| !r.is_empty()).map(|r| r.t)
    }

    /// Latest time with a nonempty row strictly before maturity.
    pub fn last_active_time_before_maturity(&self) -> Option<f64> {
        let n = self.rows.len() - 1;
        self.rows[..n].iter().rev().find(|r| !r.is_empty()).map(|r| r.t)
    }

    pub fn is_empty(&self) -> bool {
        self.rows.iter().all(RegionRow::is_empty)
    }

    /// Upper end of the interval containing the lowest stopping spot, per row.
    /// For a put buyer this is the exercise boundary below the strike.
    pub fn lowest_interval_upper(&self) -> Vec<(f64, Option<f64>)> {
        self.rows
            .iter()
            .map(|r| (r.t, r.intervals.first().map(|iv| iv[1])))
            .collect()
    }

    /// CSV with columns `side,t,s_lo,s_hi`, one line per interval.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["side", "t", "s_lo", "s_hi"])?;
        let side = self.side.to_string();
        for row in &self.rows {
            for iv in &row.intervals {
                w.write_record([side.clone(), row.t.to_string(), iv[0].to_string(), iv[1].to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}
