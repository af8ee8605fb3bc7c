//! Side-by-side comparison of the closed form with the finite-difference
//! and Monte Carlo oracles.

use serde::Serialize;

use crate::analytic::{price, PriceQuery};
use crate::error::Result;
use crate::fd::{self, ConvergenceTable, GridSpec};
use crate::mc::{self, McConfig};
use crate::transform::MarketParams;

/// Largest accepted `|FD - analytic| / analytic`.
pub const FD_REL_TOL: f64 = 1e-4;
/// Accepted `|MC - analytic|` in units of the MC standard error.
pub const MC_SIGMAS: f64 = 3.0;
/// Accepted observed FD convergence order.
pub const FD_ORDER_RANGE: (f64, f64) = (1.7, 2.3);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdComparison {
    pub value: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McComparison {
    pub value: f64,
    pub std_error: f64,
    pub abs_error: f64,
    pub rel_error: f64,
    /// `|MC - analytic| / std_error`.
    pub z_score: f64,
    pub knockout_fraction: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleComparison {
    pub spot: f64,
    pub time: f64,
    pub analytic: f64,
    pub fd: Option<FdComparison>,
    pub mc: Option<McComparison>,
}

impl OracleComparison {
    pub fn passed(&self) -> bool {
        self.fd.is_none_or(|f| f.passed) && self.mc.is_none_or(|m| m.passed)
    }
}

fn rel(err: f64, reference: f64) -> f64 {
    if reference == 0.0 {
        err
    } else {
        err / reference.abs()
    }
}

/// Prices `(spot, time)` analytically and with each requested oracle. The
/// Monte Carlo oracle starts at `time = 0`.
pub fn compare(
    spot: f64,
    time: f64,
    m: &MarketParams,
    grid: Option<&GridSpec>,
    mc_cfg: Option<&McConfig>,
) -> Result<OracleComparison> {
    let analytic = price(&PriceQuery::new(spot, time), m)?.value;
    let fd = grid
        .map(|g| -> Result<FdComparison> {
            let value = fd::solve(m, g)?.price(spot, time)?;
            let abs_error = (value - analytic).abs();
            let rel_error = rel(abs_error, analytic);
            Ok(FdComparison {
                value,
                abs_error,
                rel_error,
                tolerance: FD_REL_TOL,
                passed: rel_error < FD_REL_TOL,
            })
        })
        .transpose()?;
    let mc = mc_cfg
        .map(|cfg| -> Result<McComparison> {
            if time != 0.0 {
                return Err(crate::error::Error::Config(format!(
                    "the Monte Carlo oracle prices at time 0, got time {time}"
                )));
            }
            let est = mc::simulate(spot, m, cfg)?;
            let abs_error = (est.price - analytic).abs();
            Ok(McComparison {
                value: est.price,
                std_error: est.std_error,
                abs_error,
                rel_error: rel(abs_error, analytic),
                z_score: abs_error / est.std_error,
                knockout_fraction: est.knockout_fraction,
                passed: abs_error < MC_SIGMAS * est.std_error,
            })
        })
        .transpose()?;
    Ok(OracleComparison {
        spot,
        time,
        analytic,
        fd,
        mc,
    })
}

/// Convergence study with a pass flag for the observed order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub table: ConvergenceTable,
    pub order: Option<f64>,
    pub passed: bool,
}

pub fn study(m: &MarketParams, grids: &[GridSpec]) -> Result<StudyReport> {
    let table = fd::convergence_study(m, grids)?;
    let order = table.asymptotic_order();
    let passed = order.is_some_and(|o| (FD_ORDER_RANGE.0..=FD_ORDER_RANGE.1).contains(&o));
    Ok(StudyReport { table, order, passed })
}
