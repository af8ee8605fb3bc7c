//! Crank-Nicolson solver for the knock-out problem, used as an independent
//! check on the closed form.
//!
//! In heat coordinates the barrier `S = Ke^{-r(T-p)}` is the moving line
//! `x = -(2α+1)t`. With `ξ = x + (2α+1)t` and `u(x, t) = v(ξ, t)`:
//!
//! ```text
//! u_t  = v_t + (2α+1) v_ξ
//! u_xx = v_ξξ
//! u_t = u_xx   ⇔   v_t = v_ξξ - (2α+1) v_ξ
//! ```
//!
//! so the barrier sits at `ξ = 0` for all `t`. The problem on
//! `ξ ∈ [0, ξ_max]`, `t ∈ [0, σ²T/2]` is
//!
//! * `v(ξ, 0) = e^{(α+1)ξ} - e^{αξ}` (the transformed payoff),
//! * `v(0, t) = 0`,
//! * `v(ξ_max, t)` from the deep in-the-money asymptote `V ≈ S - Ke^{-r(T-p)}`
//!   mapped through the coordinate change.
//!
//! Space uses second-order central differences for both terms; the cell
//! Péclet number `Δξ|2α+1|/2` must stay below one. Time stepping is
//! Crank-Nicolson, with the first step replaced by two implicit-Euler half
//! steps.

use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::transform::{
    heat_time, log_moneyness, terminal_condition_heat, to_heat, BsPoint, MarketParams, TransformParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    pub xi_max: f64,
    pub n_space: usize,
    pub n_time: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            xi_max: 4.0,
            n_space: 800,
            n_time: 800,
        }
    }
}

impl GridSpec {
    pub fn square(n: usize) -> Self {
        Self {
            n_space: n,
            n_time: n,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi_max.is_finite() && self.xi_max > 0.0) {
            return Err(invalid("xi_max", format!("must be > 0, got {}", self.xi_max)));
        }
        if self.n_space < 16 {
            return Err(invalid("n_space", format!("must be >= 16, got {}", self.n_space)));
        }
        if self.n_time < 16 {
            return Err(invalid("n_time", format!("must be >= 16, got {}", self.n_time)));
        }
        Ok(())
    }

    pub fn dxi(&self) -> f64 {
        self.xi_max / self.n_space as f64
    }
}

/// Solution on every grid node and time level.
#[derive(Debug, Clone)]
pub struct FdSolution {
    pub grid: GridSpec,
    pub market: MarketParams,
    pub params: TransformParams,
    pub xi: Vec<f64>,
    pub times: Vec<f64>,
    /// `values[n][j] = v(ξ_j, t_n)`.
    pub values: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Far-field value at `(ξ, t)` from the no-arbitrage asymptote.
fn far_field(xi: f64, t: f64, m: &MarketParams, tp: &TransformParams) -> Result<f64> {
    let x = xi - tp.drift() * t;
    let spot = m.strike() * x.exp();
    let p = crate::transform::calendar_time(t, m)?;
    let value = spot - m.strike() * (-m.r() * (m.maturity() - p)).exp();
    Ok(to_heat(BsPoint { spot, time: p, value }, m)?.u)
}

/// Solves `a_j y_{j-1} + b_j y_j + c_j y_{j+1} = d_j` in place; `d` holds
/// the solution on return.
fn thomas(sub: f64, diag: f64, sup: f64, d: &mut [f64], scratch: &mut [f64]) {
    let n = d.len();
    scratch[0] = sup / diag;
    d[0] /= diag;
    for i in 1..n {
        let denom = diag - sub * scratch[i - 1];
        scratch[i] = sup / denom;
        d[i] = (d[i] - sub * d[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        d[i] -= scratch[i] * d[i + 1];
    }
}

struct Operator {
    lower: f64,
    centre: f64,
    upper: f64,
}

impl Operator {
    fn new(dxi: f64, drift: f64) -> Self {
        let diff = 1.0 / (dxi * dxi);
        let adv = drift / (2.0 * dxi);
        Self {
            lower: diff + adv,
            centre: -2.0 * diff,
            upper: diff - adv,
        }
    }

    fn apply(&self, v: &[f64], j: usize) -> f64 {
        self.lower * v[j - 1] + self.centre * v[j] + self.upper * v[j + 1]
    }
}

/// One θ-step from `prev` (with boundary values already in place) to `next`.
fn theta_step(op: &Operator, theta: f64, dt: f64, prev: &[f64], next: &mut [f64], scratch: &mut [f64]) {
    let n = prev.len() - 1;
    let explicit = (1.0 - theta) * dt;
    let implicit = theta * dt;
    let rhs = &mut scratch[..n - 1];
    for j in 1..n {
        rhs[j - 1] = prev[j] + explicit * op.apply(prev, j);
    }
    rhs[0] += implicit * op.lower * next[0];
    rhs[n - 2] += implicit * op.upper * next[n];
    let mut work = vec![0.0; n - 1];
    thomas(
        -implicit * op.lower,
        1.0 - implicit * op.centre,
        -implicit * op.upper,
        rhs,
        &mut work,
    );
    next[1..n].copy_from_slice(rhs);
}

pub fn solve(m: &MarketParams, g: &GridSpec) -> Result<FdSolution> {
    g.validate()?;
    let tp = m.transform_params();
    let drift = tp.drift();
    let dxi = g.dxi();
    if dxi * drift.abs() >= 2.0 {
        return Err(invalid(
            "n_space",
            format!(
                "cell Peclet number {:.3} >= 1; need dxi < {:.4}",
                0.5 * dxi * drift.abs(),
                2.0 / drift.abs()
            ),
        ));
    }
    let horizon = m.heat_horizon();
    let dt = horizon / g.n_time as f64;
    let n = g.n_space;
    let xi: Vec<f64> = (0..=n).map(|j| j as f64 * dxi).collect();
    let times: Vec<f64> = (0..=g.n_time).map(|k| k as f64 * dt).collect();
    let op = Operator::new(dxi, drift);

    let mut values = Vec::with_capacity(g.n_time + 1);
    let initial: Vec<f64> = xi.iter().map(|&z| terminal_condition_heat(z, &tp)).collect();
    values.push(initial);

    let mut scratch = vec![0.0; n + 1];
    for (step, &time) in times.iter().enumerate().skip(1) {
        let prev = values.last().expect("initial level present");
        let mut next = vec![0.0; n + 1];
        next[0] = 0.0;
        next[n] = far_field(xi[n], time, m, &tp)?;
        if step == 1 {
            // Two implicit-Euler half steps.
            let mut half = vec![0.0; n + 1];
            half[n] = far_field(xi[n], 0.5 * dt, m, &tp)?;
            theta_step(&op, 1.0, 0.5 * dt, prev, &mut half, &mut scratch);
            theta_step(&op, 1.0, 0.5 * dt, &half, &mut next, &mut scratch);
        } else {
            theta_step(&op, 0.5, dt, prev, &mut next, &mut scratch);
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::Instability { step });
        }
        values.push(next);
    }

    let mut warnings = Vec::new();
    let last = values.last().expect("at least one level");
    let probe = far_field(xi[n - 1], horizon, m, &tp)?;
    let deviation = (last[n - 1] - probe).abs() / probe.abs().max(1e-300);
    if deviation > 1e-3 {
        warnings.push(format!(
            "grid too coarse: far-field truncation dominates (relative deviation {deviation:.2e} next to xi_max)"
        ));
    }
    if g.xi_max < 1.0 {
        warnings.push(format!("xi_max = {} leaves little room above the barrier", g.xi_max));
    }

    Ok(FdSolution {
        grid: *g,
        market: *m,
        params: tp,
        xi,
        times,
        values,
        warnings,
    })
}

impl FdSolution {
    fn dxi(&self) -> f64 {
        self.grid.dxi()
    }

    fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    fn cubic_in_space(&self, level: usize, xi: f64) -> f64 {
        let v = &self.values[level];
        let n = self.grid.n_space;
        let h = self.dxi();
        let j = ((xi / h).floor() as isize).clamp(1, n as isize - 2) as usize;
        let start = j - 1;
        let s = xi / h - start as f64;
        // Lagrange weights on nodes start..start+3 at local coordinate s.
        let w = [
            -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
            s * (s - 2.0) * (s - 3.0) / 2.0,
            -s * (s - 1.0) * (s - 3.0) / 2.0,
            s * (s - 1.0) * (s - 2.0) / 6.0,
        ];
        (0..4).map(|k| w[k] * v[start + k]).sum()
    }

    /// `v(ξ, t)`: cubic in `ξ`, linear in `t`.
    pub fn value_at(&self, xi: f64, t: f64) -> Result<f64> {
        let horizon = *self.times.last().expect("non-empty");
        if !(0.0..=self.grid.xi_max).contains(&xi) {
            return Err(Error::Domain(format!("xi = {xi} outside [0, {}]", self.grid.xi_max)));
        }
        if !(t >= -1e-14 && t <= horizon * (1.0 + 1e-12)) {
            return Err(Error::Domain(format!("t = {t} outside [0, {horizon}]")));
        }
        let pos = (t / self.dt()).clamp(0.0, self.grid.n_time as f64);
        let k = (pos.floor() as usize).min(self.grid.n_time - 1);
        let frac = pos - k as f64;
        let lo = self.cubic_in_space(k, xi);
        let hi = self.cubic_in_space(k + 1, xi);
        Ok(lo + frac * (hi - lo))
    }

    /// Black-Scholes value at `(S, p)`; zero on or below the barrier.
    pub fn price(&self, spot: f64, p: f64) -> Result<f64> {
        let x = log_moneyness(spot, &self.market)?;
        let t = heat_time(p, &self.market)?;
        let xi = x + self.params.drift() * t;
        if xi <= 0.0 {
            return Ok(0.0);
        }
        let v = self.value_at(xi, t)?;
        let scale = (-(self.params.alpha * x + self.params.beta * t)).exp();
        Ok(self.market.strike() * v * scale)
    }

    pub fn final_slice(&self) -> &[f64] {
        self.values.last().expect("non-empty")
    }

    /// Writes `xi,t,v` rows, keeping every `stride`-th node and level.
    pub fn write_csv<W: Write>(&self, mut w: W, stride: usize) -> std::io::Result<()> {
        let stride = stride.max(1);
        writeln!(w, "xi,t,v")?;
        for (k, level) in self.values.iter().enumerate().step_by(stride) {
            for (j, v) in level.iter().enumerate().step_by(stride) {
                writeln!(w, "{},{},{}", self.xi[j], self.times[k], v)?;
            }
        }
        Ok(())
    }
}

/// Closed-form `v(ξ, t)` for error measurement.
pub fn exact_v(xi: f64, t: f64, tp: &TransformParams) -> f64 {
    let a = tp.alpha;
    let damp = (-a * (a + 1.0) * t).exp();
    damp * (((a + 1.0) * xi).exp() - (a * xi).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub grid: GridSpec,
    pub max_error: f64,
    /// Observed order against the previous row.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    /// Order measured between the last two grids.
    pub fn asymptotic_order(&self) -> Option<f64> {
        self.rows.last().and_then(|r| r.order)
    }

    pub fn monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].max_error < w[0].max_error)
    }
}

/// Max-norm error of the final time level against the closed form on each
/// grid, and the observed order between successive grids.
pub fn convergence_study(m: &MarketParams, grids: &[GridSpec]) -> Result<ConvergenceTable> {
    if grids.len() < 3 {
        return Err(Error::Config(format!(
            "convergence study needs at least 3 grids, got {}",
            grids.len()
        )));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(grids.len());
    for g in grids {
        let sol = solve(m, g)?;
        let t = *sol.times.last().expect("non-empty");
        let max_error = sol
            .xi
            .iter()
            .zip(sol.final_slice())
            .map(|(&z, &v)| (v - exact_v(z, t, &sol.params)).abs())
            .fold(0.0, f64::max);
        let order = rows.last().map(|prev| {
            let ratio = prev.grid.dxi() / g.dxi();
            (prev.max_error / max_error).ln() / ratio.ln()
        });
        rows.push(ConvergenceRow {
            grid: *g,
            max_error,
            order,
        });
    }
    Ok(ConvergenceTable { rows })
}
