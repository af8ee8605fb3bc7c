//! Invariant check suite: transform round trips, PDE residuals, terminal
//! constraints, reduction, further solutions and symmetry conditions, each
//! reported with its measured value and tolerance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analytic::{barrier_level, heat_solution, payoff, price, PriceQuery, Region};
use crate::error::{invalid, Error, Result};
use crate::stencil::{jet, StepSizes};
use crate::symmetry::{
    boundary_isc_residual, characteristic_reduce, eval_generator, fit_terminal, isc_residual,
    solve_terminal_constraints, verify_further_solution_constraints, BarrierSpec, CharacteristicRoots, SymmetryVector,
};
use crate::transform::{
    bs_residual_default, from_heat, heat_residual, to_heat, BsPoint, MarketParams, TransformParams,
};

/// Fourth-order steps for heat-side residuals, `2e-3/(|α|+1)` in `x` and
/// `2e-3/(|α|+1)²` in `t`, matching the length and time scales of the
/// fastest exponential mode.
pub fn residual_steps(tp: &TransformParams) -> StepSizes {
    let rate = tp.alpha.abs() + 1.0;
    StepSizes {
        space: 2e-3 / rate,
        time: 2e-3 / (rate * rate),
        ..StepSizes::fourth_order(2e-3)
    }
}

/// Tolerance per check, keyed by the check name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tolerances {
    pub round_trip: f64,
    pub bs_residual: f64,
    pub heat_residual: f64,
    pub terminal: f64,
    pub barrier: f64,
    pub null_space: f64,
    pub psi_coefficients: f64,
    pub roots: f64,
    pub terminal_fit: f64,
    pub further_solutions: f64,
    pub isc: f64,
    pub boundary_isc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            round_trip: 1e-12,
            bs_residual: 1e-6,
            heat_residual: 1e-8,
            terminal: 0.0,
            barrier: 1e-12,
            null_space: 1e-10,
            psi_coefficients: 1e-10,
            roots: 1e-12,
            terminal_fit: 1e-12,
            further_solutions: 1e-10,
            isc: 1e-6,
            boundary_isc: 1e-5,
        }
    }
}

pub const CHECK_NAMES: [&str; 12] = [
    "round_trip",
    "bs_residual",
    "heat_residual",
    "terminal",
    "barrier",
    "null_space",
    "psi_coefficients",
    "roots",
    "terminal_fit",
    "further_solutions",
    "isc",
    "boundary_isc",
];

impl Tolerances {
    /// Every tolerance set to `value`.
    pub fn uniform(value: f64) -> Self {
        let mut t = Self::default();
        for name in CHECK_NAMES {
            *t.slot(name).expect("known check") = value;
        }
        t
    }

    fn slot(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "round_trip" => &mut self.round_trip,
            "bs_residual" => &mut self.bs_residual,
            "heat_residual" => &mut self.heat_residual,
            "terminal" => &mut self.terminal,
            "barrier" => &mut self.barrier,
            "null_space" => &mut self.null_space,
            "psi_coefficients" => &mut self.psi_coefficients,
            "roots" => &mut self.roots,
            "terminal_fit" => &mut self.terminal_fit,
            "further_solutions" => &mut self.further_solutions,
            "isc" => &mut self.isc,
            "boundary_isc" => &mut self.boundary_isc,
            _ => return None,
        })
    }

    /// Overrides one tolerance by check name.
    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(invalid(
                "tol",
                format!("tolerance must be finite and >= 0, got {value}"),
            ));
        }
        match self.slot(name) {
            Some(s) => {
                *s = value;
                Ok(())
            }
            None => Err(Error::Config(format!(
                "unknown check '{name}'; expected one of {}",
                CHECK_NAMES.join(", ")
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, measured: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Self {
            name,
            measured,
            tolerance,
            passed: measured <= tolerance,
            detail: detail.into(),
        }
    }

    fn failed(name: &'static str, tolerance: f64, err: Error) -> Self {
        Self {
            name,
            measured: f64::INFINITY,
            tolerance,
            passed: false,
            detail: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub alpha: f64,
    pub market: MarketParams,
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    /// Largest finite measured value over the checks.
    pub fn max_residual(&self) -> f64 {
        self.checks
            .iter()
            .map(|c| c.measured)
            .filter(|m| m.is_finite())
            .fold(0.0, f64::max)
    }
}

/// Sample sizes and seed for the suite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuiteConfig {
    pub round_trip_points: usize,
    pub residual_points: usize,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            round_trip_points: 10_000,
            residual_points: 200,
            seed: 0x7e57,
        }
    }
}

fn guarded(name: &'static str, tol: f64, f: impl FnOnce() -> Result<Check>) -> Check {
    f().unwrap_or_else(|e| Check::failed(name, tol, e))
}

/// Largest relative component error of `(S, p, V) → heat → back`, with `p`
/// measured against `T`.
pub fn round_trip_error(pt: BsPoint, m: &MarketParams) -> Result<f64> {
    let back = from_heat(to_heat(pt, m)?, m)?;
    let rel = |a: f64, b: f64, scale: f64| {
        if scale == 0.0 {
            (a - b).abs()
        } else {
            (a - b).abs() / scale
        }
    };
    Ok(rel(back.spot, pt.spot, pt.spot.abs())
        .max(rel(back.time, pt.time, m.maturity()))
        .max(rel(back.value, pt.value, pt.value.abs())))
}

fn interior_point(rng: &mut ChaCha8Rng, m: &MarketParams) -> Result<(f64, f64)> {
    let p = rng.random_range(0.01..0.99) * m.maturity();
    let g = barrier_level(p, m)?;
    let spot = g * rng.random_range(1.01..3.0);
    Ok((spot, p))
}

/// Runs the full suite for one parameter set.
pub fn run_suite(m: &MarketParams, tol: &Tolerances, cfg: &SuiteConfig) -> VerifyReport {
    let tp = m.transform_params();
    let a = tp.alpha;
    let steps = residual_steps(&tp);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut checks = Vec::new();

    checks.push(guarded("round_trip", tol.round_trip, || {
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.round_trip_points {
            let pt = BsPoint {
                spot: m.strike() * rng.random_range(0.05..5.0),
                time: rng.random_range(0.0..=1.0) * m.maturity(),
                value: m.strike() * rng.random_range(-2.0..2.0),
            };
            worst = worst.max(round_trip_error(pt, m)?);
        }
        Ok(Check::new(
            "round_trip",
            worst,
            tol.round_trip,
            format!("{} points", cfg.round_trip_points),
        ))
    }));

    checks.push(guarded("bs_residual", tol.bs_residual, || {
        let v = |s: f64, p: f64| price(&PriceQuery::new(s, p), m).map(|r| r.value).unwrap_or(f64::NAN);
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.residual_points {
            let (s, p) = interior_point(&mut rng, m)?;
            worst = worst.max(bs_residual_default(v, s, p, m)?.abs());
        }
        Ok(Check::new(
            "bs_residual",
            worst,
            tol.bs_residual,
            "analytic price, interior",
        ))
    }));

    let heat_points: Vec<(f64, f64)> = (0..cfg.residual_points)
        .map(|_| (rng.random_range(-1.0..2.0), rng.random_range(0.0..m.heat_horizon())))
        .collect();
    let u = |x: f64, t: f64| heat_solution(x, t, &tp);

    checks.push(guarded("heat_residual", tol.heat_residual, || {
        let mut worst: f64 = 0.0;
        for &(x, t) in &heat_points {
            let r = heat_residual(u, x, t, steps)?;
            let j = jet(&u, x, t, steps);
            worst = worst.max(r.abs() / (1.0 + j.d_b.abs() + j.d_aa.abs()));
        }
        Ok(Check::new(
            "heat_residual",
            worst,
            tol.heat_residual,
            "relative to 1 + |u_t| + |u_xx|",
        ))
    }));

    checks.push(guarded("terminal", tol.terminal, || {
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.residual_points {
            let s = m.strike() * rng.random_range(1.0..4.0);
            let r = price(&PriceQuery::new(s, m.maturity()), m)?;
            if r.region != Region::Terminal {
                return Err(Error::Region(format!("S = {s} at p = T classified {}", r.region)));
            }
            worst = worst.max((r.value - payoff(s, m.strike())).abs());
        }
        Ok(Check::new(
            "terminal",
            worst,
            tol.terminal,
            "price(S, T) - max(S - K, 0), S >= K",
        ))
    }));

    checks.push(guarded("barrier", tol.barrier, || {
        let mut worst: f64 = 0.0;
        for _ in 0..cfg.residual_points {
            let p = rng.random_range(0.0..m.maturity());
            let g = barrier_level(p, m)?;
            let r = price(&PriceQuery::new(g, p), m)?;
            worst = worst.max(r.value.abs() / g);
            let t = rng.random_range(0.0..m.heat_horizon());
            let x = -tp.drift() * t;
            let scale = (a * x + a * a * t).exp();
            worst = worst.max(u(x, t).abs() / scale);
        }
        Ok(Check::new(
            "barrier",
            worst,
            tol.barrier,
            "price and heat solution on the barrier",
        ))
    }));

    checks.push(guarded("null_space", tol.null_space, || {
        let sol = solve_terminal_constraints(&tp, false)?;
        if sol.dimension() != 1 {
            return Ok(Check::new(
                "null_space",
                f64::INFINITY,
                tol.null_space,
                format!("dimension {} instead of 1", sol.dimension()),
            ));
        }
        let v = sol.normalized()?;
        let expected = [0.0, 0.0, 0.0, -(2.0 * a + 1.0), a * a + a, 1.0];
        let err = v.iter().zip(&expected).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        Ok(Check::new("null_space", err, tol.null_space, "dimension 1, c6 = 1"))
    }));

    checks.push(guarded("psi_coefficients", tol.psi_coefficients, || {
        let sol = solve_terminal_constraints(&tp, true)?;
        if sol.dimension() != 3 {
            return Ok(Check::new(
                "psi_coefficients",
                f64::INFINITY,
                tol.psi_coefficients,
                format!("dimension {} instead of 3", sol.dimension()),
            ));
        }
        let b = a + 1.0;
        let mut worst: f64 = 0.0;
        for v in &sol.basis {
            worst = worst.max(v[..3].iter().fold(0.0, |m, c| m.max(c.abs())));
            let (c4, c5, c6) = (v[3], v[4], v[5]);
            worst = worst.max((v[6] - (-a * c4 - c5 - a * a * c6)).abs());
            worst = worst.max((v[7] - (b * c4 + c5 + b * b * c6)).abs());
        }
        Ok(Check::new(
            "psi_coefficients",
            worst,
            tol.psi_coefficients,
            "dimension 3, k1 and k2",
        ))
    }));

    let sv = SymmetryVector::admissible(&tp);
    let reduced = characteristic_reduce(&sv);

    checks.push(guarded("roots", tol.roots, || {
        let red = reduced.clone()?;
        let err = match red.roots {
            CharacteristicRoots::Distinct(lo, hi) => (lo - a).abs().max((hi - a - 1.0).abs()),
            _ => f64::INFINITY,
        };
        Ok(Check::new("roots", err, tol.roots, "{alpha, alpha + 1}"))
    }));

    checks.push(guarded("terminal_fit", tol.terminal_fit, || {
        let red = reduced.clone()?;
        let fit = fit_terminal(&red, &tp)?;
        let err = (fit.a - 1.0).abs().max((fit.b + 1.0).abs());
        Ok(Check::new(
            "terminal_fit",
            err,
            tol.terminal_fit,
            format!("A = {}, B = {}", fit.a, fit.b),
        ))
    }));

    checks.push(guarded("further_solutions", tol.further_solutions, || {
        let rep = verify_further_solution_constraints(&tp)?;
        let err = rep.constraint_pair_error.max(rep.surviving_solution_error);
        Ok(Check::new(
            "further_solutions",
            err,
            tol.further_solutions,
            format!("{} sample points", rep.sample_points),
        ))
    }));

    checks.push(guarded("isc", tol.isc, || {
        let mut worst: f64 = 0.0;
        for &(x, t) in &heat_points {
            let r = isc_residual(&sv, u, x, t, steps)?;
            let j = jet(&u, x, t, steps);
            let g = eval_generator(&sv, x, t, j.value);
            let scale = 1.0 + (g.xi * j.d_a).abs() + (g.tau * j.d_b).abs() + g.phi.abs();
            worst = worst.max(r.abs() / scale);
        }
        Ok(Check::new(
            "isc",
            worst,
            tol.isc,
            "relative to 1 + |xi u_x| + |tau u_t| + |phi|",
        ))
    }));

    checks.push(guarded("boundary_isc", tol.boundary_isc, || {
        let barrier = BarrierSpec::discounted_strike(&tp);
        let mut worst: f64 = 0.0;
        for &(_, t) in &heat_points {
            let r = boundary_isc_residual(&sv, u, &barrier, barrier.position(t), t, steps)?;
            worst = worst.max(r.abs());
        }
        Ok(Check::new(
            "boundary_isc",
            worst,
            tol.boundary_isc,
            "on the barrier line",
        ))
    }));

    VerifyReport {
        alpha: a,
        market: *m,
        checks,
    }
}

/// Market parameters with the given `α`, keeping `σ`, `K` and `T` of `base`
/// and setting `r = (2α + 1)σ²/2`.
pub fn market_with_alpha(alpha: f64, base: &MarketParams) -> Result<MarketParams> {
    let r = (2.0 * alpha + 1.0) * base.half_variance();
    if r < 0.0 {
        return Err(invalid(
            "alpha",
            format!("alpha = {alpha} needs r = {r} < 0; alpha must be >= -0.5"),
        ));
    }
    MarketParams::new(r, base.sigma(), base.strike(), base.maturity())
}

/// Parses `start:stop:step` into the inclusive grid `start, start + step, ...`.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let bad = |reason: String| invalid("alpha-sweep", reason);
    if parts.len() != 3 {
        return Err(bad(format!("expected start:stop:step, got '{spec}'")));
    }
    let mut nums = [0.0; 3];
    for (n, p) in nums.iter_mut().zip(&parts) {
        *n = p
            .trim()
            .parse::<f64>()
            .map_err(|e| bad(format!("'{p}' is not a number: {e}")))?;
    }
    let [start, stop, step] = nums;
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(bad("bounds and step must be finite".into()));
    }
    if step <= 0.0 || stop < start {
        return Err(bad(format!("need step > 0 and stop >= start, got '{spec}'")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    if count > 10_000 {
        return Err(bad(format!("{count} values is too many")));
    }
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

/// Runs the suite for each `α`, deriving `r` from `base`.
pub fn run_sweep(
    alphas: &[f64],
    base: &MarketParams,
    tol: &Tolerances,
    cfg: &SuiteConfig,
) -> Result<Vec<VerifyReport>> {
    alphas
        .iter()
        .map(|&a| market_with_alpha(a, base).map(|m| run_suite(&m, tol, cfg)))
        .collect()
}
