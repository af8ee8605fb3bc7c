//! Change of variables between Black-Scholes coordinates `(S, p, V)` and
//! heat-equation coordinates `(x, t, u)`.
//!
//! The chain is
//!
//! ```text
//! t = (σ²/2)(T - p)       time to maturity, rescaled
//! S = K eˣ                log-moneyness
//! w = e^{αx} V            removes the first-order term, α = (2r/σ² - 1)/2
//! y = e^{βt} w            removes the zeroth-order term, β = (α + 1)²
//! u = y / K               normalises the payoff
//! ```
//!
//! after which `V_p + ½σ²S²V_SS + rSV_S - rV = 0` becomes `u_t = u_xx`.
//! The production path applies the three exponential factors as one fused
//! multiplier `e^{αx+βt}/K`; [`stages`] exposes the intermediate values.

use crate::error::{invalid, Error, Result};
use crate::stencil::{central_jet, jet, snap_step, StepSizes, DEFAULT_STEP};

/// Risk-free rate, volatility, strike and maturity of the Black-Scholes problem.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MarketParams {
    r: f64,
    sigma: f64,
    strike: f64,
    maturity: f64,
}

impl MarketParams {
    pub fn new(r: f64, sigma: f64, strike: f64, maturity: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(invalid("sigma", format!("volatility must be > 0, got {sigma}")));
        }
        if !(strike.is_finite() && strike > 0.0) {
            return Err(invalid("strike", format!("strike must be > 0, got {strike}")));
        }
        if !(maturity.is_finite() && maturity > 0.0) {
            return Err(invalid("maturity", format!("maturity must be > 0, got {maturity}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(invalid("rate", format!("risk-free rate must be >= 0, got {r}")));
        }
        Ok(Self {
            r,
            sigma,
            strike,
            maturity,
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    /// `σ²/2`, the factor between calendar time and heat time.
    pub fn half_variance(&self) -> f64 {
        0.5 * self.sigma * self.sigma
    }

    /// Heat time corresponding to `p = 0`, i.e. `σ²T/2`.
    pub fn heat_horizon(&self) -> f64 {
        self.half_variance() * self.maturity
    }

    pub fn transform_params(&self) -> TransformParams {
        derive_params(self)
    }
}

impl Default for MarketParams {
    /// r = 5%, σ = 20%, K = 100, T = 1.
    fn default() -> Self {
        Self {
            r: 0.05,
            sigma: 0.2,
            strike: 100.0,
            maturity: 1.0,
        }
    }
}

/// Exponents of the two exponential substitutions.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TransformParams {
    pub alpha: f64,
    pub beta: f64,
}

impl TransformParams {
    /// Builds the pair from `α` alone; `β = (α + 1)²` always holds.
    pub fn from_alpha(alpha: f64) -> Self {
        Self {
            alpha,
            beta: (alpha + 1.0) * (alpha + 1.0),
        }
    }

    /// `2α + 1`, the speed of the moving barrier in heat coordinates.
    pub fn drift(&self) -> f64 {
        2.0 * self.alpha + 1.0
    }
}

pub fn derive_params(m: &MarketParams) -> TransformParams {
    let k = 2.0 * m.r / (m.sigma * m.sigma);
    TransformParams {
        alpha: 0.5 * (k - 1.0),
        beta: 0.25 * (k + 1.0) * (k + 1.0),
    }
}

/// A point `(S, p, V)` on the Black-Scholes side.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct BsPoint {
    pub spot: f64,
    pub time: f64,
    pub value: f64,
}

/// A point `(x, t, u)` on the heat side.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct HeatPoint {
    pub x: f64,
    pub t: f64,
    pub u: f64,
}

/// Values of the dependent variable after each substitution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TransformStages {
    pub v: f64,
    pub w: f64,
    pub y: f64,
    pub u: f64,
}

fn check_calendar_time(p: f64, m: &MarketParams) -> Result<()> {
    if !(p.is_finite() && (0.0..=m.maturity).contains(&p)) {
        return Err(Error::Domain(format!(
            "calendar time p = {p} outside [0, {}]",
            m.maturity
        )));
    }
    Ok(())
}

fn check_spot(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::Domain(format!("spot S = {s} must be > 0")));
    }
    Ok(())
}

/// Log-moneyness `ln(S/K)`.
pub fn log_moneyness(spot: f64, m: &MarketParams) -> Result<f64> {
    check_spot(spot)?;
    Ok((spot / m.strike).ln())
}

/// Heat time `(σ²/2)(T - p)`.
pub fn heat_time(p: f64, m: &MarketParams) -> Result<f64> {
    check_calendar_time(p, m)?;
    Ok(m.half_variance() * (m.maturity - p))
}

/// Calendar time `T - 2t/σ²`, clamped into `[0, T]` against rounding.
pub fn calendar_time(t: f64, m: &MarketParams) -> Result<f64> {
    let horizon = m.heat_horizon();
    let slack = 1e-12 * horizon.max(1.0);
    if !(t.is_finite() && t >= -slack && t <= horizon + slack) {
        return Err(Error::Domain(format!("heat time t = {t} outside [0, {horizon}]")));
    }
    Ok((m.maturity - t / m.half_variance()).clamp(0.0, m.maturity))
}

pub fn to_heat(pt: BsPoint, m: &MarketParams) -> Result<HeatPoint> {
    let x = log_moneyness(pt.spot, m)?;
    let t = heat_time(pt.time, m)?;
    let tp = derive_params(m);
    let u = (tp.alpha * x + tp.beta * t).exp() * pt.value / m.strike;
    Ok(HeatPoint { x, t, u })
}

pub fn from_heat(pt: HeatPoint, m: &MarketParams) -> Result<BsPoint> {
    let time = calendar_time(pt.t, m)?;
    let tp = derive_params(m);
    let spot = m.strike * pt.x.exp();
    let value = m.strike * pt.u * (-(tp.alpha * pt.x + tp.beta * pt.t)).exp();
    Ok(BsPoint { spot, time, value })
}

/// Applies the substitutions one at a time; debugging aid only.
pub fn stages(pt: BsPoint, m: &MarketParams) -> Result<TransformStages> {
    let x = log_moneyness(pt.spot, m)?;
    let t = heat_time(pt.time, m)?;
    let tp = derive_params(m);
    let w = (tp.alpha * x).exp() * pt.value;
    let y = (tp.beta * t).exp() * w;
    Ok(TransformStages {
        v: pt.value,
        w,
        y,
        u: y / m.strike,
    })
}

/// Image of the call payoff `max(S - K, 0)` at `t = 0`.
pub fn terminal_condition_heat(x: f64, tp: &TransformParams) -> f64 {
    if x >= 0.0 {
        ((tp.alpha + 1.0) * x).exp() - (tp.alpha * x).exp()
    } else {
        0.0
    }
}

/// Central-difference estimate of `V_p + ½σ²S²V_SS + rSV_S - rV` at `(S, p)`.
///
/// `rel_step` is scaled by `S` and `T` and snapped to a power of two. The
/// stencil must stay inside `S > 0` and `[0, T]`.
pub fn bs_residual<F>(value_fn: F, spot: f64, p: f64, m: &MarketParams, rel_step: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    check_spot(spot)?;
    check_calendar_time(p, m)?;
    if !(rel_step.is_finite() && rel_step > 0.0) {
        return Err(Error::StepSize(format!("relative step must be > 0, got {rel_step}")));
    }
    let hs = snap_step(rel_step * spot);
    let hp = snap_step(rel_step * m.maturity);
    if spot - hs <= 0.0 {
        return Err(Error::StepSize(format!("stencil S - h = {} leaves S > 0", spot - hs)));
    }
    if p - hp < 0.0 || p + hp > m.maturity {
        return Err(Error::StepSize(format!(
            "stencil [{}, {}] leaves [0, {}]",
            p - hp,
            p + hp,
            m.maturity
        )));
    }
    let j = central_jet(&value_fn, spot, p, hs, hp);
    Ok(j.d_b + m.half_variance() * spot * spot * j.d_aa + m.r * spot * j.d_a - m.r * j.value)
}

/// [`bs_residual`] with the default relative step.
pub fn bs_residual_default<F>(value_fn: F, spot: f64, p: f64, m: &MarketParams) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    bs_residual(value_fn, spot, p, m, DEFAULT_STEP)
}

/// Central-difference estimate of `u_t - u_xx` at `(x, t)`.
pub fn heat_residual<F>(u_fn: F, x: f64, t: f64, steps: StepSizes) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    steps.validate()?;
    let j = jet(&u_fn, x, t, steps);
    Ok(j.d_b - j.d_aa)
}
