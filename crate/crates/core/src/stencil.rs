//! Central finite-difference stencils shared by the PDE and invariant
//! surface residuals.

use crate::error::{Error, Result};

/// Default step used by every residual operator.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Accuracy order of the central stencils.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StencilOrder {
    #[default]
    Second,
    /// Five-point stencils; rounding error near `1e-9 |u|` at `h = 1e-3`.
    Fourth,
}

/// Absolute step sizes in the space-like and time-like coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub space: f64,
    pub time: f64,
    pub order: StencilOrder,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self::uniform(DEFAULT_STEP)
    }
}

impl StepSizes {
    pub fn uniform(h: f64) -> Self {
        Self {
            space: h,
            time: h,
            order: StencilOrder::Second,
        }
    }

    /// Fourth-order stencils with step `h` in both coordinates.
    pub fn fourth_order(h: f64) -> Self {
        Self {
            order: StencilOrder::Fourth,
            ..Self::uniform(h)
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        for (name, h) in [("space", self.space), ("time", self.time)] {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::StepSize(format!("{name} step must be finite and > 0, got {h}")));
            }
        }
        Ok(())
    }
}

/// Rounds a step to the nearest power of two so that `z ± h` is exact for
/// most `z` and the stencil only sees rounding from the function itself.
pub fn snap_step(h: f64) -> f64 {
    2f64.powi(h.log2().round() as i32)
}

/// First and second partial derivatives of a two-variable function at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub value: f64,
    pub d_a: f64,
    pub d_b: f64,
    pub d_aa: f64,
    pub d_ab: f64,
}

/// Evaluates value, first derivatives, `f_aa` and the mixed derivative
/// with central differences of the requested order.
pub fn jet<F: Fn(f64, f64) -> f64>(f: &F, a: f64, b: f64, steps: StepSizes) -> Jet2 {
    let (ha, hb) = (steps.space, steps.time);
    match steps.order {
        StencilOrder::Second => central_jet(f, a, b, ha, hb),
        StencilOrder::Fourth => {
            let f0 = f(a, b);
            let five = |g: &dyn Fn(f64) -> f64, h: f64| {
                let (p1, m1, p2, m2) = (g(h), g(-h), g(2.0 * h), g(-2.0 * h));
                (
                    (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h),
                    (-p2 + 16.0 * p1 - 30.0 * f0 + 16.0 * m1 - m2) / (12.0 * h * h),
                )
            };
            let (d_a, d_aa) = five(&|d| f(a + d, b), ha);
            let (d_b, _) = five(&|d| f(a, b + d), hb);
            let mixed = |s: f64| {
                (f(a + s * ha, b + s * hb) - f(a + s * ha, b - s * hb) - f(a - s * ha, b + s * hb)
                    + f(a - s * ha, b - s * hb))
                    / (4.0 * s * s * ha * hb)
            };
            Jet2 {
                value: f0,
                d_a,
                d_b,
                d_aa,
                d_ab: (4.0 * mixed(1.0) - mixed(2.0)) / 3.0,
            }
        }
    }
}

/// Second-order central differences with separate steps.
pub fn central_jet<F: Fn(f64, f64) -> f64>(f: &F, a: f64, b: f64, ha: f64, hb: f64) -> Jet2 {
    let f0 = f(a, b);
    let fap = f(a + ha, b);
    let fam = f(a - ha, b);
    let fbp = f(a, b + hb);
    let fbm = f(a, b - hb);
    let d_ab = (f(a + ha, b + hb) - f(a + ha, b - hb) - f(a - ha, b + hb) + f(a - ha, b - hb)) / (4.0 * ha * hb);
    Jet2 {
        value: f0,
        d_a: (fap - fam) / (2.0 * ha),
        d_b: (fbp - fbm) / (2.0 * hb),
        d_aa: (fap - 2.0 * f0 + fam) / (ha * ha),
        d_ab,
    }
}
