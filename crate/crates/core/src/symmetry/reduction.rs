//! Characteristic reduction for generators `c₄∂x + c₆∂t - c₅u∂u`.
//!
//! The characteristic system `dx/c₄ = dt/c₆ = du/(-c₅u)` has invariants
//! `I₁ = x - (c₄/c₆)t` and `u e^{(c₅/c₆)t}`, so invariant solutions are
//! `u = h(I₁) e^{-(c₅/c₆)t}`. Substituting into `u_t = u_xx` gives
//! `h'' = (-c₄/c₆)h' - (c₅/c₆)h`.

use nalgebra::DMatrix;

use super::constraints::collocation_nodes;
use super::SymmetryVector;
use crate::error::{Error, Result};
use crate::linalg::least_squares;
use crate::transform::{terminal_condition_heat, TransformParams};

/// Largest relative residual accepted by [`fit_terminal_data`].
pub const FIT_TOL: f64 = 1e-9;

/// Roots of `λ² - bλ - c = 0`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum CharacteristicRoots {
    /// `(low, high)`.
    Distinct(f64, f64),
    Repeated(f64),
    Complex {
        re: f64,
        im: f64,
    },
}

impl CharacteristicRoots {
    fn solve(b: f64, c: f64) -> Self {
        let disc = b * b + 4.0 * c;
        let scale = b * b + (4.0 * c).abs();
        if disc.abs() <= 1e-14 * scale {
            return Self::Repeated(0.5 * b);
        }
        if disc < 0.0 {
            return Self::Complex {
                re: 0.5 * b,
                im: 0.5 * (-disc).sqrt(),
            };
        }
        let sq = disc.sqrt();
        let (r1, r2) = if b == 0.0 {
            (0.5 * sq, -0.5 * sq)
        } else {
            // Avoid cancellation: take the large-magnitude root first, then
            // use the product of the roots (= -c).
            let q = 0.5 * (b + b.signum() * sq);
            (q, -c / q)
        };
        Self::Distinct(r1.min(r2), r1.max(r2))
    }

    /// The two fundamental solutions of the reduced ODE at `i1`; the first
    /// carries `A`, the second `B`.
    pub fn modes(&self, i1: f64) -> (f64, f64) {
        match *self {
            Self::Distinct(lo, hi) => ((hi * i1).exp(), (lo * i1).exp()),
            Self::Repeated(l) => ((l * i1).exp(), i1 * (l * i1).exp()),
            Self::Complex { re, im } => {
                let e = (re * i1).exp();
                (e * (im * i1).cos(), e * (im * i1).sin())
            }
        }
    }

    /// Growth rate used to weight fitting rows.
    fn weight_rate(&self) -> f64 {
        match *self {
            Self::Distinct(lo, _) => lo,
            Self::Repeated(l) => l,
            Self::Complex { re, .. } => re,
        }
    }
}

/// Outcome of reducing `u_t = u_xx` by a translation-scaling generator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ReductionResult {
    /// `s` in `I₁ = x + s t`.
    pub invariant_slope: f64,
    /// `m` in `u = h(I₁) e^{m t}`.
    pub multiplier_exponent: f64,
    /// `b` in `h'' = b h' + c h`.
    pub ode_b: f64,
    /// `c` in `h'' = b h' + c h`.
    pub ode_c: f64,
    pub roots: CharacteristicRoots,
}

impl ReductionResult {
    pub fn invariant(&self, x: f64, t: f64) -> f64 {
        x + self.invariant_slope * t
    }

    /// `u(x, t) = (A h₁(I₁) + B h₂(I₁)) e^{m t}`.
    pub fn solution(&self, fit: &TerminalFit, x: f64, t: f64) -> f64 {
        let (h1, h2) = self.roots.modes(self.invariant(x, t));
        (fit.a * h1 + fit.b * h2) * (self.multiplier_exponent * t).exp()
    }
}

pub fn characteristic_reduce(sv: &SymmetryVector) -> Result<ReductionResult> {
    let [c1, c2, c3, c4, c5, c6] = sv.c;
    let scale = sv.c.iter().fold(0.0f64, |m, c| m.max(c.abs())).max(f64::MIN_POSITIVE);
    if [c1, c2, c3].iter().any(|c| c.abs() > 1e-12 * scale) {
        return Err(Error::DegenerateGenerator("reduction requires c1 = c2 = c3 = 0".into()));
    }
    if sv.psi.is_some_and(|p| p.k1 != 0.0 || p.k2 != 0.0) {
        return Err(Error::DegenerateGenerator("reduction requires psi = 0".into()));
    }
    if c6.abs() <= 1e-12 * scale || c6 == 0.0 {
        return Err(Error::DegenerateGenerator(
            "c6 = 0: the generator has no time component".into(),
        ));
    }
    let slope = -c4 / c6;
    let exponent = -c5 / c6;
    Ok(ReductionResult {
        invariant_slope: slope,
        multiplier_exponent: exponent,
        ode_b: slope,
        ode_c: exponent,
        roots: CharacteristicRoots::solve(slope, exponent),
    })
}

/// Constants of `u(x, 0) = A h₁(x) + B h₂(x)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TerminalFit {
    pub a: f64,
    pub b: f64,
    /// Largest weighted residual over the nodes relative to the largest
    /// weighted datum.
    pub max_residual: f64,
}

/// Least-squares fit of the reduced solution at `t = 0` to `data` on the
/// collocation nodes.
pub fn fit_terminal_data<F: Fn(f64) -> f64>(red: &ReductionResult, data: F) -> Result<TerminalFit> {
    let nodes = collocation_nodes();
    let rate = red.roots.weight_rate();
    let weights: Vec<f64> = nodes.iter().map(|&x| (-rate * x).exp()).collect();
    let design = DMatrix::from_fn(nodes.len(), 2, |i, j| {
        let (h1, h2) = red.roots.modes(nodes[i]);
        weights[i] * if j == 0 { h1 } else { h2 }
    });
    let rhs = DMatrix::from_fn(nodes.len(), 1, |i, _| weights[i] * data(nodes[i]));
    let sol = least_squares(&design, &rhs, 1e-13)?;
    let (a, b) = (sol[(0, 0)], sol[(1, 0)]);
    let resid = &design * &sol - &rhs;
    let scale = rhs.amax();
    let max_residual = if scale > 0.0 {
        resid.amax() / scale
    } else {
        resid.amax()
    };
    if max_residual > FIT_TOL {
        return Err(Error::FitFailure { residual: max_residual });
    }
    Ok(TerminalFit { a, b, max_residual })
}

/// Fits against the transformed call payoff on `x > 0`.
pub fn fit_terminal(red: &ReductionResult, tp: &TransformParams) -> Result<TerminalFit> {
    fit_terminal_data(red, |x| terminal_condition_heat(x, tp))
}
