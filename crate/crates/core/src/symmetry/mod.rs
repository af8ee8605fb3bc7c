//! Point symmetries of the heat equation `u_t = u_xx` and the invariant
//! surface condition.
//!
//! A generator is the linear combination
//!
//! ```text
//! X = ξ ∂x + τ ∂t + φ ∂u
//! ξ = 4c₁xt + c₂x + 2c₃t + c₄
//! τ = 4c₁t² + 2c₂t + c₆
//! φ = c₁u(-2t - x²) - c₃ux - c₅u + ψ(x, t)
//! ```
//!
//! with ψ drawn from the two-exponential family
//! `k₁e^{αx+α²t} + k₂e^{(α+1)x+(α+1)²t}`, each term an exact heat solution.
//! A solution `u(x, t)` is invariant under `X` iff `ξu_x + τu_t = φ`.

mod constraints;
mod further;
mod reduction;

pub use constraints::{
    collocation_nodes, solve_terminal_constraints, solve_terminal_constraints_at, subalgebra_generators,
    ConstraintSolution, COLLOCATION_NODES, COLLOCATION_RANGE, NULL_SPACE_TOL,
};
pub use further::{
    verify_further_solution_constraints, verify_further_solution_constraints_with, DrawOutcome, FurtherSolutionReport,
    GeneratorDraw,
};
pub use reduction::{
    characteristic_reduce, fit_terminal, fit_terminal_data, CharacteristicRoots, ReductionResult, TerminalFit,
};

use crate::error::{Error, Result};
use crate::stencil::{jet, StepSizes};
use crate::transform::{MarketParams, TransformParams};

/// Coefficients of `ψ = k₁e^{αx+α²t} + k₂e^{(α+1)x+(α+1)²t}`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PsiSpec {
    pub k1: f64,
    pub k2: f64,
    pub alpha: f64,
}

impl PsiSpec {
    pub fn new(k1: f64, k2: f64, alpha: f64) -> Self {
        Self { k1, k2, alpha }
    }

    fn modes(&self, x: f64, t: f64) -> (f64, f64) {
        let a = self.alpha;
        let b = a + 1.0;
        ((a * x + a * a * t).exp(), (b * x + b * b * t).exp())
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        let (e1, e2) = self.modes(x, t);
        self.k1 * e1 + self.k2 * e2
    }

    pub fn d_x(&self, x: f64, t: f64) -> f64 {
        let (e1, e2) = self.modes(x, t);
        self.k1 * self.alpha * e1 + self.k2 * (self.alpha + 1.0) * e2
    }
}

/// A heat-equation generator: `c₁..c₆` plus an optional ψ term.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SymmetryVector {
    pub c: [f64; 6],
    pub psi: Option<PsiSpec>,
}

impl SymmetryVector {
    pub fn new(c: [f64; 6]) -> Self {
        Self { c, psi: None }
    }

    pub fn with_psi(c: [f64; 6], psi: PsiSpec) -> Self {
        Self { c, psi: Some(psi) }
    }

    /// The classical generator `X_i` (1-based, `1..=6`).
    pub fn classical(i: usize) -> Self {
        assert!((1..=6).contains(&i), "classical generators are X1..X6");
        let mut c = [0.0; 6];
        c[i - 1] = 1.0;
        Self::new(c)
    }

    /// `-(2α+1)∂x + ∂t - (α²+α)u∂u`, normalised to `c₆ = 1`.
    pub fn admissible(tp: &TransformParams) -> Self {
        let a = tp.alpha;
        Self::new([0.0, 0.0, 0.0, -(2.0 * a + 1.0), a * a + a, 1.0])
    }

    /// Coefficients in the order `c₁..c₆[, k₁, k₂]`.
    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = self.c.to_vec();
        if let Some(psi) = self.psi {
            v.extend([psi.k1, psi.k2]);
        }
        v
    }

    fn psi_at(&self, x: f64, t: f64) -> f64 {
        self.psi.map_or(0.0, |p| p.eval(x, t))
    }
}

/// `(ξ, τ, φ)` at a point.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct VectorFieldEval {
    pub xi: f64,
    pub tau: f64,
    pub phi: f64,
}

/// Closed-form first partials of the generator coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorPartials {
    pub xi_x: f64,
    pub xi_u: f64,
    pub tau_x: f64,
    pub tau_u: f64,
    pub phi_x: f64,
    pub phi_u: f64,
}

pub fn eval_generator(sv: &SymmetryVector, x: f64, t: f64, u: f64) -> VectorFieldEval {
    let [c1, c2, c3, c4, c5, c6] = sv.c;
    VectorFieldEval {
        xi: 4.0 * c1 * x * t + c2 * x + 2.0 * c3 * t + c4,
        tau: 4.0 * c1 * t * t + 2.0 * c2 * t + c6,
        phi: c1 * u * (-2.0 * t - x * x) - c3 * u * x - c5 * u + sv.psi_at(x, t),
    }
}

pub fn generator_partials(sv: &SymmetryVector, x: f64, t: f64, u: f64) -> GeneratorPartials {
    let [c1, c2, c3, _, c5, _] = sv.c;
    GeneratorPartials {
        xi_x: 4.0 * c1 * t + c2,
        xi_u: 0.0,
        tau_x: 0.0,
        tau_u: 0.0,
        phi_x: -2.0 * c1 * u * x - c3 * u + sv.psi.map_or(0.0, |p| p.d_x(x, t)),
        phi_u: c1 * (-2.0 * t - x * x) - c3 * x - c5,
    }
}

/// `ξu_x + τu_t - φ` with derivatives of `u_fn` by central differences.
pub fn isc_residual<F>(sv: &SymmetryVector, u_fn: F, x: f64, t: f64, steps: StepSizes) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    steps.validate()?;
    let j = jet(&u_fn, x, t, steps);
    let g = eval_generator(sv, x, t, j.value);
    Ok(g.xi * j.d_a + g.tau * j.d_b - g.phi)
}

/// A barrier `x = x_b(t)` in heat coordinates with boundary value `u = G(t)`.
pub struct BarrierSpec {
    curve: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for BarrierSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BarrierSpec")
            .field("x_b(0)", &(self.curve)(0.0))
            .finish_non_exhaustive()
    }
}

impl BarrierSpec {
    pub fn new<C, G>(curve: C, value: G) -> Self
    where
        C: Fn(f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            curve: Box::new(curve),
            value: Box::new(value),
        }
    }

    /// The discounted strike `S = Ke^{-r(T-p)}`, i.e. `x = -(2α+1)t`, with `G ≡ 0`.
    pub fn discounted_strike(tp: &TransformParams) -> Self {
        let drift = tp.drift();
        Self::new(move |t| -drift * t, |_| 0.0)
    }

    /// Maps the Black-Scholes barrier `g(p) = Ke^{-r(T-p)}` through the
    /// coordinate change point by point.
    pub fn from_market(m: &MarketParams) -> Self {
        let m = *m;
        Self::new(
            move |t| {
                let p = m.maturity() - t / m.half_variance();
                let level = m.strike() * (-m.r() * (m.maturity() - p)).exp();
                (level / m.strike()).ln()
            },
            |_| 0.0,
        )
    }

    pub fn position(&self, t: f64) -> f64 {
        (self.curve)(t)
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.value)(t)
    }
}

/// Tolerance on `|x - x_b(t)|` accepted by [`boundary_isc_residual`].
pub const ON_BARRIER_TOL: f64 = 1e-9;

/// Left minus right side of the differentiated invariant surface condition
/// on a barrier:
///
/// `ξ_x u_x + ξ_u u_x² + ξu_xx + τ_x u_t + τ_u u_x u_t + τu_xt - φ_x - φ_u u_x`.
///
/// Coefficient partials are analytic; derivatives of `u_fn` use central
/// differences with `steps`.
pub fn boundary_isc_residual<F>(
    sv: &SymmetryVector,
    u_fn: F,
    barrier: &BarrierSpec,
    x: f64,
    t: f64,
    steps: StepSizes,
) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    steps.validate()?;
    let xb = barrier.position(t);
    let distance = (x - xb).abs();
    let tolerance = ON_BARRIER_TOL * xb.abs().max(1.0);
    if distance.is_nan() || distance > tolerance {
        return Err(Error::OffBarrier { distance, tolerance });
    }
    let j = jet(&u_fn, x, t, steps);
    let (ux, ut, uxx, uxt) = (j.d_a, j.d_b, j.d_aa, j.d_ab);
    let g = eval_generator(sv, x, t, j.value);
    let d = generator_partials(sv, x, t, j.value);
    Ok(
        d.xi_x * ux + d.xi_u * ux * ux + g.xi * uxx + d.tau_x * ut + d.tau_u * ux * ut + g.tau * uxt
            - d.phi_x
            - d.phi_u * ux,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::heat_solution;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn classical_generator_values() {
        let g = eval_generator(&SymmetryVector::classical(4), 0.7, 0.3, 2.0);
        assert_eq!((g.xi, g.tau, g.phi), (1.0, 0.0, 0.0));

        let g = eval_generator(&SymmetryVector::classical(3), 2.0, 1.0, 3.0);
        assert_eq!((g.xi, g.tau, g.phi), (2.0, 0.0, -6.0));

        let g = eval_generator(&SymmetryVector::classical(1), 1.0, 1.0, 1.0);
        assert_eq!((g.xi, g.tau, g.phi), (4.0, 4.0, -3.0));
    }

    #[test]
    fn isc_residual_examples() {
        let steps = StepSizes::fourth_order(1e-3);
        let tp = TransformParams::from_alpha(0.75);
        let sv = SymmetryVector::admissible(&tp);
        for &(x, t) in &[(0.2, 0.1), (1.3, 0.02), (-0.4, 0.5), (2.0, 0.3)] {
            let r = isc_residual(&sv, |x, t| heat_solution(x, t, &tp), x, t, steps).unwrap();
            assert!(r.abs() < 1e-6, "residual {r} at ({x}, {t})");
        }
        let r = isc_residual(&SymmetryVector::classical(5), |_, _| 0.0, 0.3, 0.3, steps).unwrap();
        assert_eq!(r, 0.0);
        let r = isc_residual(&SymmetryVector::classical(4), |x, _| x, 0.3, 0.3, steps).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn boundary_residual_examples() {
        let steps = StepSizes::default();
        let tp = TransformParams::from_alpha(0.75);
        let barrier = BarrierSpec::discounted_strike(&tp);
        let sv = SymmetryVector::admissible(&tp);
        for &t in &[0.0, 0.05, 0.2, 0.7] {
            let x = barrier.position(t);
            let r = boundary_isc_residual(&sv, |x, t| heat_solution(x, t, &tp), &barrier, x, t, steps).unwrap();
            assert!(r.abs() < 1e-5, "residual {r} at t = {t}");
        }

        let zero = SymmetryVector::new([0.0; 6]);
        let r = boundary_isc_residual(&zero, |x, t| (x * t).sin() + 4.0, &barrier, -0.25, 0.1, steps).unwrap();
        assert_eq!(r, 0.0);

        let r =
            boundary_isc_residual(&SymmetryVector::classical(4), |x, _| x * x, &barrier, -0.25, 0.1, steps).unwrap();
        assert_relative_eq!(r, 2.0, epsilon = 1e-6);
    }

    #[test]
    fn boundary_residual_rejects_points_off_the_barrier() {
        let tp = TransformParams::from_alpha(0.0);
        let barrier = BarrierSpec::discounted_strike(&tp);
        let err = boundary_isc_residual(
            &SymmetryVector::classical(4),
            |x, _| x,
            &barrier,
            0.5,
            0.1,
            StepSizes::default(),
        );
        assert!(matches!(err, Err(Error::OffBarrier { .. })));
    }

    #[test]
    fn market_barrier_matches_closed_form_line() {
        let m = MarketParams::new(0.07, 0.3, 90.0, 2.0).unwrap();
        let tp = m.transform_params();
        let a = BarrierSpec::from_market(&m);
        let b = BarrierSpec::discounted_strike(&tp);
        for i in 0..=10 {
            let t = m.heat_horizon() * i as f64 / 10.0;
            assert_relative_eq!(a.position(t), b.position(t), epsilon = 1e-13);
        }
        assert_eq!(a.value(0.1), 0.0);
    }

    #[test]
    fn partials_match_finite_differences_of_coefficients() {
        let tp = TransformParams::from_alpha(0.4);
        let sv = SymmetryVector::with_psi([0.3, -0.2, 0.5, 1.1, -0.7, 0.9], PsiSpec::new(0.6, -0.4, tp.alpha));
        let (x, t, u) = (0.4, 0.3, 1.7);
        let h = 1e-6;
        let d = generator_partials(&sv, x, t, u);
        let e = |x, u| eval_generator(&sv, x, t, u);
        let fx = |f: fn(VectorFieldEval) -> f64| (f(e(x + h, u)) - f(e(x - h, u))) / (2.0 * h);
        let fu = |f: fn(VectorFieldEval) -> f64| (f(e(x, u + h)) - f(e(x, u - h))) / (2.0 * h);
        assert_relative_eq!(d.xi_x, fx(|g| g.xi), epsilon = 1e-8);
        assert_relative_eq!(d.phi_x, fx(|g| g.phi), epsilon = 1e-8);
        assert_relative_eq!(d.phi_u, fu(|g| g.phi), epsilon = 1e-8);
        assert_relative_eq!(d.tau_x, fx(|g| g.tau), epsilon = 1e-8);
        assert_relative_eq!(d.xi_u, fu(|g| g.xi), epsilon = 1e-8);
    }

    proptest! {
        #[test]
        fn psi_solves_heat_equation(k1 in -2.0..2.0f64, k2 in -2.0..2.0f64, alpha in -1.5..1.5f64,
                                    x in -1.0..1.0f64, t in 0.0..0.5f64) {
            let psi = PsiSpec::new(k1, k2, alpha);
            let r = crate::transform::heat_residual(|x, t| psi.eval(x, t), x, t, StepSizes::fourth_order(1e-3)).unwrap();
            prop_assert!(r.abs() < 1e-8 * (1.0 + psi.eval(x, t).abs()), "residual {}", r);
        }

        #[test]
        fn eval_is_linear_in_coefficients(a in proptest::array::uniform8(-3.0..3.0f64),
                                          b in proptest::array::uniform8(-3.0..3.0f64),
                                          s in -2.0..2.0f64,
                                          x in -2.0..2.0f64, t in 0.0..1.0f64, u in -2.0..2.0f64) {
            let alpha = 0.3;
            let mk = |v: [f64; 8]| SymmetryVector::with_psi(
                [v[0], v[1], v[2], v[3], v[4], v[5]], PsiSpec::new(v[6], v[7], alpha));
            let mut comb = [0.0; 8];
            for i in 0..8 { comb[i] = a[i] + s * b[i]; }
            let ga = eval_generator(&mk(a), x, t, u);
            let gb = eval_generator(&mk(b), x, t, u);
            let gc = eval_generator(&mk(comb), x, t, u);
            let scale = 1.0 + ga.phi.abs() + s.abs() * gb.phi.abs();
            prop_assert!((gc.xi - (ga.xi + s * gb.xi)).abs() < 1e-12 * scale * 10.0);
            prop_assert!((gc.tau - (ga.tau + s * gb.tau)).abs() < 1e-12 * scale * 10.0);
            prop_assert!((gc.phi - (ga.phi + s * gb.phi)).abs() < 1e-12 * scale * 10.0);
        }
    }
}
