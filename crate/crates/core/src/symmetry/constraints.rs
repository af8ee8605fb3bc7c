//! Which generators admit the call payoff as terminal data.
//!
//! On `t = 0` the invariant surface condition reads `ξf' + τu_t = φ` with
//! `u = f(x) = e^{(α+1)x} - e^{αx}` for `x > 0`. The heat equation gives
//! `u_t = u_xx = f''`, so the condition is linear in the generator
//! coefficients. It is collocated at Chebyshev nodes and the admissible
//! coefficient vectors are read off as the numerical null space.
//!
//! Every row is scaled by `e^{-αx}`, which turns the residual into a
//! combination of `{1, x, x², eˣ, xeˣ, x²eˣ}` independent of `α`.

use nalgebra::DMatrix;

use super::{eval_generator, PsiSpec, SymmetryVector};
use crate::error::{Error, Result};
use crate::linalg::{chebyshev_nodes, column_to_vec, dvec, least_squares, null_space, rank};
use crate::transform::{terminal_condition_heat, TransformParams};

pub const COLLOCATION_NODES: usize = 50;
pub const COLLOCATION_RANGE: (f64, f64) = (0.1, 5.0);
/// Relative singular-value threshold for the null space.
pub const NULL_SPACE_TOL: f64 = 1e-10;

/// Number of independent functions the weighted residual can contain.
const RESIDUAL_BASIS_DIM: usize = 6;

pub fn collocation_nodes() -> Vec<f64> {
    chebyshev_nodes(COLLOCATION_NODES, COLLOCATION_RANGE.0, COLLOCATION_RANGE.1)
}

/// Admissible coefficient space, one basis vector per entry, each of
/// length 6 (`c₁..c₆`) or 8 (`c₁..c₆, k₁, k₂`).
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ConstraintSolution {
    pub alpha: f64,
    pub with_psi: bool,
    pub basis: Vec<Vec<f64>>,
    pub singular_values: Vec<f64>,
}

impl ConstraintSolution {
    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    /// The single basis vector scaled to `c₆ = 1`.
    pub fn normalized(&self) -> Result<Vec<f64>> {
        if self.dimension() != 1 {
            return Err(Error::DegenerateGenerator(format!(
                "expected a one-dimensional solution, found dimension {}",
                self.dimension()
            )));
        }
        let v = &self.basis[0];
        if v[5].abs() < 1e-12 {
            return Err(Error::DegenerateGenerator("basis vector has c6 = 0".into()));
        }
        Ok(v.iter().map(|c| c / v[5]).collect())
    }

    /// Distance of `coeffs` from the admissible space, relative to its norm.
    /// The basis is orthonormal.
    pub fn distance(&self, coeffs: &[f64]) -> f64 {
        let norm = coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let mut rest = coeffs.to_vec();
        for b in &self.basis {
            let dot: f64 = b.iter().zip(coeffs).map(|(a, c)| a * c).sum();
            for (r, bi) in rest.iter_mut().zip(b) {
                *r -= dot * bi;
            }
        }
        rest.iter().map(|c| c * c).sum::<f64>().sqrt() / norm
    }

    /// The admissible generator with the given `(c₄, c₅, c₆)`.
    pub fn complete(&self, c4: f64, c5: f64, c6: f64) -> Result<SymmetryVector> {
        let target = [c4, c5, c6];
        let dim = self.dimension();
        let sub = DMatrix::from_fn(3, dim, |i, j| self.basis[j][3 + i]);
        let rhs = DMatrix::from_column_slice(3, 1, &target);
        let w = least_squares(&sub, &rhs, NULL_SPACE_TOL)?;
        let mut coeffs = vec![0.0; self.basis[0].len()];
        for (j, b) in self.basis.iter().enumerate() {
            for (c, bi) in coeffs.iter_mut().zip(b) {
                *c += w[(j, 0)] * bi;
            }
        }
        let miss = (0..3).map(|i| (coeffs[3 + i] - target[i]).abs()).fold(0.0, f64::max);
        if miss > 1e-9 * (1.0 + c4.abs() + c5.abs() + c6.abs()) {
            return Err(Error::DegenerateGenerator(format!(
                "(c4, c5, c6) = ({c4}, {c5}, {c6}) is not admissible"
            )));
        }
        let c = [coeffs[0], coeffs[1], coeffs[2], coeffs[3], coeffs[4], coeffs[5]];
        Ok(if self.with_psi {
            SymmetryVector::with_psi(c, PsiSpec::new(coeffs[6], coeffs[7], self.alpha))
        } else {
            SymmetryVector::new(c)
        })
    }
}

fn unknowns(with_psi: bool) -> usize {
    if with_psi {
        8
    } else {
        6
    }
}

fn unit_generator(j: usize, alpha: f64, with_psi: bool) -> SymmetryVector {
    let mut c = [0.0; 6];
    if j < 6 {
        c[j] = 1.0;
    }
    if !with_psi {
        return SymmetryVector::new(c);
    }
    let psi = match j {
        6 => PsiSpec::new(1.0, 0.0, alpha),
        7 => PsiSpec::new(0.0, 1.0, alpha),
        _ => PsiSpec::new(0.0, 0.0, alpha),
    };
    SymmetryVector::with_psi(c, psi)
}

/// Weighted terminal residual `e^{-αx}(ξf' + τf'' - φ)` of generator `sv` at `x`.
pub(crate) fn terminal_residual(sv: &SymmetryVector, tp: &TransformParams, x: f64) -> f64 {
    let a = tp.alpha;
    let f = terminal_condition_heat(x, tp);
    let e1 = (a * x).exp();
    let e2 = ((a + 1.0) * x).exp();
    let df = (a + 1.0) * e2 - a * e1;
    let ddf = (a + 1.0) * (a + 1.0) * e2 - a * a * e1;
    let g = eval_generator(sv, x, 0.0, f);
    (g.xi * df + g.tau * ddf - g.phi) * (-a * x).exp()
}

fn check_sampling(nodes: &[f64]) -> Result<()> {
    if nodes.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::RankDeficient("collocation nodes must be finite and > 0".into()));
    }
    let design = DMatrix::from_fn(nodes.len(), RESIDUAL_BASIS_DIM, |i, j| {
        let x = nodes[i];
        let poly = x.powi((j % 3) as i32);
        if j < 3 {
            poly
        } else {
            poly * x.exp()
        }
    });
    let r = rank(&design, NULL_SPACE_TOL);
    if r < RESIDUAL_BASIS_DIM {
        return Err(Error::RankDeficient(format!(
            "{} nodes separate only {r} of {RESIDUAL_BASIS_DIM} residual basis functions",
            nodes.len()
        )));
    }
    Ok(())
}

/// Collocated terminal-constraint matrix, rows = nodes, columns = unknowns.
pub(crate) fn collocation_matrix(tp: &TransformParams, with_psi: bool, nodes: &[f64]) -> DMatrix<f64> {
    let n = unknowns(with_psi);
    let gens: Vec<SymmetryVector> = (0..n).map(|j| unit_generator(j, tp.alpha, with_psi)).collect();
    DMatrix::from_fn(nodes.len(), n, |i, j| terminal_residual(&gens[j], tp, nodes[i]))
}

/// Solves the terminal constraints on the default Chebyshev nodes.
pub fn solve_terminal_constraints(tp: &TransformParams, with_psi: bool) -> Result<ConstraintSolution> {
    solve_terminal_constraints_at(tp, with_psi, &collocation_nodes())
}

pub fn solve_terminal_constraints_at(
    tp: &TransformParams,
    with_psi: bool,
    nodes: &[f64],
) -> Result<ConstraintSolution> {
    check_sampling(nodes)?;
    let mut a = collocation_matrix(tp, with_psi, nodes);
    // Equilibrate columns; undo the scaling on the null vectors afterwards.
    let scales: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).norm()).collect();
    for (j, &s) in scales.iter().enumerate() {
        if s > 0.0 {
            a.column_mut(j).scale_mut(1.0 / s);
        }
    }
    let singular_values = a.clone().singular_values().iter().copied().collect();
    let ns = null_space(&a, NULL_SPACE_TOL);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(ns.ncols());
    for k in 0..ns.ncols() {
        let mut v = column_to_vec(&ns, k);
        for (vj, &s) in v.iter_mut().zip(&scales) {
            if s > 0.0 {
                *vj /= s;
            }
        }
        // Two passes of Gram-Schmidt restore orthonormality lost to the unscaling.
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = b.iter().zip(&v).map(|(bi, vi)| bi * vi).sum();
                v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= dot * bi);
            }
            let norm = dvec(&v).norm();
            v.iter_mut().for_each(|c| *c /= norm);
        }
        basis.push(v);
    }
    Ok(ConstraintSolution {
        alpha: tp.alpha,
        with_psi,
        basis,
        singular_values,
    })
}

/// `[X_a, X_b, X_c]`: the admissible generators with `c₄ = 1`, `c₅ = 1`
/// and `c₆ = 1` respectively, completed by
/// `k₁ = -αc₄ - c₅ - α²c₆`, `k₂ = (α+1)c₄ + c₅ + (α+1)²c₆`.
///
/// `X_b` is `(-u - e^{αx+α²t} + e^{(α+1)x+(α+1)²t})∂u`; the variant with
/// `+u` does not satisfy the terminal constraint.
pub fn subalgebra_generators(tp: &TransformParams) -> [SymmetryVector; 3] {
    let a = tp.alpha;
    let b = a + 1.0;
    let complete = |c4: f64, c5: f64, c6: f64| {
        SymmetryVector::with_psi(
            [0.0, 0.0, 0.0, c4, c5, c6],
            PsiSpec::new(-a * c4 - c5 - a * a * c6, b * c4 + c5 + b * b * c6, a),
        )
    };
    [
        complete(1.0, 0.0, 0.0),
        complete(0.0, 1.0, 0.0),
        complete(0.0, 0.0, 1.0),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symmetry::eval_generator;
    use approx::assert_relative_eq;

    /// Hand expansion of the weighted residual in the basis
    /// `{1, x, x², eˣ, xeˣ, x²eˣ}`; rows are basis functions, columns are
    /// `c₁..c₆, k₁, k₂`.
    fn expanded_coefficients(alpha: f64) -> DMatrix<f64> {
        let a = alpha;
        let b = a + 1.0;
        #[rustfmt::skip]
        let rows = [
            // c1    c2     c3    c4     c5    c6      k1    k2
            [ 0.0,  0.0,   0.0,  -a,    -1.0, -a * a, -1.0,  0.0], // 1
            [ 0.0, -a,    -1.0,   0.0,   0.0,  0.0,    0.0,  0.0], // x
            [-1.0,  0.0,   0.0,   0.0,   0.0,  0.0,    0.0,  0.0], // x²
            [ 0.0,  0.0,   0.0,   b,     1.0,  b * b,  0.0, -1.0], // eˣ
            [ 0.0,  b,     1.0,   0.0,   0.0,  0.0,    0.0,  0.0], // xeˣ
            [ 1.0,  0.0,   0.0,   0.0,   0.0,  0.0,    0.0,  0.0], // x²eˣ
        ];
        DMatrix::from_fn(6, 8, |i, j| rows[i][j])
    }

    #[test]
    fn collocation_matches_hand_expansion() {
        for &alpha in &[0.0, 0.75, -1.3, 1.9] {
            let tp = TransformParams::from_alpha(alpha);
            let nodes = collocation_nodes();
            let a = collocation_matrix(&tp, true, &nodes);
            let c = expanded_coefficients(alpha);
            for (i, &x) in nodes.iter().enumerate() {
                let basis = [1.0, x, x * x, x.exp(), x * x.exp(), x * x * x.exp()];
                for j in 0..8 {
                    let expected: f64 = (0..6).map(|k| c[(k, j)] * basis[k]).sum();
                    assert_relative_eq!(a[(i, j)], expected, epsilon = 1e-9, max_relative = 1e-12);
                }
            }
        }
    }

    #[test]
    fn alpha_zero_without_psi() {
        let sol = solve_terminal_constraints(&TransformParams::from_alpha(0.0), false).unwrap();
        assert_eq!(sol.dimension(), 1);
        let v = sol.normalized().unwrap();
        let expected = [0.0, 0.0, 0.0, -1.0, 0.0, 1.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-10, "{v:?}");
        }
    }

    #[test]
    fn alpha_three_quarters_without_psi() {
        let tp = TransformParams::from_alpha(0.75);
        let sol = solve_terminal_constraints(&tp, false).unwrap();
        let v = sol.normalized().unwrap();
        let expected = [0.0, 0.0, 0.0, -2.5, 1.3125, 1.0];
        for (a, b) in v.iter().zip(expected) {
            assert!((a - b).abs() < 1e-10, "{v:?}");
        }
        let sv = SymmetryVector::new([v[0], v[1], v[2], v[3], v[4], v[5]]);
        for x in collocation_nodes() {
            assert!(terminal_residual(&sv, &tp, x).abs() < 1e-10);
        }
    }

    #[test]
    fn psi_completion_at_alpha_zero() {
        let sol = solve_terminal_constraints(&TransformParams::from_alpha(0.0), true).unwrap();
        assert_eq!(sol.dimension(), 3);
        let sv = sol.complete(1.0, 0.0, 0.0).unwrap();
        let psi = sv.psi.unwrap();
        assert!(psi.k1.abs() < 1e-10);
        assert!((psi.k2 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_sampling_is_rejected() {
        let tp = TransformParams::from_alpha(0.5);
        let few = [0.5, 1.0, 1.5];
        assert!(matches!(
            solve_terminal_constraints_at(&tp, false, &few),
            Err(Error::RankDeficient(_))
        ));
        let dup = [1.0; 20];
        assert!(matches!(
            solve_terminal_constraints_at(&tp, true, &dup),
            Err(Error::RankDeficient(_))
        ));
    }

    #[test]
    fn subalgebra_values_at_origin() {
        let [xa, _, xc] = subalgebra_generators(&TransformParams::from_alpha(0.0));
        let g = eval_generator(&xa, 0.0, 0.0, 0.0);
        assert_eq!((g.xi, g.tau, g.phi), (1.0, 0.0, 1.0));
        let g = eval_generator(&xc, 0.0, 0.0, 0.0);
        assert_eq!((g.xi, g.tau, g.phi), (0.0, 1.0, 1.0));
    }

    #[test]
    fn subalgebra_lies_in_constraint_space() {
        for &alpha in &[0.0, 0.75, -0.6, 1.4] {
            let tp = TransformParams::from_alpha(alpha);
            let sol = solve_terminal_constraints(&tp, true).unwrap();
            for sv in subalgebra_generators(&tp) {
                assert!(sol.distance(&sv.coefficients()) < 1e-10);
                for x in collocation_nodes() {
                    assert!(terminal_residual(&sv, &tp, x).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn plus_u_variant_of_xb_is_not_admissible() {
        let tp = TransformParams::from_alpha(0.3);
        let flipped = SymmetryVector::with_psi([0.0, 0.0, 0.0, 0.0, -1.0, 0.0], PsiSpec::new(-1.0, 1.0, 0.3));
        let worst = collocation_nodes()
            .into_iter()
            .map(|x| terminal_residual(&flipped, &tp, x).abs())
            .fold(0.0, f64::max);
        assert!(worst > 0.1);
    }
}
