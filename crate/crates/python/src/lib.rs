//! Python bindings for `lie_barrier`.
//!
//! Exposes the closed-form pricer, the heat-equation transform, the symmetry
//! constraint solver and characteristic reduction, both numerical oracles and
//! the verification suite. Core errors surface as `BarrierError`, a subclass
//! of `ValueError`.

use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use lie_barrier::analytic::{self, PriceQuery, Region};
use lie_barrier::fd::{self, GridSpec};
use lie_barrier::mc::{self, McConfig, SurvivalMode};
use lie_barrier::oracle;
use lie_barrier::symmetry::{self, CharacteristicRoots, SymmetryVector};
use lie_barrier::transform::{self, BsPoint, HeatPoint};
use lie_barrier::verify::{self, SuiteConfig, Tolerances};

create_exception!(lie_barrier_py, BarrierError, PyValueError);

fn to_py(e: lie_barrier::Error) -> PyErr {
    BarrierError::new_err(e.to_string())
}

fn region_name(r: Region) -> String {
    r.to_string()
}

/// Market parameters `(r, sigma, strike, maturity)` with derived `alpha`, `beta`.
#[pyclass(name = "MarketParams", frozen)]
struct PyMarket {
    inner: transform::MarketParams,
}

#[pymethods]
impl PyMarket {
    #[new]
    #[pyo3(signature = (r=0.05, sigma=0.2, strike=100.0, maturity=1.0))]
    fn new(r: f64, sigma: f64, strike: f64, maturity: f64) -> PyResult<Self> {
        let inner = transform::MarketParams::new(r, sigma, strike, maturity).map_err(to_py)?;
        Ok(Self { inner })
    }

    /// Market with the given `alpha` at this market's sigma, strike and maturity.
    fn with_alpha(&self, alpha: f64) -> PyResult<Self> {
        let inner = verify::market_with_alpha(alpha, &self.inner).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn r(&self) -> f64 {
        self.inner.r()
    }

    #[getter]
    fn sigma(&self) -> f64 {
        self.inner.sigma()
    }

    #[getter]
    fn strike(&self) -> f64 {
        self.inner.strike()
    }

    #[getter]
    fn maturity(&self) -> f64 {
        self.inner.maturity()
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.transform_params().alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.transform_params().beta
    }

    #[getter]
    fn heat_horizon(&self) -> f64 {
        self.inner.heat_horizon()
    }

    fn __repr__(&self) -> String {
        format!(
            "MarketParams(r={}, sigma={}, strike={}, maturity={})",
            self.inner.r(),
            self.inner.sigma(),
            self.inner.strike(),
            self.inner.maturity()
        )
    }
}

#[pyclass(frozen, get_all)]
struct PriceResult {
    value: f64,
    region: String,
}

#[pymethods]
impl PriceResult {
    fn __repr__(&self) -> String {
        format!("PriceResult(value={}, region='{}')", self.value, self.region)
    }
}

#[pyclass(frozen, get_all)]
struct Greeks {
    delta: f64,
    gamma: f64,
    theta: f64,
}

#[pymethods]
impl Greeks {
    fn __repr__(&self) -> String {
        format!(
            "Greeks(delta={}, gamma={}, theta={})",
            self.delta, self.gamma, self.theta
        )
    }
}

/// Closed-form value at spot `spot` and calendar time `time`.
#[pyfunction]
#[pyo3(signature = (market, spot, time=0.0))]
fn price(market: &PyMarket, spot: f64, time: f64) -> PyResult<PriceResult> {
    let r = analytic::price(&PriceQuery::new(spot, time), &market.inner).map_err(to_py)?;
    Ok(PriceResult {
        value: r.value,
        region: region_name(r.region),
    })
}

/// Delta, gamma and theta; raises outside the interior region.
#[pyfunction]
#[pyo3(signature = (market, spot, time=0.0))]
fn greeks(market: &PyMarket, spot: f64, time: f64) -> PyResult<Greeks> {
    let g = analytic::greeks(&PriceQuery::new(spot, time), &market.inner).map_err(to_py)?;
    Ok(Greeks {
        delta: g.delta,
        gamma: g.gamma,
        theta: g.theta,
    })
}

/// Barrier level `K e^{-r(T-p)}` at calendar time `time`.
#[pyfunction]
#[pyo3(signature = (market, time=0.0))]
fn barrier_level(market: &PyMarket, time: f64) -> PyResult<f64> {
    analytic::barrier_level(time, &market.inner).map_err(to_py)
}

/// Heat-equation solution `u(x, t)` for this market's `alpha`.
#[pyfunction]
fn heat_solution(market: &PyMarket, x: f64, t: f64) -> f64 {
    analytic::heat_solution(x, t, &market.inner.transform_params())
}

/// Maps `(spot, time, value)` to heat coordinates `(x, t, u)`.
#[pyfunction]
fn to_heat(market: &PyMarket, spot: f64, time: f64, value: f64) -> PyResult<(f64, f64, f64)> {
    let h = transform::to_heat(BsPoint { spot, time, value }, &market.inner).map_err(to_py)?;
    Ok((h.x, h.t, h.u))
}

/// Maps heat coordinates `(x, t, u)` back to `(spot, time, value)`.
#[pyfunction]
fn from_heat(market: &PyMarket, x: f64, t: f64, u: f64) -> PyResult<(f64, f64, f64)> {
    let b = transform::from_heat(HeatPoint { x, t, u }, &market.inner).map_err(to_py)?;
    Ok((b.spot, b.time, b.value))
}

#[pyclass(frozen, get_all)]
struct ConstraintSolution {
    alpha: f64,
    with_psi: bool,
    dimension: usize,
    basis: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
}

/// Null space of the terminal invariance constraints. Coefficients are
/// `(c1..c6)`, followed by `(k1, k2)` when `with_psi` is set.
#[pyfunction]
#[pyo3(signature = (market, with_psi=false))]
fn solve_terminal_constraints(market: &PyMarket, with_psi: bool) -> PyResult<ConstraintSolution> {
    let sol = symmetry::solve_terminal_constraints(&market.inner.transform_params(), with_psi).map_err(to_py)?;
    Ok(ConstraintSolution {
        alpha: sol.alpha,
        with_psi: sol.with_psi,
        dimension: sol.dimension(),
        basis: sol.basis,
        singular_values: sol.singular_values,
    })
}

/// Coefficients `(c1..c6)` of the barrier-admissible generator.
#[pyfunction]
fn admissible_generator(market: &PyMarket) -> Vec<f64> {
    SymmetryVector::admissible(&market.inner.transform_params()).c.to_vec()
}

#[pyclass(frozen, get_all)]
struct Reduction {
    invariant_slope: f64,
    multiplier_exponent: f64,
    ode_b: f64,
    ode_c: f64,
    roots_kind: String,
    roots: (f64, f64),
    fit_a: f64,
    fit_b: f64,
    fit_residual: f64,
}

/// Characteristic reduction along the admissible generator, with the
/// reduced ODE fitted to the terminal data.
#[pyfunction]
fn reduce(market: &PyMarket) -> PyResult<Reduction> {
    let tp = market.inner.transform_params();
    let red = symmetry::characteristic_reduce(&SymmetryVector::admissible(&tp)).map_err(to_py)?;
    let fit = symmetry::fit_terminal(&red, &tp).map_err(to_py)?;
    let (roots_kind, roots) = match red.roots {
        CharacteristicRoots::Distinct(a, b) => ("distinct", (a, b)),
        CharacteristicRoots::Repeated(a) => ("repeated", (a, a)),
        CharacteristicRoots::Complex { re, im } => ("complex", (re, im)),
    };
    Ok(Reduction {
        invariant_slope: red.invariant_slope,
        multiplier_exponent: red.multiplier_exponent,
        ode_b: red.ode_b,
        ode_c: red.ode_c,
        roots_kind: roots_kind.to_string(),
        roots,
        fit_a: fit.a,
        fit_b: fit.b,
        fit_residual: fit.max_residual,
    })
}

fn grid(n_space: usize, n_time: usize, xi_max: Option<f64>) -> GridSpec {
    let base = GridSpec::default();
    GridSpec {
        xi_max: xi_max.unwrap_or(base.xi_max),
        n_space,
        n_time,
    }
}

/// Crank-Nicolson value at `(spot, time)`.
#[pyfunction]
#[pyo3(signature = (market, spot, time=0.0, n_space=800, n_time=800, xi_max=None))]
fn fd_price(
    py: Python<'_>,
    market: &PyMarket,
    spot: f64,
    time: f64,
    n_space: usize,
    n_time: usize,
    xi_max: Option<f64>,
) -> PyResult<f64> {
    let m = market.inner;
    let g = grid(n_space, n_time, xi_max);
    py.detach(|| fd::solve(&m, &g).and_then(|sol| sol.price(spot, time)))
        .map_err(to_py)
}

/// `(n, max_error, order)` rows of a refinement study and its asymptotic order.
type StudyRows = (Vec<(usize, f64, Option<f64>)>, Option<f64>);

/// Grid-refinement study on square grids; returns `(rows, order)` where each
/// row is `(n, max_error, order_or_None)`.
#[pyfunction]
#[pyo3(signature = (market, sizes=vec![100, 200, 400]))]
fn fd_study(py: Python<'_>, market: &PyMarket, sizes: Vec<usize>) -> PyResult<StudyRows> {
    let m = market.inner;
    let grids: Vec<GridSpec> = sizes.iter().map(|&n| GridSpec::square(n)).collect();
    let table = py.detach(|| fd::convergence_study(&m, &grids)).map_err(to_py)?;
    let rows = table
        .rows
        .iter()
        .map(|r| (r.grid.n_space, r.max_error, r.order))
        .collect();
    Ok((rows, table.asymptotic_order()))
}

#[pyclass(frozen, get_all)]
struct McEstimate {
    price: f64,
    std_error: f64,
    knockout_fraction: f64,
    n_paths: usize,
    n_steps: usize,
}

#[pymethods]
impl McEstimate {
    fn __repr__(&self) -> String {
        format!(
            "McEstimate(price={}, std_error={}, knockout_fraction={})",
            self.price, self.std_error, self.knockout_fraction
        )
    }
}

/// Monte Carlo estimate at `time = 0`; deterministic for a given seed.
#[pyfunction]
#[pyo3(signature = (market, spot, n_paths=100_000, n_steps=256, seed=42, bridge=true, binary=false))]
#[allow(clippy::too_many_arguments)]
fn mc_price(
    py: Python<'_>,
    market: &PyMarket,
    spot: f64,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
    bridge: bool,
    binary: bool,
) -> PyResult<McEstimate> {
    let m = market.inner;
    let cfg = McConfig {
        n_paths,
        n_steps,
        seed,
        bridge_correction: bridge,
        survival: if binary {
            SurvivalMode::Binary
        } else {
            SurvivalMode::Weighted
        },
    };
    let e = py.detach(|| mc::simulate(spot, &m, &cfg)).map_err(to_py)?;
    Ok(McEstimate {
        price: e.price,
        std_error: e.std_error,
        knockout_fraction: e.knockout_fraction,
        n_paths: e.n_paths,
        n_steps: e.n_steps,
    })
}

/// Closed form against both oracles at `(spot, 0)` with default settings;
/// returns `(analytic, fd_rel_error, mc_z_score, passed)`.
#[pyfunction]
#[pyo3(signature = (market, spot))]
fn compare_oracles(py: Python<'_>, market: &PyMarket, spot: f64) -> PyResult<(f64, f64, f64, bool)> {
    let m = market.inner;
    let c = py
        .detach(|| oracle::compare(spot, 0.0, &m, Some(&GridSpec::default()), Some(&McConfig::default())))
        .map_err(to_py)?;
    let fd_rel = c.fd.as_ref().map_or(f64::NAN, |f| f.rel_error);
    let z = c.mc.as_ref().map_or(f64::NAN, |e| e.z_score);
    Ok((c.analytic, fd_rel, z, c.passed()))
}

#[pyclass(frozen, get_all)]
struct VerifyReport {
    alpha: f64,
    passed: bool,
    max_residual: f64,
    /// `(name, measured, tolerance, passed)` per check.
    checks: Vec<(String, f64, f64, bool)>,
}

/// Runs the verification suite. `tolerances` maps check names to overrides.
#[pyfunction]
#[pyo3(signature = (market, tolerances=None))]
fn verify_suite(
    py: Python<'_>,
    market: &PyMarket,
    tolerances: Option<std::collections::HashMap<String, f64>>,
) -> PyResult<VerifyReport> {
    let mut tol = Tolerances::default();
    for (name, v) in tolerances.unwrap_or_default() {
        tol.set(&name, v).map_err(to_py)?;
    }
    let m = market.inner;
    let rep = py.detach(|| verify::run_suite(&m, &tol, &SuiteConfig::default()));
    Ok(VerifyReport {
        alpha: rep.alpha,
        passed: rep.passed(),
        max_residual: rep.max_residual(),
        checks: rep
            .checks
            .iter()
            .map(|c| (c.name.to_string(), c.measured, c.tolerance, c.passed))
            .collect(),
    })
}

#[pymodule]
fn lie_barrier_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("BarrierError", m.py().get_type::<BarrierError>())?;
    m.add_class::<PyMarket>()?;
    m.add_class::<PriceResult>()?;
    m.add_class::<Greeks>()?;
    m.add_class::<ConstraintSolution>()?;
    m.add_class::<Reduction>()?;
    m.add_class::<McEstimate>()?;
    m.add_class::<VerifyReport>()?;
    m.add_function(wrap_pyfunction!(price, m)?)?;
    m.add_function(wrap_pyfunction!(greeks, m)?)?;
    m.add_function(wrap_pyfunction!(barrier_level, m)?)?;
    m.add_function(wrap_pyfunction!(heat_solution, m)?)?;
    m.add_function(wrap_pyfunction!(to_heat, m)?)?;
    m.add_function(wrap_pyfunction!(from_heat, m)?)?;
    m.add_function(wrap_pyfunction!(solve_terminal_constraints, m)?)?;
    m.add_function(wrap_pyfunction!(admissible_generator, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(fd_price, m)?)?;
    m.add_function(wrap_pyfunction!(fd_study, m)?)?;
    m.add_function(wrap_pyfunction!(mc_price, m)?)?;
    m.add_function(wrap_pyfunction!(compare_oracles, m)?)?;
    m.add_function(wrap_pyfunction!(verify_suite, m)?)?;
    Ok(())
}
