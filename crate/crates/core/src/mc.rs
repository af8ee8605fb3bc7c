//! Monte Carlo check of the knock-out price under risk-neutral GBM.
//!
//! Paths are tracked through the log distance to the barrier,
//! `d(p) = ln S(p) - ln g(p)` with `ln g(p) = ln K - r(T - p)`. Because
//! `ln g` is linear in `p`, `d` is a Brownian motion with drift `-σ²/2` and
//! volatility `σ`, so the chance that it touched zero between two monitors
//! given endpoints `d₀, d₁ > 0` is the Brownian-bridge formula
//! `exp(-2 d₀ d₁ / (σ² Δp))`. With bridge correction each step multiplies
//! the path weight by `1 - exp(-2 d₀ d₁ / (σ² Δp))`; without it a path
//! survives a step iff `d₁ > 0`.
//!
//! Path `i` draws its normals from ChaCha8 stream `i` of the configured
//! seed through the inverse normal CDF, so estimates do not depend on how
//! paths are scheduled across threads. Sums use pairwise reduction in path
//! order.

use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc_inv;

use crate::analytic::{barrier_level, price, PriceQuery};
use crate::error::{invalid, Error, Result};
use crate::linalg::pairwise_sum;
use crate::transform::MarketParams;

/// Stream offset for the uniforms used by binary killing.
const KILL_STREAM: u64 = 1 << 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SurvivalMode {
    /// Multiply the payoff by the survival probability.
    Weighted,
    /// Kill the path with the crossing probability.
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub bridge_correction: bool,
    pub survival: SurvivalMode,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 256,
            seed: 42,
            bridge_correction: true,
            survival: SurvivalMode::Weighted,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1000 {
            return Err(invalid("n_paths", format!("must be >= 1000, got {}", self.n_paths)));
        }
        if self.n_steps < 8 {
            return Err(invalid("n_steps", format!("must be >= 8, got {}", self.n_steps)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub price: f64,
    pub std_error: f64,
    pub knockout_fraction: f64,
    pub n_paths: usize,
    pub n_steps: usize,
}

/// Discounted payoff and survival weight of one path under both
/// monitoring rules, from identical draws.
#[derive(Debug, Clone, Copy, PartialEq)]
struct PathOutcome {
    discrete: (f64, f64),
    bridge: (f64, f64),
}

/// Uniform in the open interval (0, 1).
fn open_uniform(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn std_normal(rng: &mut ChaCha8Rng) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * open_uniform(rng))
}

struct PathModel {
    d0: f64,
    drift: f64,
    vol: f64,
    bridge_scale: f64,
    strike: f64,
    discount: f64,
    n_steps: usize,
    seed: u64,
    survival: SurvivalMode,
}

impl PathModel {
    fn new(s0: f64, m: &MarketParams, n_steps: usize, seed: u64, survival: SurvivalMode) -> Self {
        let dt = m.maturity() / n_steps as f64;
        let var = m.sigma() * m.sigma();
        Self {
            d0: (s0 / m.strike()).ln() + m.r() * m.maturity(),
            drift: -0.5 * var * dt,
            vol: m.sigma() * dt.sqrt(),
            bridge_scale: 2.0 / (var * dt),
            strike: m.strike(),
            discount: (-m.r() * m.maturity()).exp(),
            n_steps,
            seed,
            survival,
        }
    }

    fn run(&self, path: usize) -> PathOutcome {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path as u64);
        let mut kill_rng = None;
        let mut d = self.d0;
        let mut discrete_alive = true;
        let mut weight = 1.0;
        for _ in 0..self.n_steps {
            let next = d + self.drift + self.vol * std_normal(&mut rng);
            if next <= 0.0 {
                discrete_alive = false;
                weight = 0.0;
            } else if weight > 0.0 {
                let cross = (-self.bridge_scale * d * next).exp();
                match self.survival {
                    SurvivalMode::Weighted => weight *= 1.0 - cross,
                    SurvivalMode::Binary => {
                        let k = kill_rng.get_or_insert_with(|| {
                            let mut r = ChaCha8Rng::seed_from_u64(self.seed);
                            r.set_stream(KILL_STREAM | path as u64);
                            r
                        });
                        if open_uniform(k) < cross {
                            weight = 0.0;
                        }
                    }
                }
            }
            d = next;
        }
        // At p = T the barrier is K, so S_T = K e^{d_T}.
        let payoff = self.discount * (self.strike * d.exp() - self.strike).max(0.0);
        let dw = if discrete_alive { 1.0 } else { 0.0 };
        PathOutcome {
            discrete: (payoff * dw, dw),
            bridge: (payoff * weight, weight),
        }
    }
}

fn check_start(s0: f64, m: &MarketParams) -> Result<()> {
    let level = barrier_level(0.0, m)?;
    if !(s0.is_finite() && s0 > level) {
        return Err(Error::Domain(format!(
            "spot {s0} starts on or below the barrier {level}"
        )));
    }
    Ok(())
}

fn run_paths(s0: f64, m: &MarketParams, cfg: &McConfig) -> Result<Vec<PathOutcome>> {
    cfg.validate()?;
    check_start(s0, m)?;
    let model = PathModel::new(s0, m, cfg.n_steps, cfg.seed, cfg.survival);
    Ok((0..cfg.n_paths).into_par_iter().map(|i| model.run(i)).collect())
}

fn summarize(values: &[f64], weights: &[f64], n_steps: usize) -> McEstimate {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    McEstimate {
        price: mean,
        std_error: (var / n).sqrt(),
        knockout_fraction: 1.0 - pairwise_sum(weights) / n,
        n_paths: values.len(),
        n_steps,
    }
}

fn split(outcomes: &[PathOutcome], bridge: bool) -> (Vec<f64>, Vec<f64>) {
    outcomes
        .iter()
        .map(|o| if bridge { o.bridge } else { o.discrete })
        .unzip()
}

/// Per-path discounted payoffs from one run, kept for convergence output.
#[derive(Debug, Clone)]
pub struct McRun {
    pub estimate: McEstimate,
    pub path_values: Vec<f64>,
}

impl McRun {
    /// Cumulative estimates after each of `batches` equal batches.
    pub fn batch_series(&self, batches: usize) -> Vec<McEstimate> {
        let batches = batches.clamp(1, self.path_values.len());
        let size = self.path_values.len() / batches;
        (1..=batches)
            .map(|b| {
                let end = if b == batches { self.path_values.len() } else { b * size };
                let head = &self.path_values[..end];
                let mut est = summarize(head, &vec![1.0; head.len()], self.estimate.n_steps);
                est.knockout_fraction = f64::NAN;
                est
            })
            .collect()
    }

    /// Writes `batch,paths,mean,std_error` rows of [`McRun::batch_series`].
    pub fn write_batch_csv<W: Write>(&self, mut w: W, batches: usize) -> std::io::Result<()> {
        writeln!(w, "batch,paths,mean,std_error")?;
        for (i, est) in self.batch_series(batches).iter().enumerate() {
            writeln!(w, "{},{},{},{}", i + 1, est.n_paths, est.price, est.std_error)?;
        }
        Ok(())
    }
}

pub fn simulate_run(s0: f64, m: &MarketParams, cfg: &McConfig) -> Result<McRun> {
    let outcomes = run_paths(s0, m, cfg)?;
    let (values, weights) = split(&outcomes, cfg.bridge_correction);
    let estimate = summarize(&values, &weights, cfg.n_steps);
    Ok(McRun {
        estimate,
        path_values: values,
    })
}

pub fn simulate(s0: f64, m: &MarketParams, cfg: &McConfig) -> Result<McEstimate> {
    simulate_run(s0, m, cfg).map(|r| r.estimate)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitoringRow {
    pub n_steps: usize,
    pub discrete: McEstimate,
    pub bridge: McEstimate,
    /// `discrete - bridge` on matched paths.
    pub bias: f64,
    /// Standard error of the paired difference.
    pub bias_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonitoringReport {
    pub analytic: f64,
    pub rows: Vec<MonitoringRow>,
}

impl MonitoringReport {
    /// Discrete bias positive and shrinking with more monitors.
    pub fn discrete_converges_from_above(&self) -> bool {
        self.rows.iter().all(|r| r.bias > 0.0) && self.rows.windows(2).all(|w| w[1].bias < w[0].bias)
    }

    /// Every bridge estimate within `k` standard errors of every other.
    pub fn bridge_stable(&self, k: f64) -> bool {
        self.rows.iter().all(|a| {
            self.rows.iter().all(|b| {
                let se = (a.bridge.std_error.powi(2) + b.bridge.std_error.powi(2)).sqrt();
                (a.bridge.price - b.bridge.price).abs() <= k * se
            })
        })
    }
}

pub const MONITORING_STEPS: [usize; 4] = [16, 64, 256, 1024];

/// Matched-path comparison of discrete and bridge-corrected monitoring
/// across [`MONITORING_STEPS`].
pub fn discrete_vs_bridge(s0: f64, m: &MarketParams, cfg: &McConfig) -> Result<MonitoringReport> {
    let analytic = price(&PriceQuery::new(s0, 0.0), m)?.value;
    let mut rows = Vec::with_capacity(MONITORING_STEPS.len());
    for &n_steps in &MONITORING_STEPS {
        let c = McConfig { n_steps, ..*cfg };
        let outcomes = run_paths(s0, m, &c)?;
        let (dv, dw) = split(&outcomes, false);
        let (bv, bw) = split(&outcomes, true);
        let discrete = summarize(&dv, &dw, n_steps);
        let bridge = summarize(&bv, &bw, n_steps);
        let diff: Vec<f64> = dv.iter().zip(&bv).map(|(a, b)| a - b).collect();
        let diff_est = summarize(&diff, &dw, n_steps);
        rows.push(MonitoringRow {
            n_steps,
            discrete,
            bridge,
            bias: diff_est.price,
            bias_std_error: diff_est.std_error,
        });
    }
    Ok(MonitoringReport { analytic, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market() -> MarketParams {
        MarketParams::new(0.05, 0.2, 100.0, 1.0).unwrap()
    }

    fn small(seed: u64) -> McConfig {
        McConfig {
            n_paths: 4000,
            n_steps: 32,
            seed,
            ..McConfig::default()
        }
    }

    #[test]
    fn normals_have_unit_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..200_000).map(|_| std_normal(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!(mean.abs() < 0.01);
        assert!((var - 1.0).abs() < 0.01);
    }

    #[test]
    fn config_validation() {
        let m = market();
        let err = simulate(
            110.0,
            &m,
            &McConfig {
                n_paths: 10,
                ..small(1)
            },
        );
        assert!(matches!(err, Err(Error::InvalidParameter { name: "n_paths", .. })));
        assert!(simulate(110.0, &m, &McConfig { n_steps: 4, ..small(1) }).is_err());
        assert!(matches!(simulate(90.0, &m, &small(1)), Err(Error::Domain(_))));
    }

    #[test]
    fn deterministic_under_seed() {
        let m = market();
        let a = simulate(110.0, &m, &small(7)).unwrap();
        let b = simulate(110.0, &m, &small(7)).unwrap();
        assert_eq!(a, b);
        let c = simulate(110.0, &m, &small(8)).unwrap();
        assert_ne!(a.price, c.price);
    }

    #[test]
    fn independent_of_thread_count() {
        let m = market();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| simulate(110.0, &m, &small(3)).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn vanishing_volatility_is_deterministic_forward() {
        let m = MarketParams::new(0.05, 1e-6, 100.0, 1.0).unwrap();
        let est = simulate(110.0, &m, &small(2)).unwrap();
        let exact = 110.0 - 100.0 * (-0.05f64).exp();
        assert!((est.price - exact).abs() < 1e-4);
        assert_eq!(est.knockout_fraction, 0.0);
    }

    #[test]
    fn start_next_to_barrier_is_knocked_out() {
        let m = market();
        let s0 = barrier_level(0.0, &m).unwrap() * (1.0 + 1e-9);
        let est = simulate(s0, &m, &small(5)).unwrap();
        assert!(est.knockout_fraction > 0.999);
        assert!(est.price < 1e-3);
    }

    #[test]
    fn matched_seeds_share_paths() {
        let m = market();
        let with = simulate_run(110.0, &m, &small(11)).unwrap();
        let without = simulate_run(
            110.0,
            &m,
            &McConfig {
                bridge_correction: false,
                ..small(11)
            },
        )
        .unwrap();
        // Discrete survivors pay at least the bridge-weighted amount on the same path.
        assert!(with.path_values.iter().zip(&without.path_values).all(|(b, d)| *b <= *d));
        assert!(with.path_values.iter().zip(&without.path_values).any(|(b, d)| b < d));
    }

    #[test]
    fn binary_killing_agrees_with_weighting() {
        let m = market();
        let cfg = McConfig {
            n_paths: 20_000,
            ..small(9)
        };
        let w = simulate(110.0, &m, &cfg).unwrap();
        let b = simulate(
            110.0,
            &m,
            &McConfig {
                survival: SurvivalMode::Binary,
                ..cfg
            },
        )
        .unwrap();
        let se = (w.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((w.price - b.price).abs() < 4.0 * se);
        assert!(b.std_error >= w.std_error);
    }

    #[test]
    fn knockout_fraction_nonincreasing_in_spot() {
        let m = market();
        let mut last = 1.0;
        for s0 in [96.0, 100.0, 105.0, 115.0, 130.0] {
            let k = simulate(s0, &m, &small(4)).unwrap().knockout_fraction;
            assert!(k <= last, "knockout {k} at {s0} above {last}");
            last = k;
        }
    }

    #[test]
    fn batch_csv_is_cumulative() {
        let m = market();
        let run = simulate_run(110.0, &m, &small(6)).unwrap();
        let series = run.batch_series(4);
        assert_eq!(series.len(), 4);
        assert_eq!(series[3].n_paths, 4000);
        assert_eq!(series[3].price, run.estimate.price);
        let mut buf = Vec::new();
        run.write_batch_csv(&mut buf, 4).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("batch,paths,mean,std_error\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
