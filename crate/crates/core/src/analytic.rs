//! Closed-form price of the call knocked out at the discounted strike.
//!
//! On the heat side the invariant solution is
//! `u = e^{(α+1)x+(α+1)²t} - e^{αx+α²t}`, which vanishes on
//! `x = -(2α+1)t`. Mapped back it reads `V = S - Ke^{-r(T-p)}` above the
//! barrier `S = Ke^{-r(T-p)}` and zero on or below it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::transform::{MarketParams, TransformParams};

/// Relative tolerance on `S - g(p)` for the barrier flag.
pub const BARRIER_REL_TOL: f64 = 1e-12;

pub fn payoff(spot: f64, strike: f64) -> f64 {
    (spot - strike).max(0.0)
}

pub fn heat_solution(x: f64, t: f64, tp: &TransformParams) -> f64 {
    let a = tp.alpha;
    let b = a + 1.0;
    (b * x + b * b * t).exp() - (a * x + a * a * t).exp()
}

/// Barrier level `Ke^{-r(T-p)}` at calendar time `p`.
pub fn barrier_level(p: f64, m: &MarketParams) -> Result<f64> {
    if !(p.is_finite() && (0.0..=m.maturity()).contains(&p)) {
        return Err(Error::Domain(format!(
            "calendar time p = {p} outside [0, {}]",
            m.maturity()
        )));
    }
    Ok(m.strike() * (-m.r() * (m.maturity() - p)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceQuery {
    pub spot: f64,
    pub time: f64,
}

impl PriceQuery {
    pub fn new(spot: f64, time: f64) -> Self {
        Self { spot, time }
    }

    fn validate(&self, m: &MarketParams) -> Result<()> {
        if !(self.spot.is_finite() && self.spot > 0.0) {
            return Err(Error::Domain(format!("spot S = {} must be > 0", self.spot)));
        }
        if !(self.time.is_finite() && (0.0..=m.maturity()).contains(&self.time)) {
            return Err(Error::Domain(format!(
                "calendar time p = {} outside [0, {}]",
                self.time,
                m.maturity()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Region {
    Interior,
    Barrier,
    Outside,
    Terminal,
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Region::Interior => "interior",
            Region::Barrier => "barrier",
            Region::Outside => "outside",
            Region::Terminal => "terminal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriceResult {
    pub value: f64,
    pub region: Region,
}

pub fn classify(q: &PriceQuery, m: &MarketParams) -> Result<Region> {
    q.validate(m)?;
    if q.time == m.maturity() {
        return Ok(Region::Terminal);
    }
    let level = barrier_level(q.time, m)?;
    let gap = q.spot - level;
    Ok(if gap.abs() <= BARRIER_REL_TOL * level {
        Region::Barrier
    } else if gap < 0.0 {
        Region::Outside
    } else {
        Region::Interior
    })
}

pub fn price(q: &PriceQuery, m: &MarketParams) -> Result<PriceResult> {
    let region = classify(q, m)?;
    let value = match region {
        Region::Terminal => payoff(q.spot, m.strike()),
        Region::Barrier | Region::Outside => 0.0,
        Region::Interior => q.spot - barrier_level(q.time, m)?,
    };
    Ok(PriceResult { value, region })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Greeks {
    pub delta: f64,
    pub gamma: f64,
    /// `∂V/∂p` in calendar time.
    pub theta: f64,
}

pub fn greeks(q: &PriceQuery, m: &MarketParams) -> Result<Greeks> {
    let region = classify(q, m)?;
    if region != Region::Interior {
        return Err(Error::Region(format!(
            "greeks are defined on the interior only; query is in region {region}"
        )));
    }
    Ok(Greeks {
        delta: 1.0,
        gamma: 0.0,
        theta: -m.r() * barrier_level(q.time, m)?,
    })
}

/// One node of a price surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurfaceNode {
    pub spot: f64,
    pub time: f64,
    pub result: PriceResult,
}

/// Prices on `n_time` calendar times spanning `[0, T]` and `n_spot` spots
/// spanning `[spot_min, spot_max]`, with the barrier level added to each
/// time row. Rows are ordered by time, then spot.
pub fn surface(
    m: &MarketParams,
    spot_min: f64,
    spot_max: f64,
    n_spot: usize,
    n_time: usize,
) -> Result<Vec<SurfaceNode>> {
    if !(spot_min.is_finite() && spot_min > 0.0 && spot_max > spot_min && spot_max.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "spot range",
            reason: format!("need 0 < spot_min < spot_max, got [{spot_min}, {spot_max}]"),
        });
    }
    if n_spot < 2 || n_time < 2 {
        return Err(Error::InvalidParameter {
            name: "surface size",
            reason: format!("need at least 2 spots and 2 times, got {n_spot} x {n_time}"),
        });
    }
    let mut nodes = Vec::with_capacity(n_time * (n_spot + 1));
    for i in 0..n_time {
        let p = if i + 1 == n_time {
            m.maturity()
        } else {
            m.maturity() * i as f64 / (n_time - 1) as f64
        };
        let mut spots: Vec<f64> = (0..n_spot)
            .map(|j| spot_min + (spot_max - spot_min) * j as f64 / (n_spot - 1) as f64)
            .collect();
        spots.push(barrier_level(p, m)?);
        spots.sort_by(f64::total_cmp);
        spots.dedup();
        for s in spots {
            nodes.push(SurfaceNode {
                spot: s,
                time: p,
                result: price(&PriceQuery::new(s, p), m)?,
            });
        }
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn market() -> MarketParams {
        MarketParams::new(0.05, 0.2, 100.0, 1.0).unwrap()
    }

    #[test]
    fn payoff_examples() {
        assert_eq!(payoff(150.0, 100.0), 50.0);
        assert_eq!(payoff(80.0, 100.0), 0.0);
        assert_eq!(payoff(100.0, 100.0), 0.0);
    }

    #[test]
    fn heat_solution_examples() {
        let tp = TransformParams::from_alpha(0.0);
        assert_eq!(heat_solution(0.0, 0.0, &tp), 0.0);
        assert_relative_eq!(heat_solution(1.0, 0.0, &tp), 1f64.exp() - 1.0, epsilon = 1e-15);
        let tp = TransformParams::from_alpha(0.75);
        for &t in &[0.0, 0.3, 1.7] {
            assert!(heat_solution(-tp.drift() * t, t, &tp).abs() < 1e-14);
        }
    }

    #[test]
    fn barrier_level_examples() {
        let m = market();
        assert_eq!(barrier_level(1.0, &m).unwrap(), 100.0);
        assert_relative_eq!(barrier_level(0.0, &m).unwrap(), 95.122_942_450_071_4, epsilon = 1e-10);
        let flat = MarketParams::new(0.0, 0.2, 100.0, 1.0).unwrap();
        assert_eq!(barrier_level(0.3, &flat).unwrap(), 100.0);
        assert!(barrier_level(1.5, &m).is_err());
    }

    #[test]
    fn price_examples() {
        let m = market();
        let r = price(&PriceQuery::new(110.0, 0.0), &m).unwrap();
        assert_relative_eq!(r.value, 110.0 - 100.0 * (-0.05f64).exp(), epsilon = 1e-12);
        assert_relative_eq!(r.value, 14.8771, epsilon = 1e-4);
        assert_eq!(r.region, Region::Interior);

        let level = barrier_level(0.4, &m).unwrap();
        let r = price(&PriceQuery::new(level, 0.4), &m).unwrap();
        assert_eq!((r.value, r.region), (0.0, Region::Barrier));

        let r = price(&PriceQuery::new(120.0, 1.0), &m).unwrap();
        assert_eq!((r.value, r.region), (20.0, Region::Terminal));

        let r = price(&PriceQuery::new(90.0, 0.2), &m).unwrap();
        assert_eq!((r.value, r.region), (0.0, Region::Outside));
    }

    #[test]
    fn invalid_queries() {
        let m = market();
        assert!(matches!(price(&PriceQuery::new(0.0, 0.5), &m), Err(Error::Domain(_))));
        assert!(price(&PriceQuery::new(100.0, -0.1), &m).is_err());
        assert!(price(&PriceQuery::new(100.0, 1.1), &m).is_err());
    }

    #[test]
    fn greeks_examples() {
        let m = market();
        let q = PriceQuery::new(110.0, 0.0);
        let g = greeks(&q, &m).unwrap();
        assert_eq!((g.delta, g.gamma), (1.0, 0.0));
        assert_relative_eq!(g.theta, -4.756_147_122_503_57, epsilon = 1e-10);

        let h = 1e-4;
        let up = price(&PriceQuery::new(110.0, h), &m).unwrap().value;
        let mid = price(&PriceQuery::new(110.0, 0.5 * h), &m).unwrap().value;
        let fwd = (up - mid) / (0.5 * h);
        assert!((fwd - greeks(&PriceQuery::new(110.0, 0.75 * h), &m).unwrap().theta).abs() < 1e-6);

        let bump = 1e-3;
        let q = PriceQuery::new(120.0, 0.5);
        let pu = price(&PriceQuery::new(120.0 + bump, 0.5), &m).unwrap().value;
        let pd = price(&PriceQuery::new(120.0 - bump, 0.5), &m).unwrap().value;
        let p0 = price(&q, &m).unwrap().value;
        assert_relative_eq!((pu - pd) / (2.0 * bump), greeks(&q, &m).unwrap().delta, epsilon = 1e-8);
        assert!(((pu - 2.0 * p0 + pd) / (bump * bump)).abs() < 1e-4);

        assert!(matches!(greeks(&PriceQuery::new(90.0, 0.2), &m), Err(Error::Region(_))));
    }

    #[test]
    fn surface_contains_barrier_rows() {
        let m = market();
        let nodes = surface(&m, 80.0, 160.0, 9, 5).unwrap();
        assert_eq!(nodes.len(), 4 * 10 + 9);
        let barrier: Vec<_> = nodes.iter().filter(|n| n.result.region == Region::Barrier).collect();
        assert_eq!(barrier.len(), 4);
        assert!(barrier.iter().all(|n| n.result.value == 0.0));
        for n in &nodes {
            assert_eq!(n.result, price(&PriceQuery::new(n.spot, n.time), &m).unwrap());
        }
        assert!(surface(&m, 160.0, 80.0, 9, 5).is_err());
        assert!(surface(&m, 80.0, 160.0, 1, 5).is_err());
    }
}
