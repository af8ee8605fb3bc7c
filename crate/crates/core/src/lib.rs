//! Pricing and verification of a call knocked out at the discounted strike
//! `S = Ke^{-r(T-p)}`, built on the heat-equation form of Black-Scholes and
//! a point symmetry of the heat equation.
//!
//! The crate is organised as
//!
//! - [`transform`]: coordinate chain between `(S, p, V)` and `(x, t, u)`,
//!   plus finite-difference PDE residuals;
//! - [`symmetry`]: symmetry generators, terminal constraints on their
//!   coefficients, characteristic reduction and the further-solution check;
//! - [`analytic`]: closed-form price, region classification and greeks;
//! - [`fd`]: Crank-Nicolson oracle on a barrier-fitted grid;
//! - [`mc`]: Monte Carlo oracle with Brownian-bridge barrier correction;
//! - [`oracle`]: closed form against both oracles;
//! - [`verify`]: the invariant check suite used by the command line.

pub mod analytic;
pub mod error;
pub mod fd;
pub mod linalg;
pub mod mc;
pub mod oracle;
pub mod stencil;
pub mod symmetry;
pub mod transform;
pub mod verify;

pub use analytic::{barrier_level, greeks, heat_solution, payoff, price, Greeks, PriceQuery, PriceResult, Region};
pub use error::{Error, Result};
pub use transform::{derive_params, from_heat, to_heat, BsPoint, HeatPoint, MarketParams, TransformParams};
