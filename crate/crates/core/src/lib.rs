//! Pricing, quoting and hedging when the price curve is the indifference
//! curve of a liquidity supplier with g-expectation preferences.
//!
//! The crate is organised the way the computation flows: [`model`] holds the
//! factor diffusion, drivers and payoffs; [`pde`] solves the semilinear
//! pricing equation over a grid of volumes; [`quotes`] turns the resulting
//! family into a quoting rule; [`simulate`] runs the large trader's P&L and
//! the replication experiment; [`closed_form`] and [`esscher`] provide the
//! analytic oracles.

// `!(x > 0.0)` is used throughout so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod closed_form;
pub mod error;
pub mod esscher;
pub mod export;
pub mod model;
pub mod pde;
pub mod quotes;
pub mod simulate;

pub use error::{Error, Result};
pub use model::{CoefficientSpec, DriverSpec, FactorModel, PayoffSpec, TimeFunction};
pub use pde::{
    build_family, invert_z, solve_hedge_value, solve_semilinear, InversionResult, PriceSurface,
    Saturation, SolverOptions, SpaceTimeGrid, SurfaceFamily,
};
