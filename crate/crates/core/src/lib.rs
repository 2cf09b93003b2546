//! Leggett-Garg temporal-correlation statistics for diffusive
//! (Ornstein-Uhlenbeck) and persistent (Kac, telegraph) stochastic dynamics,
//! with a telegraph PDE solver and its analytic continuation to a 1D chiral
//! Dirac system.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`, which the CLI uses throughout.

// Parameter checks are written as `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod correlations;
pub mod dirac;
pub mod error;
pub mod io;
pub mod lattice;
pub mod observables;
pub mod plot;
pub mod rng;
pub mod scalar;
pub mod stochastic;
pub mod telegraph;
pub mod theory;
pub mod validate;

pub use error::{Error, Result};
pub use scalar::Real;

pub type TimeGrid64 = stochastic::TimeGrid<f64>;
pub type OUParams64 = stochastic::OUParams<f64>;
pub type KacParams64 = stochastic::KacParams<f64>;
pub type Trajectory64 = stochastic::Trajectory<f64>;
pub type KacTrajectory64 = stochastic::KacTrajectory<f64>;
pub type BinarySeries64 = observables::BinarySeries<f64>;
pub type CorrelationEstimate64 = correlations::CorrelationEstimate<f64>;
pub type LGResult64 = correlations::LGResult<f64>;
pub type SpaceGrid64 = lattice::SpaceGrid<f64>;
pub type TelegraphParams64 = telegraph::TelegraphParams<f64>;
pub type Field1D64 = telegraph::Field1D<f64>;
pub type DiracParams64 = dirac::DiracParams<f64>;
pub type SpinorField64 = dirac::SpinorField<f64>;
