//! Bidding in repeated second-price auctions where the item's value depends
//! on the age since the bidder's last win.
//!
//! * [`model`]: value curves, competition CDFs and bid policies.
//! * [`ode`]: adaptive Dormand–Prince 5(4) integrator with escape guards.
//! * [`solver`]: shooting/bisection for the optimal value and bid.
//! * [`analytic`]: closed-form and quadrature policy evaluation.
//! * [`simulator`]: Poisson-arrival Monte Carlo of the auction stream.
//!
//! Everything numerical is generic over [`Scalar`]; the `*64` aliases below
//! fix the scalar to `f64`, which is what the solver needs in practice.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod export;
pub mod model;
pub mod ode;
pub mod quadrature;
pub mod scalar;
pub mod simulator;
pub mod solver;
pub mod special;

pub use error::{Error, Result};
pub use model::{BidPolicy, CompetitionModel, EnvParams, GridPolicy, GridTail, Model, ValueCurve};
pub use scalar::Scalar;

pub type EnvParams64 = model::EnvParams<f64>;
pub type ValueCurve64 = model::ValueCurve<f64>;
pub type CompetitionModel64 = model::CompetitionModel<f64>;
pub type BidPolicy64 = model::BidPolicy<f64>;
pub type Model64 = model::Model<f64>;
pub type Trajectory64 = ode::Trajectory<f64>;
pub type SolverConfig64 = solver::SolverConfig<f64>;
pub type SolveResult64 = solver::SolveResult<f64>;
pub type PolicyEvaluation64 = analytic::PolicyEvaluation<f64>;
