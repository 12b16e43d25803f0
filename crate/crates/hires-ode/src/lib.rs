//! First-order optimization methods and their resolution-ODE companions.
//!
//! The crate is organized around a single pipeline:
//!
//! * [`problem`] — objective/saddle/prox oracles and finite-difference
//!   Jacobians shared by everything else.
//! * [`dta`] — one-step updates and trajectory runners for the discrete-time
//!   algorithms (gradient descent, heavy-ball, accelerated gradients, mirror
//!   descent, and the primal-dual/minimax family), plus the state liftings
//!   that turn momentum recursions into fixed-point templates in step `√s`.
//! * [`resolution`] — construction of the modified-equation vector fields
//!   that match each discrete method to first order in `s` (or `√s`),
//!   both via the generic coefficient recursion for affine maps and via
//!   closed forms.
//! * [`integrate`] — fixed-step RK4 reference integration with Richardson
//!   certification, accurate enough that discretization error never
//!   pollutes order measurements.
//! * [`metrics`] — discrete-vs-continuous error metrics, empirical
//!   convergence-order tables, Lyapunov functions and convergence verdicts.
//! * [`corrected`] — the corrected schemes (a Hessian-free corrected
//!   primal-dual method and a semi-implicit corrected heavy-ball method)
//!   with parameter validation and certified contraction monitors.
//! * [`catalog`] — the built-in problem instances and experiment setups
//!   driven by the CLI.
//! * [`verify`] — the self-check property suite behind `verify`.

pub mod catalog;
pub mod corrected;
pub mod dta;
pub mod error;
pub mod integrate;
pub mod metrics;
pub mod problem;
pub mod resolution;
pub mod verify;

pub use error::{Error, Result};

/// Column vector of `f64`, the state type used throughout.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix of `f64`.
pub type Matrix = nalgebra::DMatrix<f64>;
