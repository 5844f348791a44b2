//! Model predictive control for integrated vehicle lateral stability.
//!
//! The crate covers the full pipeline of a linearized-tire MPC:
//!
//! * [`tire`]: Dugoff and Pacejka lateral force models and their linearization.
//! * [`vehicle`]: affine state-space models for a torque-vectoring electric
//!   vehicle (8 states) and a high-speed race car with road banking (5 states).
//! * [`reference`]: desired yaw rate, desired state vectors and checkpoint steering.
//! * [`constraints`]: rollover index, slip, yaw-rate and actuator constraint rows.
//! * [`qp`]: a sparse ADMM quadratic-program solver with an LDLᵀ linear-system step.
//! * [`mpc`]: zero-order-hold discretization, condensed and sparse CFTOC builders,
//!   and the receding-horizon controller.
//! * [`sim`]: a nonlinear plant, RK4 integration, scenario runner and metrics.
//! * [`config`]: TOML parameter and scenario files, including bundled presets.

pub mod config;
pub mod constraints;
pub mod error;
pub mod matrix_io;
pub mod mpc;
pub mod qp;
pub mod reference;
pub mod sim;
pub mod tire;
pub mod vehicle;

pub use error::{Error, Result};

/// Gravitational acceleration (m/s²).
pub const GRAVITY: f64 = 9.81;
