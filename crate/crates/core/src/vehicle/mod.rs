//! Continuous-time affine vehicle models `Ẋ = A·X + E·W + B·U + D`.
//!
//! Two layouts are supported:
//!
//! * General electric vehicle, `X = [v, r, φ, φ̇, ω₁, ω₂, ω₃, ω₄]`.
//! * High-speed race car (VHS), `X = [y, v_y, r, φ, φ̇]`, with a road-banking
//!   channel `C_φ·φ_r` folded into `D` and kept separately in [`VehicleModel::c_phi`].
//!
//! Wheels are ordered front-left, front-right, rear-left, rear-right. Axes follow
//! ISO vehicle conventions (x forward, y left, z up). Positive roll is a lean to
//! the right, which loads the right-hand wheels.

mod assemble;
mod body;
mod loads;
mod maps;
mod params;

pub use assemble::{assemble, assemble_general, assemble_vhs, VehicleModel};
pub use body::{body_matrices_general, body_matrices_vhs, wheel_dynamics, WheelDynamics};
pub use loads::normal_loads;
pub use maps::{cog_map, tire_affine_maps, wheel_rotation_map, TireAffineMaps};
pub use params::{
    ActuatorConfig, ControlDelta, DriverCommand, GeneralEvParams, ModelKind, Vehicle, VhsParams,
};
