//! Reference signals: desired yaw rate, desired state vectors and
//! checkpoint-derived steering.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Target point in the vehicle frame: `x_d` ahead, `y_d` to the left.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub x_d: f64,
    pub y_d: f64,
}

impl Checkpoint {
    pub fn new(x_d: f64, y_d: f64) -> Result<Self> {
        if !(x_d > 0.0) || !y_d.is_finite() {
            return Err(domain(format!("checkpoint needs x_d > 0, got ({x_d}, {y_d})")));
        }
        Ok(Self { x_d, y_d })
    }
}

/// Bicycle-model yaw rate `u·δ/(l + k_usd·u²)`, capped at the friction limit `μ_y·g/u`.
pub fn desired_yaw_rate(delta_d: f64, u: f64, l: f64, k_usd: f64, mu_y: f64, g: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(domain(format!("desired yaw rate needs u > 0, got {u}")));
    }
    let r_b = u * delta_d / (l + k_usd * u * u);
    let r_max = mu_y * g / u;
    if delta_d == 0.0 {
        return Ok(0.0);
    }
    Ok(r_b.abs().min(r_max).copysign(delta_d))
}

/// `[0, r_d, 0, 0, u/r_eff ×4]`.
pub fn desired_state_general(u: f64, r_d: f64, r_eff: f64) -> DVector<f64> {
    let w = u / r_eff;
    DVector::from_row_slice(&[0.0, r_d, 0.0, 0.0, w, w, w, w])
}

/// `[y_d, 0, r_d, 0, 0]`.
pub fn desired_state_vhs(y_d: f64, r_d: f64) -> DVector<f64> {
    DVector::from_row_slice(&[y_d, 0.0, r_d, 0.0, 0.0])
}

/// Heading to the checkpoint and the steering that points the velocity at it,
/// `(ψ_d, δ_d)` with `δ_d = ψ_d + v_y/u` clamped to `±delta_max`.
pub fn checkpoint_steering(cp: &Checkpoint, v_y: f64, u: f64, delta_max: f64) -> Result<(f64, f64)> {
    if !(cp.x_d > 0.0) {
        return Err(domain(format!("checkpoint must lie ahead, got x_d = {}", cp.x_d)));
    }
    if !(u > 0.0) {
        return Err(domain(format!("checkpoint steering needs u > 0, got {u}")));
    }
    let psi_d = (cp.y_d / cp.x_d).atan();
    Ok((psi_d, (psi_d + v_y / u).clamp(-delta_max, delta_max)))
}

/// World-frame offset `(dx, dy)` expressed in a vehicle frame with heading `psi`.
pub fn to_vehicle_frame(dx: f64, dy: f64, psi: f64) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    (c * dx + s * dy, -s * dx + c * dy)
}
