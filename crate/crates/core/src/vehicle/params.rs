use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tire::{effective_radius, TireParams};
use crate::GRAVITY;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    GeneralEv,
    Vhs,
}

impl ModelKind {
    pub fn n_states(self) -> usize {
        match self {
            ModelKind::GeneralEv => 8,
            ModelKind::Vhs => 5,
        }
    }

    /// Index of the lateral velocity state.
    pub fn lateral_velocity_index(self) -> usize {
        match self {
            ModelKind::GeneralEv => 0,
            ModelKind::Vhs => 1,
        }
    }

    pub fn yaw_rate_index(self) -> usize {
        self.lateral_velocity_index() + 1
    }

    pub fn roll_index(self) -> usize {
        self.lateral_velocity_index() + 2
    }

    pub fn state_names(self) -> &'static [&'static str] {
        match self {
            ModelKind::GeneralEv => &["v", "r", "phi", "phi_dot", "omega1", "omega2", "omega3", "omega4"],
            ModelKind::Vhs => &["y", "v_y", "r", "phi", "phi_dot"],
        }
    }
}

fn default_lambda_max() -> f64 {
    0.1
}

fn default_alpha_max() -> f64 {
    6f64.to_radians()
}

/// Parameters of the general electric vehicle. Field names follow the usual
/// symbols (`m_s`, `I_xx`, `k_phi`, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralEvParams {
    pub m_s: f64,
    pub m_u: f64,
    pub l_f: f64,
    pub l_r: f64,
    pub t_f: f64,
    pub t_r: f64,
    pub h_s: f64,
    pub h_u: f64,
    pub h_cg: f64,
    /// Roll-centre height above ground; `h_cg − h_s` when absent.
    #[serde(default, rename = "h_R", skip_serializing_if = "Option::is_none")]
    pub h_r: Option<f64>,
    #[serde(rename = "I_xx")]
    pub i_xx: f64,
    #[serde(rename = "I_zz")]
    pub i_zz: f64,
    pub k_phi: f64,
    pub c_phi: f64,
    pub r_eff: f64,
    #[serde(rename = "I_w")]
    pub i_w: f64,
    #[serde(rename = "Q_max")]
    pub q_max: f64,
    #[serde(rename = "Q_min")]
    pub q_min: f64,
    pub delta_max: f64,
    pub k_usd: f64,
    #[serde(rename = "RI_c")]
    pub ri_c: f64,
    /// Rear side-slip bound (rad).
    #[serde(default = "default_alpha_max")]
    pub alpha_r_max: f64,
    /// Maximum wheel slip ratio for the wheel-speed band.
    #[serde(default = "default_lambda_max")]
    pub lambda_max: f64,
    pub tire: TireParams,
}

impl GeneralEvParams {
    pub fn m(&self) -> f64 {
        self.m_s + self.m_u
    }

    pub fn h_r(&self) -> f64 {
        self.h_r.unwrap_or(self.h_cg - self.h_s)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m_s", self.m_s),
            ("m_u", self.m_u),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("t_f", self.t_f),
            ("t_r", self.t_r),
            ("h_s", self.h_s),
            ("h_u", self.h_u),
            ("h_cg", self.h_cg),
            ("I_xx", self.i_xx),
            ("I_zz", self.i_zz),
            ("k_phi", self.k_phi),
            ("c_phi", self.c_phi),
            ("r_eff", self.r_eff),
            ("I_w", self.i_w),
            ("delta_max", self.delta_max),
            ("alpha_r_max", self.alpha_r_max),
        ];
        check_positive(&positive)?;
        if !(self.q_min < 0.0 && 0.0 < self.q_max) {
            return Err(Error::Config(format!(
                "torque limits must satisfy Q_min < 0 < Q_max, got [{}, {}]",
                self.q_min, self.q_max
            )));
        }
        if !(self.ri_c > 0.0 && self.ri_c <= 1.0) {
            return Err(Error::Config(format!("RI_c must lie in (0, 1], got {}", self.ri_c)));
        }
        if !(self.lambda_max >= 0.0 && self.k_usd >= 0.0) {
            return Err(Error::Config("lambda_max and k_usd must be non-negative".into()));
        }
        self.tire.validate()
    }
}

/// Parameters of the high-speed race car.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VhsParams {
    pub m: f64,
    pub m_s: f64,
    /// Tabulated front axle mass; checked against `m·l_r/l`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_f: Option<f64>,
    pub l_f: f64,
    pub l_r: f64,
    #[serde(rename = "I_xx")]
    pub i_xx: f64,
    #[serde(rename = "I_z")]
    pub i_zz: f64,
    pub h_s: f64,
    #[serde(rename = "K_s")]
    pub k_s: f64,
    pub b_s: f64,
    /// Suspension spring lever arm (m).
    pub l_s: f64,
    pub t_f: f64,
    pub t_r: f64,
    pub r_eff: f64,
    /// Optional tire radii used only to cross-check `r_eff`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_stat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_w: Option<f64>,
    pub delta_max: f64,
    #[serde(rename = "Q_max")]
    pub q_max: f64,
    #[serde(rename = "Q_min")]
    pub q_min: f64,
    #[serde(default)]
    pub k_usd: f64,
    #[serde(default = "default_alpha_max")]
    pub alpha_r_max: f64,
    pub tire: TireParams,
}

impl VhsParams {
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    /// Front axle mass `m·l_r/l`.
    pub fn front_mass(&self) -> f64 {
        self.m * self.l_r / self.wheelbase()
    }

    pub fn rear_mass(&self) -> f64 {
        self.m * self.l_f / self.wheelbase()
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("m", self.m),
            ("m_s", self.m_s),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("I_xx", self.i_xx),
            ("I_z", self.i_zz),
            ("h_s", self.h_s),
            ("K_s", self.k_s),
            ("b_s", self.b_s),
            ("l_s", self.l_s),
            ("t_f", self.t_f),
            ("t_r", self.t_r),
            ("r_eff", self.r_eff),
            ("delta_max", self.delta_max),
            ("alpha_r_max", self.alpha_r_max),
        ];
        check_positive(&positive)?;
        if !(self.q_min < 0.0 && 0.0 < self.q_max) {
            return Err(Error::Config("torque limits must satisfy Q_min < 0 < Q_max".into()));
        }
        if let Some(m_f) = self.m_f {
            let derived = self.front_mass();
            if (m_f - derived).abs() > 0.05 {
                return Err(Error::Config(format!(
                    "m_f = {m_f} disagrees with m*l_r/l = {derived:.3}"
                )));
            }
        }
        if let (Some(r_stat), Some(r_w)) = (self.r_stat, self.r_w) {
            let derived = effective_radius(r_stat, r_w)?;
            if (derived - self.r_eff).abs() > 5e-3 {
                return Err(Error::Config(format!(
                    "r_eff = {} disagrees with radius pair ({r_stat}, {r_w}) -> {derived:.4}",
                    self.r_eff
                )));
            }
        }
        self.tire.validate()
    }
}

fn check_positive(values: &[(&str, f64)]) -> Result<()> {
    for (name, value) in values {
        if !(*value > 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("{name} must be positive and finite, got {value}")));
        }
    }
    Ok(())
}

/// A parameterized vehicle of either layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Vehicle {
    GeneralEv(GeneralEvParams),
    Vhs(VhsParams),
}

impl Vehicle {
    pub fn kind(&self) -> ModelKind {
        match self {
            Vehicle::GeneralEv(_) => ModelKind::GeneralEv,
            Vehicle::Vhs(_) => ModelKind::Vhs,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Vehicle::GeneralEv(p) => p.validate(),
            Vehicle::Vhs(p) => p.validate(),
        }
    }

    pub fn mass(&self) -> f64 {
        match self {
            Vehicle::GeneralEv(p) => p.m(),
            Vehicle::Vhs(p) => p.m,
        }
    }

    pub fn l_f(&self) -> f64 {
        match self {
            Vehicle::GeneralEv(p) => p.l_f,
            Vehicle::Vhs(p) => p.l_f,
        }
    }

    pub fn l_r(&self) -> f64 {
        match self {
            Vehicle::GeneralEv(p) => p.l_r,
            Vehicle::Vhs(p) => p.l_r,
        }
    }

    pub fn wheelbase(&self) -> f64 {
        self.l_f() + self.l_r()
    }

    pub fn tracks(&self) -> (f64, f64) {
        match self {
            Vehicle::GeneralEv(p) => (p.t_f, p.t_r),
            Vehicle::Vhs(p) => (p.t_f, p.t_r),
        }
    }

    pub fn r_eff(&self) -> f64 {
        match self {
            Vehicle::GeneralEv(p) => p.r_eff,
            Vehicle::Vhs(p) => p.r_eff,
        }
    }

    pub fn tire(&self) -> &TireParams {
        match self {
            Vehicle::GeneralEv(p) => &p.tire,
            Vehicle::Vhs(p) => &p.tire,
        }
    }

    pub fn tire_mut(&mut self) -> &mut TireParams {
        match self {
            Vehicle::GeneralEv(p) => &mut p.tire,
            Vehicle::Vhs(p) => &mut p.tire,
        }
    }

    pub fn delta_max(&self) -> f64 {
        match self {
            Vehicle::GeneralEv(p) => p.delta_max,
            Vehicle::Vhs(p) => p.delta_max,
        }
    }

    pub fn torque_limits(&self) -> (f64, f64) {
        match self {
            Vehicle::GeneralEv(p) => (p.q_min, p.q_max),
            Vehicle::Vhs(p) => (p.q_min, p.q_max),
        }
    }

    pub fn k_usd(&self) -> f64 {
        match self {
            Vehicle::GeneralEv(p) => p.k_usd,
            Vehicle::Vhs(p) => p.k_usd,
        }
    }

    pub fn alpha_r_max(&self) -> f64 {
        match self {
            Vehicle::GeneralEv(p) => p.alpha_r_max,
            Vehicle::Vhs(p) => p.alpha_r_max,
        }
    }

    /// Static normal load on one front and one rear wheel.
    pub fn static_axle_loads(&self) -> (f64, f64) {
        let w = self.mass() * GRAVITY;
        let l = self.wheelbase();
        (w * self.l_r() / (2.0 * l), w * self.l_f() / (2.0 * l))
    }
}

/// Driver command `W = [Q₁, δ₁, …, Q₄, δ₄]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriverCommand {
    pub torque: [f64; 4],
    pub steering: [f64; 4],
}

impl DriverCommand {
    pub fn as_vector(&self) -> DVector<f64> {
        interleave(&self.torque, &self.steering)
    }

    /// Command with front-wheel steering `delta` and the given wheel torques.
    pub fn front_steer(delta: f64, torque: [f64; 4]) -> Self {
        Self { torque, steering: [delta, delta, 0.0, 0.0] }
    }

    /// Command actually seen by the wheels after adding a control delta.
    pub fn apply(&self, delta: &ControlDelta) -> DriverCommand {
        let mut out = *self;
        for i in 0..4 {
            out.torque[i] += delta.torque[i];
            out.steering[i] += delta.steering[i];
        }
        out
    }
}

/// Control delta `U = [ΔQ₁, Δδ₁, …, ΔQ₄, Δδ₄]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlDelta {
    pub torque: [f64; 4],
    pub steering: [f64; 4],
}

impl ControlDelta {
    pub fn as_vector(&self) -> DVector<f64> {
        interleave(&self.torque, &self.steering)
    }

    pub fn from_slice(u: &[f64]) -> Self {
        assert_eq!(u.len(), 8, "control delta has 8 channels");
        let mut out = Self::default();
        for i in 0..4 {
            out.torque[i] = u[2 * i];
            out.steering[i] = u[2 * i + 1];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.torque.iter().chain(&self.steering).fold(0.0, |acc, v| acc.max(v.abs()))
    }
}

fn interleave(a: &[f64; 4], b: &[f64; 4]) -> DVector<f64> {
    DVector::from_iterator(8, (0..4).flat_map(|i| [a[i], b[i]]))
}

/// Which actuators the controller may move (`T_w`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActuatorConfig {
    pub t_q: [u8; 4],
    pub t_delta: [u8; 4],
}

impl ActuatorConfig {
    pub fn all() -> Self {
        Self { t_q: [1; 4], t_delta: [1; 4] }
    }

    pub fn none() -> Self {
        Self { t_q: [0; 4], t_delta: [0; 4] }
    }

    pub fn torque_only() -> Self {
        Self { t_q: [1; 4], t_delta: [0; 4] }
    }

    /// Rear-wheel drive with front steering only.
    pub fn vhs() -> Self {
        Self { t_q: [0, 0, 1, 1], t_delta: [1, 1, 0, 0] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t_q.iter().chain(&self.t_delta).any(|&f| f > 1) {
            return Err(Error::Config("actuator flags must be 0 or 1".into()));
        }
        Ok(())
    }

    /// Flags in input-vector order `[t_Q1, t_δ1, …]`.
    pub fn mask(&self) -> [bool; 8] {
        let mut out = [false; 8];
        for i in 0..4 {
            out[2 * i] = self.t_q[i] == 1;
            out[2 * i + 1] = self.t_delta[i] == 1;
        }
        out
    }

    /// Indices of enabled input channels.
    pub fn enabled(&self) -> Vec<usize> {
        self.mask().iter().enumerate().filter(|(_, &on)| on).map(|(i, _)| i).collect()
    }
}
