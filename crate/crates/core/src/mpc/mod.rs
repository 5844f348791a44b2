//! Receding-horizon controller.
//!
//! Each step linearizes the tires at the measured state, assembles and
//! samples the affine model, condenses the horizon into a QP over the
//! enabled actuator deltas and applies the first move.

mod cftoc;
mod discretize;

pub use cftoc::{build_cftoc, build_cftoc_sparse, Cftoc, CftocLayout};
pub use discretize::{discretize, DiscreteModel};

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constraints::{input_box, input_rows, state_rows};
use crate::error::{Error, Result};
use crate::qp::{AdmmSolver, QpSolution, QpStatus, SolverSettings};
use crate::reference::{desired_state_general, desired_state_vhs, desired_yaw_rate};
use crate::tire::{linearize_tire, slip_angle, TireLinearization, TireOperatingPoint};
use crate::vehicle::{assemble, normal_loads, ActuatorConfig, ControlDelta, DriverCommand, ModelKind, Vehicle, VehicleModel};
use crate::GRAVITY;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub model_kind: ModelKind,
    #[serde(rename = "N")]
    pub horizon: usize,
    #[serde(rename = "T_s")]
    pub sample_time: f64,
    /// Diagonal of `Q`, one entry per state.
    #[serde(rename = "Q")]
    pub state_weights: Vec<f64>,
    /// Diagonal of `R` over `[ΔQ₁, Δδ₁, …, ΔQ₄, Δδ₄]`.
    #[serde(rename = "R")]
    pub input_weights: Vec<f64>,
    #[serde(rename = "R_rate", default, skip_serializing_if = "Option::is_none")]
    pub input_rate_weights: Option<Vec<f64>>,
    #[serde(rename = "sigma")]
    pub slack_weight: f64,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl MpcConfig {
    pub fn general_ev() -> Self {
        Self {
            model_kind: ModelKind::GeneralEv,
            horizon: 10,
            sample_time: 0.1,
            state_weights: vec![1.0, 100.0, 10.0, 10.0, 0.1, 0.1, 0.1, 0.1],
            input_weights: [1e-4, 10.0].repeat(4),
            input_rate_weights: None,
            slack_weight: 0.1,
            solver: SolverSettings::default(),
        }
    }

    pub fn vhs() -> Self {
        Self {
            model_kind: ModelKind::Vhs,
            horizon: 50,
            sample_time: 0.05,
            state_weights: vec![20.0, 10.0, 50.0, 20.0, 20.0],
            input_weights: [1e-4, 10.0].repeat(4),
            input_rate_weights: None,
            slack_weight: 0.1,
            solver: SolverSettings::default(),
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::GeneralEv => Self::general_ev(),
            ModelKind::Vhs => Self::vhs(),
        }
    }

    pub fn validate(&self, actuators: &ActuatorConfig) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon N must be at least 1".into()));
        }
        if !(self.sample_time > 0.0) {
            return Err(Error::Config(format!("T_s must be positive, got {}", self.sample_time)));
        }
        if self.state_weights.len() != self.model_kind.n_states() {
            return Err(Error::Config(format!(
                "Q has {} entries, the {:?} model has {} states",
                self.state_weights.len(),
                self.model_kind,
                self.model_kind.n_states()
            )));
        }
        if self.input_weights.len() != 8 {
            return Err(Error::Config(format!("R needs 8 entries, got {}", self.input_weights.len())));
        }
        let rate = self.input_rate_weights.as_deref().unwrap_or(&[]);
        if self.input_rate_weights.is_some() && rate.len() != 8 {
            return Err(Error::Config("R_rate needs 8 entries".into()));
        }
        let all = self.state_weights.iter().chain(&self.input_weights).chain(rate);
        if all.clone().any(|w| !(*w >= 0.0) || !w.is_finite()) || !(self.slack_weight >= 0.0) {
            return Err(Error::Config("weights must be finite and non-negative".into()));
        }
        for ch in actuators.enabled() {
            if !(self.input_weights[ch] > 0.0) {
                return Err(Error::Config(format!("R entry {ch} must be positive for an enabled actuator")));
            }
        }
        self.solver.validate()
    }
}

/// What the controller should track this step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    /// Desired steering, mapped to a yaw-rate target through the bicycle model.
    pub delta_d: f64,
    /// Desired lateral position (race-car layout only).
    pub y_d: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcStepResult {
    pub u_apply: ControlDelta,
    /// Predicted `x_1..x_N` under the optimal input sequence.
    pub predicted_states: Vec<DVector<f64>>,
    pub qp_solution: QpSolution,
    /// QP rows whose multiplier is non-zero.
    pub active_constraints: Vec<usize>,
    /// Set when the QP did not reach `Solved`.
    pub degraded: bool,
    pub r_d: f64,
    pub x_d: DVector<f64>,
    pub slip_angles: [f64; 4],
    pub normal_loads: [f64; 4],
    pub linearizations: [TireLinearization; 4],
    /// Wall-clock seconds for the whole step, QP construction included.
    pub step_time: f64,
}

/// Linearization of the tires and the affine model at a measured state.
#[derive(Debug, Clone)]
pub struct OperatingPoint {
    pub slip_angles: [f64; 4],
    pub normal_loads: [f64; 4],
    pub linearizations: [TireLinearization; 4],
    pub model: VehicleModel,
}

/// Slip angles and normal loads at `x`, tire linearizations there and the assembled model.
pub fn operating_point(
    vehicle: &Vehicle,
    x: &DVector<f64>,
    w0: &DriverCommand,
    actuators: &ActuatorConfig,
    u: f64,
    phi_r: f64,
) -> Result<OperatingPoint> {
    let kind = vehicle.kind();
    if x.len() != kind.n_states() {
        return Err(Error::Dimension(format!("state has {} entries, expected {}", x.len(), kind.n_states())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("measured state".into()));
    }
    let (v, r) = (x[kind.lateral_velocity_index()], x[kind.yaw_rate_index()]);
    let fz = normal_loads(vehicle, x, phi_r);
    let mut alpha = [0.0; 4];
    let mut lin = [TireLinearization { f_y_bar: 0.0, c_alpha_tilde: 0.0, alpha_bar: 0.0 }; 4];
    for i in 0..4 {
        alpha[i] = slip_angle(i + 1, w0.steering[i], v, r, u, vehicle.l_f(), vehicle.l_r())?;
        lin[i] = linearize_tire(&TireOperatingPoint::new(alpha[i], fz[i]), vehicle.tire())?;
    }
    let model = assemble(vehicle, u, &lin, w0, actuators, phi_r)?;
    Ok(OperatingPoint { slip_angles: alpha, normal_loads: fz, linearizations: lin, model })
}

#[derive(Debug, Clone)]
pub struct MpcController {
    pub config: MpcConfig,
    pub vehicle: Vehicle,
    pub actuators: ActuatorConfig,
    /// Longitudinal speed, held constant.
    pub u: f64,
    /// Road banking angle.
    pub phi_r: f64,
    solver: AdmmSolver,
    previous: Option<(QpSolution, CftocLayout)>,
    last_applied: [f64; 8],
}

impl MpcController {
    pub fn new(config: MpcConfig, vehicle: Vehicle, actuators: ActuatorConfig, u: f64, phi_r: f64) -> Result<Self> {
        vehicle.validate()?;
        actuators.validate()?;
        config.validate(&actuators)?;
        if config.model_kind != vehicle.kind() {
            return Err(Error::Config(format!(
                "controller configured for {:?} but vehicle is {:?}",
                config.model_kind,
                vehicle.kind()
            )));
        }
        if !(u > 0.0) {
            return Err(Error::Config(format!("speed must be positive, got {u}")));
        }
        let solver = AdmmSolver::new(config.solver);
        Ok(Self { config, vehicle, actuators, u, phi_r, solver, previous: None, last_applied: [0.0; 8] })
    }

    /// Forgets the warm start.
    pub fn reset(&mut self) {
        self.previous = None;
        self.last_applied = [0.0; 8];
    }

    /// Number of KKT symbolic analyses so far; stays at 1 while the QP pattern is unchanged.
    pub fn symbolic_analyses(&self) -> usize {
        self.solver.symbolic_analyses()
    }

    fn desired(&self, reference: &Reference) -> Result<(f64, DVector<f64>)> {
        let r_d = desired_yaw_rate(
            reference.delta_d,
            self.u,
            self.vehicle.wheelbase(),
            self.vehicle.k_usd(),
            self.vehicle.tire().mu_y,
            GRAVITY,
        )?;
        let x_d = match self.vehicle.kind() {
            ModelKind::GeneralEv => desired_state_general(self.u, r_d, self.vehicle.r_eff()),
            ModelKind::Vhs => desired_state_vhs(reference.y_d, r_d),
        };
        Ok((r_d, x_d))
    }

    /// Previous solution shifted one step ahead, last block repeated.
    fn shifted_warm_start(&self, layout: &CftocLayout, n_rows: usize) -> Option<QpSolution> {
        let (prev, pl) = self.previous.as_ref()?;
        if pl != layout || prev.x.len() != layout.n_vars() || prev.y.len() != n_rows {
            return None;
        }
        if !matches!(prev.status, QpStatus::Solved | QpStatus::MaxIter) {
            return None;
        }
        let shift = |v: &[f64], block: usize, blocks: usize| {
            let mut out = v.to_vec();
            for k in 0..blocks.saturating_sub(1) {
                out.copy_within((k + 1) * block..(k + 2) * block, k * block);
            }
            out
        };
        let m = layout.channels.len();
        let mut warm = prev.clone();
        warm.x = shift(&prev.x, m, layout.horizon);
        warm.y = shift(&prev.y, layout.rows_per_step, layout.horizon);
        Some(warm)
    }

    pub fn step(&mut self, x: &DVector<f64>, w0: &DriverCommand, reference: &Reference) -> Result<MpcStepResult> {
        let start = Instant::now();
        let op = operating_point(&self.vehicle, x, w0, &self.actuators, self.u, self.phi_r)?;
        let dm = discretize(&op.model, self.config.sample_time)?;
        let (r_d, x_d) = self.desired(reference)?;

        let n_x = self.vehicle.kind().n_states();
        let omega = match self.vehicle.kind() {
            ModelKind::GeneralEv => [x[4], x[5], x[6], x[7]],
            ModelKind::Vhs => [0.0; 4],
        };
        let f_y0 = op.linearizations.map(|l| l.f_y_bar);
        let inputs = input_rows(&self.vehicle, w0, &op.normal_loads, &f_y0, &self.actuators)?;
        let cons = state_rows(&self.vehicle, self.u, &omega, self.config.slack_weight)?.merge(&inputs)?;
        debug_assert_eq!(cons.g_x.ncols(), n_x);

        let cftoc = build_cftoc(
            &dm,
            x,
            &w0.as_vector(),
            &x_d,
            &cons,
            &self.config,
            &self.actuators.mask(),
            &self.last_applied,
        )?;
        let warm = self.shifted_warm_start(&cftoc.layout, cftoc.qp.m());
        let mut sol = self.solver.solve(&cftoc.qp, warm.as_ref())?;
        if matches!(sol.status, QpStatus::Solved | QpStatus::MaxIter) {
            let s = cftoc.layout.slack_index();
            sol.x[s] = cftoc.min_slack(&sol.x);
        }

        let usable = matches!(sol.status, QpStatus::Solved | QpStatus::MaxIter);
        let mut u = if usable { cftoc.layout.input(&sol.x, 0) } else { [0.0; 8] };
        // exact feasibility of the hard input bands
        let (lo, hi) = input_box(&inputs);
        for j in 0..8 {
            u[j] = u[j].clamp(lo[j], hi[j]);
        }
        let predicted = if usable { cftoc.predicted_states(&sol.x) } else { Vec::new() };
        let tol = self.config.solver.eps_abs;
        let active = sol.y.iter().enumerate().filter(|(_, y)| y.abs() > tol).map(|(i, _)| i).collect();

        self.previous = if usable { Some((sol.clone(), cftoc.layout.clone())) } else { None };
        self.last_applied = u;
        Ok(MpcStepResult {
            u_apply: ControlDelta::from_slice(&u),
            predicted_states: predicted,
            degraded: sol.status != QpStatus::Solved,
            qp_solution: sol,
            active_constraints: active,
            r_d,
            x_d,
            slip_angles: op.slip_angles,
            normal_loads: op.normal_loads,
            linearizations: op.linearizations,
            step_time: start.elapsed().as_secs_f64(),
        })
    }
}

/// Solver settings tight enough for cross-checking formulations.
pub fn reference_solver_settings() -> SolverSettings {
    SolverSettings { eps_abs: 1e-10, eps_rel: 1e-10, max_iter: 200_000, ..Default::default() }
}
