//! Closed-loop simulation: nonlinear plant, scenario runner, traces and metrics.

mod plant;

pub use plant::{integrate, plant_derivatives, rk4_step, wheel_forces, PlantState, TireMode, WheelForces};

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::constraints::{rollover_coeffs, state_rows};
use crate::error::{Error, Result};
use crate::mpc::{MpcConfig, MpcController, Reference};
use crate::reference::{checkpoint_steering, to_vehicle_frame, Checkpoint};
use crate::vehicle::{ActuatorConfig, ControlDelta, DriverCommand, ModelKind, Vehicle};

/// A target in world coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum DriverMode {
    /// Constant front steering `delta_d` and wheel torques.
    Command { delta_d: f64, torque: [f64; 4] },
    /// World checkpoints visited in order; after the last one the car aims
    /// `lookahead` metres ahead at the last checkpoint's lateral position.
    Checkpoints {
        points: Vec<WorldPoint>,
        #[serde(default = "default_lookahead")]
        lookahead: f64,
    },
}

fn default_lookahead() -> f64 {
    100.0
}

fn default_substeps() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Closed-loop steps `M`.
    #[serde(rename = "M")]
    pub steps: usize,
    pub u_kph: f64,
    pub x0: Vec<f64>,
    pub driver: DriverMode,
    /// Road banking, rad.
    #[serde(default)]
    pub phi_r: f64,
    /// Gain on the measurement fed to the controller (1 = perfect model knowledge).
    #[serde(default = "one")]
    pub prediction_error_gain: f64,
    #[serde(default)]
    pub seed: u64,
    pub actuators: ActuatorConfig,
    /// RK4 substeps per sample.
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn one() -> f64 {
    1.0
}

impl Scenario {
    /// Longitudinal speed in m/s.
    pub fn u(&self) -> f64 {
        self.u_kph / 3.6
    }

    pub fn validate(&self, kind: ModelKind) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Config("M must be at least 1".into()));
        }
        if !(self.u_kph > 0.0) {
            return Err(Error::Config(format!("u must be positive, got {} kph", self.u_kph)));
        }
        if self.x0.len() != kind.n_states() {
            return Err(Error::Config(format!(
                "x0 has {} entries, the {kind:?} model has {} states",
                self.x0.len(),
                kind.n_states()
            )));
        }
        if !(self.prediction_error_gain > 0.0 && self.prediction_error_gain <= 2.0) {
            return Err(Error::Config(format!(
                "prediction_error_gain must lie in (0, 2], got {}",
                self.prediction_error_gain
            )));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        match &self.driver {
            DriverMode::Checkpoints { points, lookahead } => {
                if kind != ModelKind::Vhs {
                    return Err(Error::Config("checkpoint driving needs the race-car model".into()));
                }
                if points.is_empty() || !(*lookahead > 0.0) {
                    return Err(Error::Config("checkpoint list must be non-empty with lookahead > 0".into()));
                }
                if points.windows(2).any(|w| w[1].x <= w[0].x) {
                    return Err(Error::Config("checkpoints must have increasing x".into()));
                }
            }
            DriverMode::Command { .. } => {}
        }
        self.actuators.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub time: f64,
    pub state: Vec<f64>,
    pub x_world: f64,
    pub psi: f64,
    /// Applied totals `W₀ + U`.
    pub applied: DriverCommand,
    pub delta: ControlDelta,
    pub alpha: [f64; 4],
    pub f_z: [f64; 4],
    /// Rollover index (general EV) or lateral load-transfer ratio (race car).
    pub ri: f64,
    pub status: String,
    pub solve_ms: f64,
    pub slack: f64,
    /// Largest violation of the state constraint rows at the plant state.
    pub state_violation: f64,
    pub r_d: f64,
    pub y_target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scenario: String,
    pub kind: ModelKind,
    pub rows: Vec<TraceRow>,
}

impl SimTrace {
    pub fn header(&self) -> Vec<String> {
        let mut h = vec!["time".to_string()];
        h.extend(self.kind.state_names().iter().map(|s| s.to_string()));
        h.extend(["x_world", "psi"].map(String::from));
        for i in 1..=4 {
            h.push(format!("Q{i}"));
            h.push(format!("delta{i}"));
        }
        for i in 1..=4 {
            h.push(format!("dQ{i}"));
            h.push(format!("ddelta{i}"));
        }
        h.extend((1..=4).map(|i| format!("alpha{i}")));
        h.extend((1..=4).map(|i| format!("fz{i}")));
        h.extend(["ri", "status", "solve_ms", "slack", "state_violation", "r_d", "y_target"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let io = |e: csv::Error| Error::Io(format!("writing trace: {e}"));
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header()).map_err(io)?;
        for r in &self.rows {
            let mut rec: Vec<String> = vec![r.time.to_string()];
            rec.extend(r.state.iter().map(|v| v.to_string()));
            rec.push(r.x_world.to_string());
            rec.push(r.psi.to_string());
            for i in 0..4 {
                rec.push(r.applied.torque[i].to_string());
                rec.push(r.applied.steering[i].to_string());
            }
            for i in 0..4 {
                rec.push(r.delta.torque[i].to_string());
                rec.push(r.delta.steering[i].to_string());
            }
            rec.extend(r.alpha.iter().map(|v| v.to_string()));
            rec.extend(r.f_z.iter().map(|v| v.to_string()));
            rec.push(r.ri.to_string());
            rec.push(r.status.clone());
            for v in [r.solve_ms, r.slack, r.state_violation, r.r_d, r.y_target] {
                rec.push(v.to_string());
            }
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io(format!("writing trace: {e}")))?;
        Ok(())
    }

    /// Column `name` as a series.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let names = self.kind.state_names();
        let get: Box<dyn Fn(&TraceRow) -> f64> = if let Some(i) = names.iter().position(|s| *s == name) {
            Box::new(move |r| r.state[i])
        } else {
            match name {
                "time" => Box::new(|r| r.time),
                "x_world" => Box::new(|r| r.x_world),
                "psi" => Box::new(|r| r.psi),
                "ri" => Box::new(|r| r.ri),
                "solve_ms" => Box::new(|r| r.solve_ms),
                "slack" => Box::new(|r| r.slack),
                "state_violation" => Box::new(|r| r.state_violation),
                _ => return None,
            }
        };
        Some(self.rows.iter().map(get).collect())
    }
}

/// Lateral load-transfer ratio `(ΣF_z,right − ΣF_z,left) / ΣF_z`.
pub fn load_transfer_ratio(f_z: &[f64; 4]) -> f64 {
    let total: f64 = f_z.iter().sum();
    (f_z[1] + f_z[3] - f_z[0] - f_z[2]) / total
}

fn checkpoint_target(points: &[WorldPoint], lookahead: f64, x_world: f64, y_world: f64) -> WorldPoint {
    points
        .iter()
        .copied()
        .find(|p| p.x > x_world)
        .unwrap_or_else(|| WorldPoint { x: x_world + lookahead, y: points.last().map_or(y_world, |p| p.y) })
}

/// Runs the closed loop for `s.steps` samples of `cfg.sample_time`.
pub fn run_scenario(s: &Scenario, vehicle: &Vehicle, cfg: &MpcConfig) -> Result<SimTrace> {
    let kind = vehicle.kind();
    s.validate(kind)?;
    let u = s.u();
    let mut ctrl = MpcController::new(cfg.clone(), vehicle.clone(), s.actuators, u, s.phi_r)?;
    let mut plant = PlantState::new(DVector::from_column_slice(&s.x0));
    let t_s = cfg.sample_time;
    let mut rows = Vec::with_capacity(s.steps);

    for k in 0..s.steps {
        let measured = &plant.x * s.prediction_error_gain;
        let (w0, reference, y_target) = match &s.driver {
            DriverMode::Command { delta_d, torque } => {
                (DriverCommand::front_steer(*delta_d, *torque), Reference { delta_d: *delta_d, y_d: 0.0 }, 0.0)
            }
            DriverMode::Checkpoints { points, lookahead } => {
                let y_meas = measured[0];
                let target = checkpoint_target(points, *lookahead, plant.x_world, y_meas);
                let (x_d, y_d) = to_vehicle_frame(target.x - plant.x_world, target.y - y_meas, plant.psi);
                let cp = Checkpoint { x_d: x_d.max(1e-3), y_d };
                let (_, delta_d) = checkpoint_steering(&cp, measured[1], u, vehicle.delta_max())?;
                (
                    DriverCommand::front_steer(delta_d, [0.0; 4]),
                    Reference { delta_d, y_d: target.y },
                    target.y,
                )
            }
        };
        let res = ctrl.step(&measured, &w0, &reference)?;
        let applied = w0.apply(&res.u_apply);
        let wf = wheel_forces(vehicle, &plant.x, &applied, u, s.phi_r, &TireMode::Nonlinear)?;
        let ri = match vehicle {
            Vehicle::GeneralEv(p) => {
                let (c1, c2) = rollover_coeffs(p);
                c1 * plant.x[2] + c2 * plant.x[3]
            }
            Vehicle::Vhs(_) => load_transfer_ratio(&wf.f_z),
        };
        let omega = match kind {
            ModelKind::GeneralEv => [plant.x[4], plant.x[5], plant.x[6], plant.x[7]],
            ModelKind::Vhs => [0.0; 4],
        };
        let rows_now = state_rows(vehicle, u, &omega, cfg.slack_weight)?;
        let state_violation = rows_now.max_violation(&plant.x, &DVector::zeros(8));
        let sol = &res.qp_solution;
        rows.push(TraceRow {
            time: k as f64 * t_s,
            state: plant.x.iter().copied().collect(),
            x_world: plant.x_world,
            psi: plant.psi,
            applied,
            delta: res.u_apply,
            alpha: wf.alpha,
            f_z: wf.f_z,
            ri,
            status: sol.status.as_str().to_string(),
            solve_ms: sol.solve_time * 1e3,
            slack: sol.x.last().copied().unwrap_or(0.0).max(0.0),
            state_violation,
            r_d: res.r_d,
            y_target,
        });
        plant = integrate(vehicle, &plant, &w0, &res.u_apply, u, s.phi_r, &TireMode::Nonlinear, t_s, s.substeps)?;
        if plant.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("plant state diverged at step {k}")));
        }
    }
    Ok(SimTrace { scenario: s.name.clone(), kind, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub scenario: String,
    pub steps: usize,
    pub max_lateral_error: f64,
    pub mean_lateral_error: f64,
    pub max_abs_alpha: f64,
    pub max_abs_ri: f64,
    pub mean_fz_left: f64,
    pub mean_fz_right: f64,
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
    pub degraded_steps: usize,
    /// Steps whose plant state violates a state row by more than 1e-3.
    pub violation_steps: usize,
    pub max_violation: f64,
    pub max_slack: f64,
    pub final_yaw_rate: f64,
}

/// Piecewise-linear path from the start through the checkpoints, evaluated at `x`.
fn path_y(start: WorldPoint, points: &[WorldPoint], x: f64) -> f64 {
    let mut prev = start;
    for p in points {
        if x <= p.x {
            let t = if p.x > prev.x { ((x - prev.x) / (p.x - prev.x)).clamp(0.0, 1.0) } else { 1.0 };
            return prev.y + t * (p.y - prev.y);
        }
        prev = *p;
    }
    prev.y
}

pub fn metrics(trace: &SimTrace, s: &Scenario) -> Metrics {
    let rows = &trace.rows;
    let n = rows.len().max(1) as f64;
    let lateral: Vec<f64> = match &s.driver {
        DriverMode::Checkpoints { points, .. } => {
            let start = WorldPoint { x: 0.0, y: s.x0[0] };
            rows.iter().map(|r| (r.state[0] - path_y(start, points, r.x_world)).abs()).collect()
        }
        DriverMode::Command { .. } => vec![0.0; rows.len()],
    };
    let fold_max = |it: &mut dyn Iterator<Item = f64>| it.fold(0.0f64, f64::max);
    let yaw = trace.kind.yaw_rate_index();
    Metrics {
        scenario: trace.scenario.clone(),
        steps: rows.len(),
        max_lateral_error: fold_max(&mut lateral.iter().copied()),
        mean_lateral_error: lateral.iter().sum::<f64>() / n,
        max_abs_alpha: fold_max(&mut rows.iter().flat_map(|r| r.alpha.map(f64::abs))),
        max_abs_ri: fold_max(&mut rows.iter().map(|r| r.ri.abs())),
        mean_fz_left: rows.iter().map(|r| r.f_z[0] + r.f_z[2]).sum::<f64>() / n,
        mean_fz_right: rows.iter().map(|r| r.f_z[1] + r.f_z[3]).sum::<f64>() / n,
        mean_solve_ms: rows.iter().map(|r| r.solve_ms).sum::<f64>() / n,
        max_solve_ms: fold_max(&mut rows.iter().map(|r| r.solve_ms)),
        degraded_steps: rows.iter().filter(|r| r.status != "solved").count(),
        violation_steps: rows.iter().filter(|r| r.state_violation > 1e-3).count(),
        max_violation: fold_max(&mut rows.iter().map(|r| r.state_violation)),
        max_slack: fold_max(&mut rows.iter().map(|r| r.slack)),
        final_yaw_rate: rows.last().map_or(0.0, |r| r.state[yaw]),
    }
}

/// Writes one CSV row per run.
pub fn write_metrics_csv<W: Write>(all: &[Metrics], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Io(format!("writing metrics: {e}"));
    let mut w = csv::Writer::from_writer(out);
    for m in all {
        w.serialize(m).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Io(format!("writing metrics: {e}")))?;
    Ok(())
}
