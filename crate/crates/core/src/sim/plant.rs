use nalgebra::DVector;

use crate::error::Result;
use crate::tire::{lateral_force, slip_angle, TireLinearization, TireOperatingPoint};
use crate::vehicle::{
    body_matrices_general, body_matrices_vhs, cog_map, normal_loads, wheel_rotation_map, ControlDelta,
    DriverCommand, Vehicle,
};

/// How the plant evaluates lateral tire forces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TireMode {
    /// Full nonlinear model at the instantaneous slip angle and normal load.
    Nonlinear,
    /// Fixed affine tires, for checking the plant against the controller's prediction model.
    Linear([TireLinearization; 4]),
}

/// Plant state: the model states plus the distance travelled and the heading.
///
/// `x_world` advances at `u`, `psi` integrates the yaw rate. The lateral
/// position of the race-car layout follows the model's own `ẏ = v_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub x: DVector<f64>,
    pub x_world: f64,
    pub psi: f64,
}

impl PlantState {
    pub fn new(x: DVector<f64>) -> Self {
        Self { x, x_world: 0.0, psi: 0.0 }
    }

    fn pack(&self) -> DVector<f64> {
        let n = self.x.len();
        let mut v = DVector::zeros(n + 2);
        v.rows_mut(0, n).copy_from(&self.x);
        v[n] = self.x_world;
        v[n + 1] = self.psi;
        v
    }

    fn unpack(v: &DVector<f64>) -> Self {
        let n = v.len() - 2;
        Self { x: v.rows(0, n).into_owned(), x_world: v[n], psi: v[n + 1] }
    }
}

/// Per-wheel quantities the plant computed on its way to the derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WheelForces {
    pub alpha: [f64; 4],
    pub f_z: [f64; 4],
    pub f_y: [f64; 4],
    pub f_x: [f64; 4],
}

pub fn wheel_forces(
    vehicle: &Vehicle,
    x: &DVector<f64>,
    applied: &DriverCommand,
    u: f64,
    phi_r: f64,
    tires: &TireMode,
) -> Result<WheelForces> {
    let kind = vehicle.kind();
    let (v, r) = (x[kind.lateral_velocity_index()], x[kind.yaw_rate_index()]);
    let f_z = normal_loads(vehicle, x, phi_r);
    let mut out = WheelForces { alpha: [0.0; 4], f_z, f_y: [0.0; 4], f_x: [0.0; 4] };
    for i in 0..4 {
        let alpha = slip_angle(i + 1, applied.steering[i], v, r, u, vehicle.l_f(), vehicle.l_r())?;
        out.alpha[i] = alpha;
        out.f_y[i] = match tires {
            TireMode::Nonlinear => lateral_force(&TireOperatingPoint::new(alpha, f_z[i]), vehicle.tire())?,
            TireMode::Linear(lin) => lin[i].force(alpha),
        };
        out.f_x[i] = applied.torque[i] / vehicle.r_eff();
    }
    Ok(out)
}

/// Derivative of the packed plant state under driver command `w0` plus delta `du`.
///
/// Forces follow the same path as the prediction model (tire frame → rotation
/// by the actual steering → CoG aggregation → body dynamics); only the tire
/// law differs. Wheel speeds respond to the torque deltas alone.
#[allow(clippy::too_many_arguments)]
pub fn plant_derivatives(
    vehicle: &Vehicle,
    state: &PlantState,
    w0: &DriverCommand,
    du: &ControlDelta,
    u: f64,
    phi_r: f64,
    tires: &TireMode,
) -> Result<PlantState> {
    let applied = w0.apply(du);
    let x = &state.x;
    let wf = wheel_forces(vehicle, x, &applied, u, phi_r, tires)?;
    let mut corner = DVector::zeros(8);
    for i in 0..4 {
        corner[2 * i] = wf.f_x[i];
        corner[2 * i + 1] = wf.f_y[i];
    }
    let (t_f, t_r) = vehicle.tracks();
    let forces = cog_map(t_f, t_r, vehicle.l_f(), vehicle.l_r()) * wheel_rotation_map(&applied.steering) * corner;

    let mut dx = DVector::zeros(x.len());
    let kind = vehicle.kind();
    match vehicle {
        Vehicle::GeneralEv(p) => {
            let (a, b) = body_matrices_general(p, u)?;
            let xb = x.rows(0, 4).into_owned();
            dx.rows_mut(0, 4).copy_from(&(a * xb + b * &forces));
            for i in 0..4 {
                dx[4 + i] = du.torque[i] / p.i_w;
            }
        }
        Vehicle::Vhs(p) => {
            let (a, b, c_phi) = body_matrices_vhs(p, u)?;
            dx.copy_from(&(a * x + b * &forces + c_phi * phi_r));
        }
    }
    Ok(PlantState { x: dx, x_world: u, psi: x[kind.yaw_rate_index()] })
}

/// Classical fourth-order Runge–Kutta step of `ẋ = f(x)`.
pub fn rk4_step<F>(f: F, x: &DVector<f64>, h: f64) -> Result<DVector<f64>>
where
    F: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    let k1 = f(x)?;
    let k2 = f(&(x + &k1 * (0.5 * h)))?;
    let k3 = f(&(x + &k2 * (0.5 * h)))?;
    let k4 = f(&(x + &k3 * h))?;
    Ok(x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Advances the plant by `t_s` with `substeps` RK4 steps, inputs held.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    vehicle: &Vehicle,
    state: &PlantState,
    w0: &DriverCommand,
    du: &ControlDelta,
    u: f64,
    phi_r: f64,
    tires: &TireMode,
    t_s: f64,
    substeps: usize,
) -> Result<PlantState> {
    let n = substeps.max(1);
    let h = t_s / n as f64;
    let f = |v: &DVector<f64>| {
        plant_derivatives(vehicle, &PlantState::unpack(v), w0, du, u, phi_r, tires).map(|d| d.pack())
    };
    let mut packed = state.pack();
    for _ in 0..n {
        packed = rk4_step(f, &packed, h)?;
    }
    Ok(PlantState::unpack(&packed))
}
