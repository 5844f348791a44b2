use nalgebra::{DMatrix, DVector};

use super::body::{body_matrices_general, body_matrices_vhs, wheel_dynamics};
use super::maps::{cog_map, tire_affine_maps, wheel_rotation_map};
use super::params::{ActuatorConfig, DriverCommand, GeneralEvParams, ModelKind, Vehicle, VhsParams};
use crate::error::{Error, Result};
use crate::tire::TireLinearization;

/// Continuous-time affine model `Ẋ = A·X + E·W + B·U + D`.
///
/// For the race-car layout `D` already contains `C_φ·φ_r`; `c_phi` keeps the
/// banking column so callers can vary `φ_r` without reassembling.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleModel {
    pub kind: ModelKind,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub d: DVector<f64>,
    pub c_phi: Option<DVector<f64>>,
    pub phi_r: f64,
    pub u: f64,
    pub driver: DriverCommand,
    pub actuators: ActuatorConfig,
    pub linearizations: [TireLinearization; 4],
}

impl VehicleModel {
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_u(&self) -> usize {
        self.b.ncols()
    }

    /// Constant part of the dynamics for the stored driver command, `E·W₀ + D`.
    pub fn affine_term(&self) -> DVector<f64> {
        &self.e * self.driver.as_vector() + &self.d
    }

    /// `Ẋ` for state `x` and control delta `u`.
    pub fn derivative(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + self.affine_term()
    }

    fn check_finite(self) -> Result<Self> {
        let finite = |m: &DMatrix<f64>| m.iter().all(|v| v.is_finite());
        if finite(&self.a) && finite(&self.b) && finite(&self.e) && self.d.iter().all(|v| v.is_finite()) {
            Ok(self)
        } else {
            Err(Error::Model("assembled model contains non-finite entries".into()))
        }
    }
}

fn actuator_matrix(t_w: &ActuatorConfig) -> DMatrix<f64> {
    let mask = t_w.mask();
    DMatrix::from_diagonal(&DVector::from_iterator(8, mask.iter().map(|&on| if on { 1.0 } else { 0.0 })))
}

pub fn assemble_general(
    p: &GeneralEvParams,
    u: f64,
    lin: &[TireLinearization; 4],
    w0: &DriverCommand,
    t_w: &ActuatorConfig,
) -> Result<VehicleModel> {
    let (a_f, b_f) = body_matrices_general(p, u)?;
    let maps = tire_affine_maps(lin, u, p.l_f, p.l_r, p.r_eff, 4, 0)?;
    let chain = &b_f * cog_map(p.t_f, p.t_r, p.l_f, p.l_r) * wheel_rotation_map(&w0.steering);
    let tw = actuator_matrix(t_w);

    let a_b = a_f + &chain * &maps.b1;
    let e_b = &chain * &maps.b2;
    let b_b = &e_b * &tw;
    let d_b = &chain * &maps.d1;
    let wheels = wheel_dynamics(p)?;

    let mut a = DMatrix::zeros(8, 8);
    a.view_mut((0, 0), (4, 4)).copy_from(&a_b);
    a.view_mut((4, 4), (4, 4)).copy_from(&wheels.a_w);
    let mut e = DMatrix::zeros(8, 8);
    e.view_mut((0, 0), (4, 8)).copy_from(&e_b);
    e.view_mut((4, 0), (4, 8)).copy_from(&wheels.e_w);
    let mut b = DMatrix::zeros(8, 8);
    b.view_mut((0, 0), (4, 8)).copy_from(&b_b);
    b.view_mut((4, 0), (4, 8)).copy_from(&(&wheels.b_w * &tw));
    let mut d = DVector::zeros(8);
    d.rows_mut(0, 4).copy_from(&d_b);
    d.rows_mut(4, 4).copy_from(&wheels.d_w);

    VehicleModel {
        kind: ModelKind::GeneralEv,
        a,
        b,
        e,
        d,
        c_phi: None,
        phi_r: 0.0,
        u,
        driver: *w0,
        actuators: *t_w,
        linearizations: *lin,
    }
    .check_finite()
}

pub fn assemble_vhs(
    p: &VhsParams,
    u: f64,
    lin: &[TireLinearization; 4],
    w0: &DriverCommand,
    t_w: &ActuatorConfig,
    phi_r: f64,
) -> Result<VehicleModel> {
    let (a_f, b_f, c_phi) = body_matrices_vhs(p, u)?;
    let maps = tire_affine_maps(lin, u, p.l_f, p.l_r, p.r_eff, 5, 1)?;
    let chain = &b_f * cog_map(p.t_f, p.t_r, p.l_f, p.l_r) * wheel_rotation_map(&w0.steering);

    let e = &chain * &maps.b2;
    let b = &e * actuator_matrix(t_w);
    let d = &chain * &maps.d1 + &c_phi * phi_r;
    VehicleModel {
        kind: ModelKind::Vhs,
        a: a_f + &chain * &maps.b1,
        b,
        e,
        d,
        c_phi: Some(c_phi),
        phi_r,
        u,
        driver: *w0,
        actuators: *t_w,
        linearizations: *lin,
    }
    .check_finite()
}

/// Assemble whichever layout `vehicle` uses. `phi_r` is ignored for the general EV.
pub fn assemble(
    vehicle: &Vehicle,
    u: f64,
    lin: &[TireLinearization; 4],
    w0: &DriverCommand,
    t_w: &ActuatorConfig,
    phi_r: f64,
) -> Result<VehicleModel> {
    match vehicle {
        Vehicle::GeneralEv(p) => assemble_general(p, u, lin, w0, t_w),
        Vehicle::Vhs(p) => assemble_vhs(p, u, lin, w0, t_w, phi_r),
    }
}
