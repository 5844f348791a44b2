use nalgebra::{DMatrix, DVector};

use super::params::{GeneralEvParams, VhsParams};
use crate::error::{Error, Result};
use crate::GRAVITY;

/// Body matrices `Ẋ_b = A_F·X_b + B_F·[F_X, F_Y, M_Z]` of the general EV,
/// `X_b = [v, r, φ, φ̇]`.
pub fn body_matrices_general(p: &GeneralEvParams, u: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let m = p.m();
    let den = m * p.i_xx - (p.m_s * p.h_s).powi(2);
    if !(den > 0.0) {
        return Err(Error::Model(format!(
            "roll coupling denominator m*I_xx - (m_s*h_s)^2 = {den} is not positive"
        )));
    }
    let ms_hs = p.m_s * p.h_s;
    let stiff = p.k_phi - p.m_s * GRAVITY * p.h_s;

    let mut a = DMatrix::zeros(4, 4);
    a[(0, 1)] = -u;
    // roll-to-lateral coupling enters with a negative sign; with the sign as
    // usually printed the steady lateral acceleration is about 3·F_Y/m
    a[(0, 2)] = -ms_hs * stiff / den;
    a[(0, 3)] = -ms_hs * p.c_phi / den;
    a[(2, 3)] = 1.0;
    a[(3, 2)] = -m * stiff / den;
    a[(3, 3)] = -m * p.c_phi / den;

    let mut b = DMatrix::zeros(4, 3);
    b[(0, 1)] = p.i_xx / den;
    b[(1, 2)] = 1.0 / p.i_zz;
    b[(3, 1)] = ms_hs / den;
    Ok((a, b))
}

/// Body matrices of the race-car layout `X_b = [y, v_y, r, φ, φ̇]` and the
/// banking gain `C_φ`, term by term from the single-track roll model,
/// including its spring-damper roll suspension with lever arm `l_s`.
pub fn body_matrices_vhs(
    p: &VhsParams,
    u: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let (m, ms, h, g) = (p.m, p.m_s, p.h_s, GRAVITY);
    let den = m * (p.i_xx + h * h * m - h * h * ms);
    if !(den > 0.0) {
        return Err(Error::Model(format!("roll denominator {den} is not positive")));
    }
    let ls2 = p.l_s * p.l_s;

    let mut a = DMatrix::zeros(5, 5);
    a[(0, 1)] = 1.0;
    a[(1, 2)] = -u;
    a[(1, 3)] = (-g * h * h * m * ms + 0.5 * h * p.k_s * ls2 * ms) / den;
    a[(1, 4)] = p.b_s * h * ls2 * ms / den;
    a[(3, 4)] = 1.0;
    a[(4, 3)] = (g * h * m * m - 0.5 * p.k_s * ls2 * m) / den;
    a[(4, 4)] = -p.b_s * ls2 * m / den;

    let mut b = DMatrix::zeros(5, 3);
    b[(1, 1)] = (p.i_xx + m * h * h) / den;
    b[(2, 2)] = 1.0 / p.i_zz;
    b[(4, 1)] = m * h / (2.0 * den);

    let mut c_phi = DVector::zeros(5);
    c_phi[1] = (g * m * m * h * h + g * p.i_xx * m) / den;
    c_phi[4] = -g * h * m * m / den;
    Ok((a, b, c_phi))
}

/// Wheel-spin dynamics `Ẋ_w = A_w·X_w + E_w·W + B_w·U + D_w`.
///
/// With the longitudinal tire force `f_x = Q/r_eff`, the driver torque and the
/// tire reaction cancel, so only the torque deltas spin the wheels.
#[derive(Debug, Clone, PartialEq)]
pub struct WheelDynamics {
    pub a_w: DMatrix<f64>,
    pub e_w: DMatrix<f64>,
    pub b_w: DMatrix<f64>,
    pub d_w: DVector<f64>,
}

pub fn wheel_dynamics(p: &GeneralEvParams) -> Result<WheelDynamics> {
    if !(p.i_w > 0.0) {
        return Err(Error::Model("wheel inertia must be positive".into()));
    }
    let mut b_w = DMatrix::zeros(4, 8);
    for i in 0..4 {
        b_w[(i, 2 * i)] = 1.0 / p.i_w;
    }
    Ok(WheelDynamics {
        a_w: DMatrix::zeros(4, 4),
        e_w: DMatrix::zeros(4, 8),
        b_w,
        d_w: DVector::zeros(4),
    })
}
