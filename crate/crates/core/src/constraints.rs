//! State and input constraint rows for one horizon step.
//!
//! Input rows act on the control delta `U = [ΔQ₁, Δδ₁, …, ΔQ₄, Δδ₄]`. The
//! friction-capacity band limits torque, so the longitudinal force capacity
//! `f^p` is converted to torque through `r_eff`: `±r_eff·f^p − Q_i(0)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Error, Result};
use crate::tire::peak_longitudinal_force;
use crate::vehicle::{ActuatorConfig, DriverCommand, GeneralEvParams, ModelKind, Vehicle};
use crate::GRAVITY;

/// `lower ≤ G_x·x + G_u·U ≤ upper`; rows flagged soft are relaxed by the shared slack.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub g_x: DMatrix<f64>,
    pub g_u: DMatrix<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    pub soft: Vec<bool>,
    pub slack_weight: f64,
}

impl ConstraintSet {
    pub fn empty(n_x: usize, n_u: usize) -> Self {
        Self {
            g_x: DMatrix::zeros(0, n_x),
            g_u: DMatrix::zeros(0, n_u),
            lower: DVector::zeros(0),
            upper: DVector::zeros(0),
            soft: Vec::new(),
            slack_weight: 0.0,
        }
    }

    pub fn rows(&self) -> usize {
        self.lower.len()
    }

    fn push(&mut self, gx: &[(usize, f64)], gu: &[(usize, f64)], lo: f64, hi: f64, soft: bool) {
        let r = self.rows();
        let (nx, nu) = (self.g_x.ncols(), self.g_u.ncols());
        self.g_x = std::mem::replace(&mut self.g_x, DMatrix::zeros(0, 0)).insert_row(r, 0.0);
        self.g_u = std::mem::replace(&mut self.g_u, DMatrix::zeros(0, 0)).insert_row(r, 0.0);
        debug_assert_eq!((self.g_x.ncols(), self.g_u.ncols()), (nx, nu));
        for &(j, v) in gx {
            self.g_x[(r, j)] = v;
        }
        for &(j, v) in gu {
            self.g_u[(r, j)] = v;
        }
        self.lower = std::mem::replace(&mut self.lower, DVector::zeros(0)).push(lo);
        self.upper = std::mem::replace(&mut self.upper, DVector::zeros(0)).push(hi);
        self.soft.push(soft);
    }

    /// Stacks `other` below `self`; the slack weight is taken from whichever set has soft rows.
    pub fn merge(mut self, other: &ConstraintSet) -> Result<Self> {
        if self.g_x.ncols() != other.g_x.ncols() || self.g_u.ncols() != other.g_u.ncols() {
            return Err(Error::Dimension("constraint sets have different widths".into()));
        }
        for r in 0..other.rows() {
            let gx: Vec<_> = other.g_x.row(r).iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
            let gu: Vec<_> = other.g_u.row(r).iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
            self.push(&gx, &gu, other.lower[r], other.upper[r], other.soft[r]);
        }
        if other.soft.iter().any(|&s| s) {
            self.slack_weight = other.slack_weight;
        }
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for r in 0..self.rows() {
            if !(self.lower[r] <= self.upper[r]) {
                return Err(domain(format!(
                    "constraint row {r} has lower {} above upper {}",
                    self.lower[r], self.upper[r]
                )));
            }
        }
        Ok(())
    }

    /// Largest amount by which `(x, U)` leaves the bands, soft and hard rows alike.
    pub fn max_violation(&self, x: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let v = &self.g_x * x + &self.g_u * u;
        (0..self.rows())
            .map(|r| (self.lower[r] - v[r]).max(v[r] - self.upper[r]).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// Rollover index coefficients `(C₁, C₂)` with `RI = C₁·φ + C₂·φ̇`, using the mean track.
pub fn rollover_coeffs(p: &GeneralEvParams) -> (f64, f64) {
    let m = p.m();
    let track = 0.5 * (p.t_f + p.t_r);
    let lever = p.m_s * p.h_r() + p.m_u * p.h_u;
    let ratio = 1.0 + lever / (p.m_s * p.h_s);
    let scale = 2.0 / (m * GRAVITY * track);
    (scale * (p.k_phi * ratio - lever * GRAVITY), scale * p.c_phi * ratio)
}

/// Wheel-speed band `u/r_eff ± λ_max·max(u/r_eff, ω)`, returned as `(min, max)`.
pub fn slip_speed_bounds(u: f64, omega: f64, r_eff: f64, lambda_max: f64) -> (f64, f64) {
    let free = u / r_eff;
    let half = lambda_max * free.max(omega);
    let (a, b) = (free - half, free + half);
    (a.min(b), a.max(b))
}

/// State rows. The general EV gets rollover index, yaw rate, wheel speed and
/// rear slip; the race car only yaw rate and rear slip. All are soft.
///
/// `omega` holds the current wheel speeds (ignored for the race car).
pub fn state_rows(vehicle: &Vehicle, u: f64, omega: &[f64; 4], slack_weight: f64) -> Result<ConstraintSet> {
    if !(u > 0.0) {
        return Err(domain(format!("state constraints need u > 0, got {u}")));
    }
    let kind = vehicle.kind();
    let mut set = ConstraintSet::empty(kind.n_states(), 8);
    set.slack_weight = slack_weight;
    let r_max = vehicle.tire().mu_y * GRAVITY / u;
    let (vi, ri) = (kind.lateral_velocity_index(), kind.yaw_rate_index());
    let rear_slip = [(vi, 1.0 / u), (ri, vehicle.l_r() / u)];
    let alpha = vehicle.alpha_r_max();
    match vehicle {
        Vehicle::GeneralEv(p) => {
            let (c1, c2) = rollover_coeffs(p);
            set.push(&[(2, c1), (3, c2)], &[], -p.ri_c, p.ri_c, true);
            set.push(&[(ri, 1.0)], &[], -r_max, r_max, true);
            for (w, &om) in omega.iter().enumerate() {
                let (lo, hi) = slip_speed_bounds(u, om, p.r_eff, p.lambda_max);
                set.push(&[(4 + w, 1.0)], &[], lo, hi, true);
            }
            set.push(&rear_slip, &[], -alpha, alpha, true);
        }
        Vehicle::Vhs(_) => {
            set.push(&[(ri, 1.0)], &[], -r_max, r_max, true);
            set.push(&rear_slip, &[], -alpha, alpha, true);
        }
    }
    Ok(set)
}

/// Hard input rows per wheel: torque band, friction-capacity band, steering band.
/// Rows of disabled actuators collapse to `[0, 0]`.
pub fn input_rows(
    vehicle: &Vehicle,
    w0: &DriverCommand,
    f_z0: &[f64; 4],
    f_y0: &[f64; 4],
    t_w: &ActuatorConfig,
) -> Result<ConstraintSet> {
    t_w.validate()?;
    let mask = t_w.mask();
    let (q_min, q_max) = vehicle.torque_limits();
    let delta_max = vehicle.delta_max();
    let r_eff = vehicle.r_eff();
    let mut set = ConstraintSet::empty(vehicle.kind().n_states(), 8);
    for w in 0..4 {
        let (qi, di) = (2 * w, 2 * w + 1);
        let q0 = w0.torque[w];
        // a lifted wheel transmits no force
        let cap = if f_z0[w] > 0.0 { r_eff * peak_longitudinal_force(f_z0[w], f_y0[w], vehicle.tire())? } else { 0.0 };
        let band = |on: bool, lo: f64, hi: f64| if on { (lo, hi) } else { (0.0, 0.0) };
        let (lo, hi) = band(mask[qi], q_min - q0, q_max - q0);
        set.push(&[], &[(qi, 1.0)], lo, hi, false);
        let (lo, hi) = band(mask[qi], -cap - q0, cap - q0);
        set.push(&[], &[(qi, 1.0)], lo, hi, false);
        let d0 = w0.steering[w];
        let (lo, hi) = band(mask[di], -delta_max - d0, delta_max - d0);
        set.push(&[], &[(di, 1.0)], lo, hi, false);
    }
    Ok(set)
}

/// Box `[lo, hi]` on each input channel implied by the input rows (intersection per channel).
pub fn input_box(set: &ConstraintSet) -> (Vec<f64>, Vec<f64>) {
    let n_u = set.g_u.ncols();
    let mut lo = vec![f64::NEG_INFINITY; n_u];
    let mut hi = vec![f64::INFINITY; n_u];
    for r in 0..set.rows() {
        if set.g_x.row(r).iter().any(|&v| v != 0.0) {
            continue;
        }
        let nz: Vec<_> = set.g_u.row(r).iter().copied().enumerate().filter(|e| e.1 != 0.0).collect();
        if let [(j, c)] = nz[..] {
            let (a, b) = (set.lower[r] / c, set.upper[r] / c);
            lo[j] = lo[j].max(a.min(b));
            hi[j] = hi[j].min(a.max(b));
        }
    }
    (lo, hi)
}

/// Model kind check shared by callers that build rows for an assembled model.
pub fn check_width(set: &ConstraintSet, kind: ModelKind) -> Result<()> {
    if set.g_x.ncols() != kind.n_states() {
        return Err(Error::Dimension(format!(
            "constraint rows span {} states, model has {}",
            set.g_x.ncols(),
            kind.n_states()
        )));
    }
    Ok(())
}
