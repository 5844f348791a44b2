//! Lateral tire force models and their linearization about an operating point.
//!
//! Two models are provided:
//!
//! * Dugoff, combined-slip form:
//!   `F_y = C_α·tan α / (1 + σ) · f(λ)` with
//!   `λ = μ_y·F_z·(1 + σ) / (2·√((C_σ·σ)² + (C_α·tan α)²))` and
//!   `f(λ) = (2 − λ)·λ` for `λ < 1`, `1` otherwise.
//! * Pacejka magic formula, pure lateral slip:
//!   `F_y = D·sin(C·atan(B·α − E·(B·α − atan(B·α))))` with `D = μ_y·F_z`.
//!
//! The linearization `f_y(α) ≈ f̄_y + c̃_α·(α − ᾱ)` uses analytic derivatives of
//! both models.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Which lateral force model a tire uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TireModelKind {
    #[default]
    Dugoff,
    Pacejka,
}

/// Magic-formula shape factors. `D` is not stored: it is `μ_y·F_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PacejkaCoeffs {
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "E")]
    pub e: f64,
}

impl Default for PacejkaCoeffs {
    /// Placeholder shape factors; no measured values are available for either vehicle.
    fn default() -> Self {
        Self { b: 10.0, c: 1.9, e: 0.97 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TireParams {
    /// Cornering stiffness (N/rad).
    #[serde(rename = "C_alpha")]
    pub c_alpha: f64,
    /// Longitudinal slip stiffness (N).
    #[serde(rename = "C_sigma")]
    pub c_sigma: f64,
    pub mu_x: f64,
    pub mu_y: f64,
    #[serde(default, rename = "model")]
    pub model_kind: TireModelKind,
    #[serde(default, rename = "pacejka", skip_serializing_if = "Option::is_none")]
    pub pacejka_coeffs: Option<PacejkaCoeffs>,
}

impl TireParams {
    pub fn dugoff(c_alpha: f64, c_sigma: f64, mu_x: f64, mu_y: f64) -> Self {
        Self {
            c_alpha,
            c_sigma,
            mu_x,
            mu_y,
            model_kind: TireModelKind::Dugoff,
            pacejka_coeffs: None,
        }
    }

    pub fn with_pacejka(mut self, coeffs: PacejkaCoeffs) -> Self {
        self.model_kind = TireModelKind::Pacejka;
        self.pacejka_coeffs = Some(coeffs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_alpha > 0.0) {
            return Err(Error::Config(format!("C_alpha must be positive, got {}", self.c_alpha)));
        }
        if !(self.c_sigma > 0.0) {
            return Err(Error::Config(format!("C_sigma must be positive, got {}", self.c_sigma)));
        }
        for (name, mu) in [("mu_x", self.mu_x), ("mu_y", self.mu_y)] {
            if !(mu > 0.0 && mu <= 2.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 2], got {mu}")));
            }
        }
        match (self.model_kind, self.pacejka_coeffs) {
            (TireModelKind::Pacejka, None) => Err(Error::Config(
                "pacejka model selected without [tire.pacejka] coefficients".into(),
            )),
            (TireModelKind::Dugoff, Some(_)) => Err(Error::Config(
                "pacejka coefficients given for a dugoff tire".into(),
            )),
            _ => Ok(()),
        }
    }
}

/// Where a tire is linearized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TireOperatingPoint {
    /// Side-slip angle ᾱ (rad).
    pub alpha_bar: f64,
    /// Normal load (N).
    pub f_z: f64,
    /// Longitudinal slip ratio.
    pub sigma_x: f64,
}

impl TireOperatingPoint {
    pub fn new(alpha_bar: f64, f_z: f64) -> Self {
        Self { alpha_bar, f_z, sigma_x: 0.0 }
    }

    fn check(&self) -> Result<()> {
        if !(self.f_z >= 0.0) {
            return Err(domain(format!("normal load must be non-negative, got {}", self.f_z)));
        }
        if !(self.alpha_bar.abs() < std::f64::consts::FRAC_PI_2) {
            return Err(domain(format!("slip angle {} outside (-pi/2, pi/2)", self.alpha_bar)));
        }
        if !(self.sigma_x > -1.0) {
            return Err(domain(format!("slip ratio {} must exceed -1", self.sigma_x)));
        }
        Ok(())
    }
}

/// Affine tire model `f_y(α) = f_y_bar + c_alpha_tilde·(α − alpha_bar)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TireLinearization {
    pub f_y_bar: f64,
    pub c_alpha_tilde: f64,
    pub alpha_bar: f64,
}

impl TireLinearization {
    pub fn force(&self, alpha: f64) -> f64 {
        self.f_y_bar + self.c_alpha_tilde * (alpha - self.alpha_bar)
    }

    /// Constant term `f̄_y − c̃_α·ᾱ` of the affine map.
    pub fn offset(&self) -> f64 {
        self.f_y_bar - self.c_alpha_tilde * self.alpha_bar
    }
}

/// Slip angle of wheel `wheel` (1 = FL, 2 = FR, 3 = RL, 4 = RR).
pub fn slip_angle(wheel: usize, steering: f64, v: f64, r: f64, u: f64, l_f: f64, l_r: f64) -> Result<f64> {
    if !(u > 0.0) {
        return Err(domain(format!("longitudinal speed must be positive, got {u}")));
    }
    let a = match wheel {
        1 | 2 => l_f,
        3 | 4 => -l_r,
        _ => return Err(domain(format!("wheel index {wheel} not in 1..=4"))),
    };
    Ok(steering - (v + a * r) / u)
}

/// Force and slope `(F_y, ∂F_y/∂α)` of the Dugoff model.
fn dugoff_with_slope(op: &TireOperatingPoint, p: &TireParams) -> (f64, f64) {
    let (alpha, sigma) = (op.alpha_bar, op.sigma_x);
    let tan_a = alpha.tan();
    let sec2 = 1.0 + tan_a * tan_a;
    let lat = p.c_alpha * tan_a;
    let dlat = p.c_alpha * sec2;
    let lon = p.c_sigma * sigma;
    let resultant = lat.hypot(lon);
    let scale = 1.0 / (1.0 + sigma);

    if resultant == 0.0 {
        // no slip at all: the tire sits in its linear region
        return (0.0, dlat * scale);
    }
    let lambda = p.mu_y * op.f_z * (1.0 + sigma) / (2.0 * resultant);
    if lambda >= 1.0 {
        return (lat * scale, dlat * scale);
    }
    let shape = (2.0 - lambda) * lambda;
    let dshape = 2.0 - 2.0 * lambda;
    let dresultant = lat * dlat / resultant;
    let dlambda = -lambda * dresultant / resultant;
    let force = lat * scale * shape;
    let slope = scale * (dlat * shape + lat * dshape * dlambda);
    (force, slope)
}

pub fn dugoff_lateral_force(op: &TireOperatingPoint, params: &TireParams) -> Result<f64> {
    op.check()?;
    Ok(dugoff_with_slope(op, params).0)
}

fn pacejka_with_slope(op: &TireOperatingPoint, p: &TireParams, k: &PacejkaCoeffs) -> (f64, f64) {
    let d = p.mu_y * op.f_z;
    let ba = k.b * op.alpha_bar;
    let phi = ba - k.e * (ba - ba.atan());
    let dphi = k.b - k.e * (k.b - k.b / (1.0 + ba * ba));
    let inner = k.c * phi.atan();
    let force = d * inner.sin();
    let slope = d * inner.cos() * k.c * dphi / (1.0 + phi * phi);
    (force, slope)
}

pub fn pacejka_lateral_force(op: &TireOperatingPoint, params: &TireParams) -> Result<f64> {
    let coeffs = params
        .pacejka_coeffs
        .ok_or_else(|| Error::Config("pacejka coefficients missing".into()))?;
    op.check()?;
    Ok(pacejka_with_slope(op, params, &coeffs).0)
}

/// Lateral force of whichever model `params` selects.
pub fn lateral_force(op: &TireOperatingPoint, params: &TireParams) -> Result<f64> {
    match params.model_kind {
        TireModelKind::Dugoff => dugoff_lateral_force(op, params),
        TireModelKind::Pacejka => pacejka_lateral_force(op, params),
    }
}

/// Linearize the selected model at `op`. The slope is the analytic derivative;
/// at the Dugoff `λ = 1` breakpoint the saturated branch is used (both branches
/// share the same slope there).
pub fn linearize_tire(op: &TireOperatingPoint, params: &TireParams) -> Result<TireLinearization> {
    op.check()?;
    let (f_y_bar, c_alpha_tilde) = match params.model_kind {
        TireModelKind::Dugoff => dugoff_with_slope(op, params),
        TireModelKind::Pacejka => {
            let coeffs = params
                .pacejka_coeffs
                .ok_or_else(|| Error::Config("pacejka coefficients missing".into()))?;
            pacejka_with_slope(op, params, &coeffs)
        }
    };
    Ok(TireLinearization { f_y_bar, c_alpha_tilde, alpha_bar: op.alpha_bar })
}

/// Longitudinal force capacity left by the friction ellipse.
pub fn peak_longitudinal_force(f_z0: f64, f_y0: f64, params: &TireParams) -> Result<f64> {
    if !(f_z0 > 0.0) {
        return Err(domain(format!("normal load must be positive, got {f_z0}")));
    }
    let lateral_cap = params.mu_y * f_z0;
    let usage = f_y0 / lateral_cap;
    // a few ulps of slack: forces from the Dugoff model sit exactly on the ellipse
    if usage.abs() > 1.0 + 1e-12 {
        return Err(domain(format!(
            "lateral force {f_y0} exceeds friction limit {lateral_cap}"
        )));
    }
    Ok(params.mu_x * f_z0 * (1.0 - usage * usage).max(0.0).sqrt())
}

/// Effective rolling radius from the unloaded radius `r_w` and the static
/// (hub-to-ground) radius `r_stat`.
pub fn effective_radius(r_stat: f64, r_w: f64) -> Result<f64> {
    if !(r_stat > 0.0 && r_w > 0.0) {
        return Err(domain("tire radii must be positive"));
    }
    if r_stat > r_w {
        return Err(domain(format!("static radius {r_stat} exceeds tire radius {r_w}")));
    }
    let theta = (r_stat / r_w).acos();
    if theta < 1e-8 {
        return Ok(r_w * (1.0 - theta * theta / 6.0));
    }
    Ok(theta.sin() * r_w / theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ev_tire() -> TireParams {
        TireParams::dugoff(47_275.0, 80_000.0, 1.0, 1.0)
    }

    fn pacejka() -> TireParams {
        ev_tire().with_pacejka(PacejkaCoeffs::default())
    }

    #[test]
    fn slip_angle_examples() {
        assert_eq!(slip_angle(1, 0.0, 0.0, 0.0, 22.22, 1.18, 1.77).unwrap(), 0.0);
        assert_eq!(slip_angle(1, 0.15, 0.0, 0.0, 22.22, 1.18, 1.77).unwrap(), 0.15);
        let a3 = slip_angle(3, 0.0, 1.0, 0.1, 20.0, 1.18, 1.77).unwrap();
        assert_relative_eq!(a3, -0.04115, epsilon = 1e-12);
    }

    #[test]
    fn slip_angle_rejects_standstill() {
        assert!(matches!(slip_angle(1, 0.0, 0.0, 0.0, 0.0, 1.0, 1.0), Err(Error::Domain(_))));
        assert!(slip_angle(5, 0.0, 0.0, 0.0, 10.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn dugoff_examples() {
        let p = ev_tire();
        assert_eq!(dugoff_lateral_force(&TireOperatingPoint::new(0.0, 4000.0), &p).unwrap(), 0.0);

        // λ = 5000 / (2·47275·tan 0.01) ≈ 5.3, linear region
        let f = dugoff_lateral_force(&TireOperatingPoint::new(0.01, 5000.0), &p).unwrap();
        assert_relative_eq!(f, 47_275.0 * 0.01f64.tan(), epsilon = 1e-9);
        assert!((f - 472.75).abs() < 0.02);

        let f = dugoff_lateral_force(&TireOperatingPoint::new(0.5, 4000.0), &p).unwrap();
        assert!(f.abs() <= 4000.0);
    }

    #[test]
    fn dugoff_rejects_negative_load() {
        let err = dugoff_lateral_force(&TireOperatingPoint::new(0.1, -1.0), &ev_tire());
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn pacejka_examples() {
        let p = pacejka();
        let k = PacejkaCoeffs::default();
        assert_eq!(pacejka_lateral_force(&TireOperatingPoint::new(0.0, 4000.0), &p).unwrap(), 0.0);
        let lin = linearize_tire(&TireOperatingPoint::new(0.0, 4000.0), &p).unwrap();
        assert_relative_eq!(lin.c_alpha_tilde, k.b * k.c * 4000.0, epsilon = 1e-9);
        let f = pacejka_lateral_force(&TireOperatingPoint::new(1.2, 4000.0), &p).unwrap();
        assert!(f.abs() <= 4000.0);
    }

    #[test]
    fn pacejka_requires_coefficients() {
        let mut p = ev_tire();
        p.model_kind = TireModelKind::Pacejka;
        assert!(matches!(
            pacejka_lateral_force(&TireOperatingPoint::new(0.1, 4000.0), &p),
            Err(Error::Config(_))
        ));
        assert!(p.validate().is_err());
    }

    #[test]
    fn linearize_at_origin_is_cornering_stiffness() {
        let lin = linearize_tire(&TireOperatingPoint::new(0.0, 4000.0), &ev_tire()).unwrap();
        assert_eq!(lin.f_y_bar, 0.0);
        assert_relative_eq!(lin.c_alpha_tilde, 47_275.0, epsilon = 1e-9);
    }

    #[test]
    fn linearize_saturated_dugoff_matches_central_difference() {
        let p = ev_tire();
        let op = TireOperatingPoint::new(0.08, 4000.0);
        let lin = linearize_tire(&op, &p).unwrap();
        let h = 1e-6;
        let fd = (dugoff_lateral_force(&TireOperatingPoint::new(0.08 + h, 4000.0), &p).unwrap()
            - dugoff_lateral_force(&TireOperatingPoint::new(0.08 - h, 4000.0), &p).unwrap())
            / (2.0 * h);
        assert_relative_eq!(lin.c_alpha_tilde, fd, max_relative = 1e-6);
    }

    #[test]
    fn combined_slip_reduces_lateral_force() {
        let p = ev_tire();
        let pure = dugoff_lateral_force(&TireOperatingPoint::new(0.05, 4000.0), &p).unwrap();
        let op = TireOperatingPoint { alpha_bar: 0.05, f_z: 4000.0, sigma_x: 0.1 };
        let combined = dugoff_lateral_force(&op, &p).unwrap();
        assert!(combined.abs() < pure.abs());
    }

    #[test]
    fn peak_longitudinal_examples() {
        let p = ev_tire();
        assert_relative_eq!(peak_longitudinal_force(4000.0, 0.0, &p).unwrap(), 4000.0);
        assert_eq!(peak_longitudinal_force(4000.0, 4000.0, &p).unwrap(), 0.0);
        assert_relative_eq!(
            peak_longitudinal_force(4000.0, 2000.0, &p).unwrap(),
            4000.0 * 0.75f64.sqrt(),
            epsilon = 1e-9
        );
        assert!((peak_longitudinal_force(4000.0, 2000.0, &p).unwrap() - 3464.1).abs() < 0.05);
        assert!(peak_longitudinal_force(4000.0, 4100.0, &p).is_err());
    }

    #[test]
    fn effective_radius_examples() {
        assert_relative_eq!(effective_radius(0.3, 0.3).unwrap(), 0.3, epsilon = 1e-12);
        let r = effective_radius(0.3 * (std::f64::consts::PI / 6.0).cos(), 0.3).unwrap();
        assert_relative_eq!(r, 0.15 / (std::f64::consts::PI / 6.0), epsilon = 1e-12);
        assert!((r - 0.2865).abs() < 5e-5);
        assert!(effective_radius(0.31, 0.3).is_err());
        // continuity at the limit
        let near = effective_radius(0.3 * (1e-5f64).cos(), 0.3).unwrap();
        assert!((near - 0.3).abs() < 1e-9);
    }
}
