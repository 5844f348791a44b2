use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Result};
use crate::vehicle::VehicleModel;

/// Zero-order-hold sampled model `x⁺ = A_d·x + B_d·U + E_d·W + D_d`.
///
/// `d` carries the constant affine channel of the continuous model (banking
/// included); `c_phi` is the sampled banking column on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub e: DMatrix<f64>,
    pub d: DVector<f64>,
    pub c_phi: Option<DVector<f64>>,
    pub t_s: f64,
}

impl DiscreteModel {
    pub fn n_x(&self) -> usize {
        self.a.nrows()
    }

    /// `E_d·W₀ + D_d`, the per-step drift for a held driver command.
    pub fn drift(&self, w0: &DVector<f64>) -> DVector<f64> {
        &self.e * w0 + &self.d
    }

    pub fn step(&self, x: &DVector<f64>, u: &DVector<f64>, w0: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b * u + self.drift(w0)
    }
}

/// Exact ZOH of `[A | B E D C_φ]` through the exponential of the augmented
/// matrix `[[A, G], [0, 0]]·T_s`, whose top blocks are `e^{A·T_s}` and
/// `∫₀^{T_s} e^{A·τ} dτ · G`.
pub fn discretize(model: &VehicleModel, t_s: f64) -> Result<DiscreteModel> {
    if !(t_s > 0.0) {
        return Err(domain(format!("sample time must be positive, got {t_s}")));
    }
    let n = model.n_x();
    let nb = model.b.ncols();
    let ne = model.e.ncols();
    let extra = if model.c_phi.is_some() { 2 } else { 1 };
    let width = nb + ne + extra;
    let mut aug = DMatrix::zeros(n + width, n + width);
    aug.view_mut((0, 0), (n, n)).copy_from(&model.a);
    aug.view_mut((0, n), (n, nb)).copy_from(&model.b);
    aug.view_mut((0, n + nb), (n, ne)).copy_from(&model.e);
    aug.view_mut((0, n + nb + ne), (n, 1)).copy_from(&model.d);
    if let Some(c) = &model.c_phi {
        aug.view_mut((0, n + nb + ne + 1), (n, 1)).copy_from(c);
    }
    let phi = (aug * t_s).exp();
    Ok(DiscreteModel {
        a: phi.view((0, 0), (n, n)).into_owned(),
        b: phi.view((0, n), (n, nb)).into_owned(),
        e: phi.view((0, n + nb), (n, ne)).into_owned(),
        d: phi.view((0, n + nb + ne), (n, 1)).column(0).into_owned(),
        c_phi: model.c_phi.as_ref().map(|_| phi.view((0, n + nb + ne + 1), (n, 1)).column(0).into_owned()),
        t_s,
    })
}
