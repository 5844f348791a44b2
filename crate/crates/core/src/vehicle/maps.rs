use nalgebra::{DMatrix, DVector};

use crate::error::{domain, Result};
use crate::tire::TireLinearization;

/// Stacked per-wheel tire maps `f = B1·X_b + B2·W + D1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TireAffineMaps {
    /// 8 × n_x; only the lateral-force rows are non-zero.
    pub b1: DMatrix<f64>,
    /// 8 × 8 block diagonal `diag(1/r_eff, c̃_α)` per wheel.
    pub b2: DMatrix<f64>,
    /// `[0, f̄_y − c̃_α·ᾱ]` per wheel.
    pub d1: DVector<f64>,
}

/// Builds the tire maps for a body state of width `n_x` whose lateral
/// velocity and yaw rate sit at `lat_index` and `lat_index + 1`.
pub fn tire_affine_maps(
    lin: &[TireLinearization; 4],
    u: f64,
    l_f: f64,
    l_r: f64,
    r_eff: f64,
    n_x: usize,
    lat_index: usize,
) -> Result<TireAffineMaps> {
    if !(u > 0.0) {
        return Err(domain(format!("longitudinal speed must be positive, got {u}")));
    }
    let mut b1 = DMatrix::zeros(8, n_x);
    let mut b2 = DMatrix::zeros(8, 8);
    let mut d1 = DVector::zeros(8);
    for (i, l) in lin.iter().enumerate() {
        let a = if i < 2 { l_f } else { -l_r };
        let row = 2 * i + 1;
        b1[(row, lat_index)] = -l.c_alpha_tilde / u;
        b1[(row, lat_index + 1)] = -a * l.c_alpha_tilde / u;
        b2[(2 * i, 2 * i)] = 1.0 / r_eff;
        b2[(row, row)] = l.c_alpha_tilde;
        d1[row] = l.offset();
    }
    Ok(TireAffineMaps { b1, b2, d1 })
}

/// Block-diagonal rotation taking tire-frame forces to body-frame corner forces.
pub fn wheel_rotation_map(steering: &[f64; 4]) -> DMatrix<f64> {
    let mut lw = DMatrix::zeros(8, 8);
    for (i, &d) in steering.iter().enumerate() {
        let (s, c) = d.sin_cos();
        let k = 2 * i;
        lw[(k, k)] = c;
        lw[(k, k + 1)] = -s;
        lw[(k + 1, k)] = s;
        lw[(k + 1, k + 1)] = c;
    }
    lw
}

/// Maps corner forces `[F_x1, F_y1, …, F_x4, F_y4]` to `[F_X, F_Y, M_Z]` at the CoG.
pub fn cog_map(t_f: f64, t_r: f64, l_f: f64, l_r: f64) -> DMatrix<f64> {
    #[rustfmt::skip]
    let lc = DMatrix::from_row_slice(3, 8, &[
        1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0,
        0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0,
        -t_f / 2.0, l_f, t_f / 2.0, l_f, -t_r / 2.0, -l_r, t_r / 2.0, -l_r,
    ]);
    lc
}
