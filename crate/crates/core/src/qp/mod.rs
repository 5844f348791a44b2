//! Convex quadratic programs in two-sided form
//!
//! ```text
//! minimize   ½·xᵀ·P·x + qᵀ·x
//! subject to l ≤ A·x ≤ u
//! ```
//!
//! solved by operator splitting (ADMM) with a cached sparse LDLᵀ factorization
//! of the quasi-definite KKT matrix.

mod admm;
pub mod csc;
pub mod io;
pub mod ldl;

pub use admm::AdmmSolver;
pub use csc::CscMatrix;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProgram {
    /// Symmetric positive-semidefinite cost matrix, both triangles stored.
    pub p: CscMatrix,
    pub q: Vec<f64>,
    pub a: CscMatrix,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl QuadraticProgram {
    pub fn n(&self) -> usize {
        self.q.len()
    }

    pub fn m(&self) -> usize {
        self.l.len()
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        if self.p.nrows != n || self.p.ncols != n {
            return Err(Error::Dimension(format!(
                "P is {}x{}, expected {n}x{n}",
                self.p.nrows, self.p.ncols
            )));
        }
        if self.a.ncols != n || self.a.nrows != m || self.u.len() != m {
            return Err(Error::Dimension(format!(
                "A is {}x{} with bounds of length {} and {}, expected {m}x{n}",
                self.a.nrows,
                self.a.ncols,
                self.l.len(),
                self.u.len()
            )));
        }
        let scale = self.p.nzval.iter().fold(1.0f64, |a, v| a.max(v.abs()));
        let asym = self.p.asymmetry();
        if asym > 1e-8 * scale {
            return Err(Error::Dimension(format!("P is not symmetric (max asymmetry {asym:e})")));
        }
        for i in 0..m {
            if self.l[i] > self.u[i] || self.l[i].is_nan() || self.u[i].is_nan() {
                return Err(Error::Domain(format!(
                    "row {i} has lower bound {} above upper bound {}",
                    self.l[i], self.u[i]
                )));
            }
        }
        if self.q.iter().chain(&self.p.nzval).chain(&self.a.nzval).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("problem data contains NaN or infinity".into()));
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        let mut px = vec![0.0; self.n()];
        self.p.mul_vec(x, &mut px);
        x.iter().zip(&px).map(|(a, b)| 0.5 * a * b).sum::<f64>()
            + x.iter().zip(&self.q).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Projects `v` onto the box `[l, u]`.
    pub fn project(&self, v: &mut [f64]) {
        for (i, vi) in v.iter_mut().enumerate() {
            *vi = vi.clamp(self.l[i], self.u[i]);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    pub rho: f64,
    pub sigma_reg: f64,
    pub alpha_relax: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_prim_inf: f64,
    pub eps_dual_inf: f64,
    pub max_iter: usize,
    pub warm_start: bool,
    /// Ruiz equilibration passes applied before iterating (0 disables scaling).
    pub scaling_iters: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma_reg: 1e-6,
            alpha_relax: 1.6,
            eps_abs: 1e-4,
            eps_rel: 1e-4,
            eps_prim_inf: 1e-5,
            eps_dual_inf: 1e-5,
            max_iter: 4000,
            warm_start: true,
            scaling_iters: 10,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.sigma_reg > 0.0) {
            return Err(Error::Config("rho and sigma_reg must be positive".into()));
        }
        if !(self.alpha_relax > 0.0 && self.alpha_relax < 2.0) {
            return Err(Error::Config(format!("alpha_relax must lie in (0, 2), got {}", self.alpha_relax)));
        }
        if !(self.eps_abs > 0.0 && self.eps_rel > 0.0 && self.eps_prim_inf > 0.0 && self.eps_dual_inf > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Solved,
    MaxIter,
    PrimalInfeasible,
    DualInfeasible,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Solved => "solved",
            QpStatus::MaxIter => "max_iter",
            QpStatus::PrimalInfeasible => "primal_infeasible",
            QpStatus::DualInfeasible => "dual_infeasible",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Wall-clock seconds spent in [`AdmmSolver::solve`].
    pub solve_time: f64,
}

/// `(‖A·x − Π(A·x)‖∞, ‖P·x + q + Aᵀ·y‖∞)`.
pub fn kkt_residuals(qp: &QuadraticProgram, x: &[f64], y: &[f64]) -> (f64, f64) {
    let mut ax = vec![0.0; qp.m()];
    qp.a.mul_vec(x, &mut ax);
    let primal = ax
        .iter()
        .enumerate()
        .map(|(i, &v)| (v - v.clamp(qp.l[i], qp.u[i])).abs())
        .fold(0.0, f64::max);
    let mut px = vec![0.0; qp.n()];
    qp.p.mul_vec(x, &mut px);
    let mut aty = vec![0.0; qp.n()];
    qp.a.mul_transpose_vec(y, &mut aty);
    let dual = (0..qp.n()).map(|j| (px[j] + qp.q[j] + aty[j]).abs()).fold(0.0, f64::max);
    (primal, dual)
}

/// One-shot solve with a fresh workspace.
pub fn solve(qp: &QuadraticProgram, settings: &SolverSettings, warm: Option<&QpSolution>) -> Result<QpSolution> {
    AdmmSolver::new(*settings).solve(qp, warm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn scalar_qp(p: f64, q: f64, l: f64, u: f64) -> QuadraticProgram {
        QuadraticProgram {
            p: CscMatrix::from_dense(&DMatrix::from_element(1, 1, p), 0.0),
            q: vec![q],
            a: CscMatrix::identity(1),
            l: vec![l],
            u: vec![u],
        }
    }

    fn tight() -> SolverSettings {
        SolverSettings { eps_abs: 1e-9, eps_rel: 1e-9, max_iter: 20_000, ..Default::default() }
    }

    #[test]
    fn unconstrained_minimum() {
        let qp = QuadraticProgram {
            p: CscMatrix::from_dense(&DMatrix::from_element(1, 1, 2.0), 0.0),
            q: vec![0.0],
            a: CscMatrix::zeros(0, 1),
            l: vec![],
            u: vec![],
        };
        let sol = solve(&qp, &tight(), None).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!(sol.x[0].abs() < 1e-8);
    }

    #[test]
    fn active_upper_bound() {
        // (z − 1)² = z² − 2z + 1  →  P = 2, q = −2
        let qp = scalar_qp(2.0, -2.0, f64::NEG_INFINITY, 0.5);
        let sol = solve(&qp, &tight(), None).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert!((sol.x[0] - 0.5).abs() < 1e-7);
        assert!(sol.y[0] >= 0.0);
        let (rp, rd) = kkt_residuals(&qp, &sol.x, &sol.y);
        assert!(rp <= 1e-6 && rd <= 1e-6);
    }

    #[test]
    fn perturbed_point_has_large_residual() {
        let qp = scalar_qp(2.0, -2.0, f64::NEG_INFINITY, 0.5);
        // optimum: x = 0.5, y = 1 (P·x + q + y = 1 − 2 + 1 = 0)
        let (rp, rd) = kkt_residuals(&qp, &[0.5], &[1.0]);
        assert!(rp < 1e-12 && rd < 1e-12);
        let (rp, rd) = kkt_residuals(&qp, &[0.6], &[1.0]);
        assert!(rp.max(rd) >= 0.01);
    }

    #[test]
    fn stationary_point_has_zero_dual_residual() {
        let p = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let q = [1.0, -2.0];
        let x = p.clone().lu().solve(&nalgebra::DVector::from_row_slice(&[-1.0, 2.0])).unwrap();
        let qp = QuadraticProgram {
            p: CscMatrix::from_dense(&p, 0.0),
            q: q.to_vec(),
            a: CscMatrix::zeros(0, 2),
            l: vec![],
            u: vec![],
        };
        let (_, rd) = kkt_residuals(&qp, x.as_slice(), &[]);
        assert!(rd < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let mut qp = scalar_qp(2.0, 0.0, 1.0, 0.0);
        assert!(matches!(qp.validate(), Err(Error::Domain(_))));
        qp.l = vec![0.0, 1.0];
        assert!(matches!(qp.validate(), Err(Error::Dimension(_))));
        let asym = QuadraticProgram {
            p: CscMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]), 0.0),
            q: vec![0.0; 2],
            a: CscMatrix::zeros(0, 2),
            l: vec![],
            u: vec![],
        };
        assert!(solve(&asym, &SolverSettings::default(), None).is_err());
    }

    #[test]
    fn detects_primal_infeasibility() {
        // x ≥ 1 and x ≤ 0 via two rows
        let qp = QuadraticProgram {
            p: CscMatrix::from_dense(&DMatrix::from_element(1, 1, 1.0), 0.0),
            q: vec![0.0],
            a: CscMatrix::from_dense(&DMatrix::from_row_slice(2, 1, &[1.0, 1.0]), 0.0),
            l: vec![1.0, f64::NEG_INFINITY],
            u: vec![f64::INFINITY, 0.0],
        };
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn detects_dual_infeasibility() {
        // minimize −x with x ≥ 0 only
        let qp = QuadraticProgram {
            p: CscMatrix::zeros(1, 1),
            q: vec![-1.0],
            a: CscMatrix::identity(1),
            l: vec![0.0],
            u: vec![f64::INFINITY],
        };
        let sol = solve(&qp, &SolverSettings::default(), None).unwrap();
        assert_eq!(sol.status, QpStatus::DualInfeasible);
    }

    #[test]
    fn max_iter_is_a_status() {
        let qp = scalar_qp(2.0, -2.0, f64::NEG_INFINITY, 0.5);
        let s = SolverSettings { max_iter: 1, eps_abs: 1e-12, eps_rel: 1e-12, ..Default::default() };
        let sol = solve(&qp, &s, None).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIter);
        assert_eq!(sol.iterations, 1);
    }
}
