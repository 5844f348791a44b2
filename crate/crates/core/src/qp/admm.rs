use std::time::Instant;

use super::csc::CscMatrix;
use super::ldl::LdlSymbolic;
use super::{QpSolution, QpStatus, QuadraticProgram, SolverSettings};
use crate::error::{Error, Result};

const RHO_EQ_FACTOR: f64 = 1e3;
const RHO_MIN: f64 = 1e-6;
const EQ_TOL: f64 = 1e-4;
const SCALE_MIN: f64 = 1e-4;
const SCALE_MAX: f64 = 1e4;
const DIVISION_TOL: f64 = 1e-30;
/// Infeasibility certificates cost extra products, so they are only tested periodically.
const INFEASIBILITY_CHECK_EVERY: usize = 10;

/// ADMM solver that keeps the KKT symbolic analysis between calls.
///
/// Re-solving a problem with the same sparsity pattern (the usual MPC case)
/// skips the ordering and elimination-tree work.
#[derive(Debug, Clone)]
pub struct AdmmSolver {
    pub settings: SolverSettings,
    symbolic: Option<LdlSymbolic>,
    analyses: usize,
}

/// Ruiz equilibration: `P̄ = c·D·P·D`, `Ā = E·A·D`, `q̄ = c·D·q`, `l̄ = E·l`, `ū = E·u`.
struct Scaled {
    p: CscMatrix,
    a: CscMatrix,
    at: CscMatrix,
    q: Vec<f64>,
    l: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
    e: Vec<f64>,
    c: f64,
}

fn clamp_scale(norm: f64) -> f64 {
    if norm < SCALE_MIN {
        1.0
    } else {
        norm.min(SCALE_MAX)
    }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn scale_problem(qp: &QuadraticProgram, iters: usize) -> Scaled {
    let (n, m) = (qp.n(), qp.m());
    let mut p = qp.p.clone();
    let mut a = qp.a.clone();
    let mut q = qp.q.clone();
    let mut d = vec![1.0; n];
    let mut e = vec![1.0; m];
    let mut c = 1.0;

    for _ in 0..iters {
        let pc = p.col_inf_norms();
        let ac = a.col_inf_norms();
        let ar = a.row_inf_norms();
        let dt: Vec<f64> = (0..n).map(|j| 1.0 / clamp_scale(pc[j].max(ac[j])).sqrt()).collect();
        let et: Vec<f64> = ar.iter().map(|&r| 1.0 / clamp_scale(r).sqrt()).collect();
        p.scale(&dt, &dt);
        a.scale(&et, &dt);
        for j in 0..n {
            q[j] *= dt[j];
            d[j] *= dt[j];
        }
        for i in 0..m {
            e[i] *= et[i];
        }
        let pc = p.col_inf_norms();
        let mean = if n > 0 { pc.iter().sum::<f64>() / n as f64 } else { 0.0 };
        let ct = 1.0 / clamp_scale(mean.max(inf_norm(&q)));
        p.nzval.iter_mut().for_each(|v| *v *= ct);
        q.iter_mut().for_each(|v| *v *= ct);
        c *= ct;
    }
    let l = qp.l.iter().zip(&e).map(|(v, s)| v * s).collect();
    let u = qp.u.iter().zip(&e).map(|(v, s)| v * s).collect();
    let at = a.transpose();
    Scaled { p, a, at, q, l, u, d, e, c }
}

/// Upper triangle of `[P + σI, Aᵀ; A, −diag(1/ρ)]`.
fn kkt_upper(p: &CscMatrix, at: &CscMatrix, sigma: f64, rho: &[f64]) -> CscMatrix {
    let (n, m) = (p.ncols, at.ncols);
    let mut colptr = Vec::with_capacity(n + m + 1);
    let mut rowval = Vec::with_capacity(p.nnz() + at.nnz() + n + m);
    let mut nzval = Vec::with_capacity(rowval.capacity());
    colptr.push(0);
    for j in 0..n {
        let mut diag_done = false;
        for k in p.colptr[j]..p.colptr[j + 1] {
            let i = p.rowval[k];
            if i > j {
                break;
            }
            if i == j {
                rowval.push(j);
                nzval.push(p.nzval[k] + sigma);
                diag_done = true;
            } else {
                rowval.push(i);
                nzval.push(p.nzval[k]);
            }
        }
        if !diag_done {
            rowval.push(j);
            nzval.push(sigma);
        }
        colptr.push(rowval.len());
    }
    for i in 0..m {
        for k in at.colptr[i]..at.colptr[i + 1] {
            rowval.push(at.rowval[k]);
            nzval.push(at.nzval[k]);
        }
        rowval.push(n + i);
        nzval.push(-1.0 / rho[i]);
        colptr.push(rowval.len());
    }
    CscMatrix { nrows: n + m, ncols: n + m, colptr, rowval, nzval }
}

impl AdmmSolver {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings, symbolic: None, analyses: 0 }
    }

    /// Number of symbolic analyses performed so far (1 while the pattern is stable).
    pub fn symbolic_analyses(&self) -> usize {
        self.analyses
    }

    pub fn solve(&mut self, qp: &QuadraticProgram, warm: Option<&QpSolution>) -> Result<QpSolution> {
        let start = Instant::now();
        let st = self.settings;
        st.validate()?;
        qp.validate()?;
        let (n, m) = (qp.n(), qp.m());
        let sc = scale_problem(qp, st.scaling_iters);

        let rho: Vec<f64> = (0..m)
            .map(|i| {
                let (l, u) = (qp.l[i], qp.u[i]);
                if l.is_infinite() && u.is_infinite() {
                    RHO_MIN
                } else if (u - l).abs() < EQ_TOL {
                    st.rho * RHO_EQ_FACTOR
                } else {
                    st.rho
                }
            })
            .collect();

        let kkt = kkt_upper(&sc.p, &sc.at, st.sigma_reg, &rho);
        if !self.symbolic.as_ref().is_some_and(|s| s.matches(&kkt)) {
            self.symbolic = Some(LdlSymbolic::analyse(&kkt)?);
            self.analyses += 1;
        }
        let mut factor = self.symbolic.as_mut().expect("analysed above").factor(&kkt)?;
        if factor.positive_pivots() != n {
            return Err(Error::Model("KKT matrix is not quasi-definite".into()));
        }

        let project = |v: &mut [f64]| {
            for (i, vi) in v.iter_mut().enumerate() {
                *vi = vi.clamp(sc.l[i], sc.u[i]);
            }
        };

        // iterates in scaled space
        let mut x = vec![0.0; n];
        let mut z = vec![0.0; m];
        let mut y = vec![0.0; m];
        if let Some(w) = warm.filter(|w| st.warm_start && w.x.len() == n && w.y.len() == m) {
            for j in 0..n {
                x[j] = w.x[j] / sc.d[j];
            }
            for i in 0..m {
                y[i] = sc.c * w.y[i] / sc.e[i];
            }
            sc.a.mul_vec(&x, &mut z);
            project(&mut z);
        }

        let mut rhs = vec![0.0; n + m];
        let mut x_prev = vec![0.0; n];
        let mut z_prev = vec![0.0; m];
        let mut z_tilde = vec![0.0; m];
        let mut dy = vec![0.0; m];
        let mut dx = vec![0.0; n];
        let mut ax = vec![0.0; m];
        let mut px = vec![0.0; n];
        let mut aty = vec![0.0; n];
        let mut status = QpStatus::MaxIter;
        let mut iterations = 0;
        let (mut prim_res, mut dual_res) = (f64::INFINITY, f64::INFINITY);
        let alpha = st.alpha_relax;

        for iter in 1..=st.max_iter {
            iterations = iter;
            x_prev.copy_from_slice(&x);
            z_prev.copy_from_slice(&z);

            for j in 0..n {
                rhs[j] = st.sigma_reg * x[j] - sc.q[j];
            }
            for i in 0..m {
                rhs[n + i] = z[i] - y[i] / rho[i];
            }
            factor.solve(&mut rhs);
            for i in 0..m {
                z_tilde[i] = z[i] + (rhs[n + i] - y[i]) / rho[i];
            }
            for j in 0..n {
                x[j] = alpha * rhs[j] + (1.0 - alpha) * x_prev[j];
                dx[j] = x[j] - x_prev[j];
            }
            for i in 0..m {
                let relaxed = alpha * z_tilde[i] + (1.0 - alpha) * z_prev[i];
                z[i] = (relaxed + y[i] / rho[i]).clamp(sc.l[i], sc.u[i]);
                dy[i] = rho[i] * (relaxed - z[i]);
                y[i] += dy[i];
            }

            // residuals in unscaled terms
            sc.a.mul_vec(&x, &mut ax);
            sc.p.mul_vec(&x, &mut px);
            sc.at.mul_vec(&y, &mut aty);
            let mut ax_norm = 0.0f64;
            let mut z_norm = 0.0f64;
            prim_res = 0.0;
            for i in 0..m {
                let inv = 1.0 / sc.e[i];
                prim_res = prim_res.max(((ax[i] - z[i]) * inv).abs());
                ax_norm = ax_norm.max((ax[i] * inv).abs());
                z_norm = z_norm.max((z[i] * inv).abs());
            }
            let mut px_norm = 0.0f64;
            let mut aty_norm = 0.0f64;
            let mut q_norm = 0.0f64;
            dual_res = 0.0;
            for j in 0..n {
                let inv = 1.0 / (sc.d[j] * sc.c);
                dual_res = dual_res.max(((px[j] + sc.q[j] + aty[j]) * inv).abs());
                px_norm = px_norm.max((px[j] * inv).abs());
                aty_norm = aty_norm.max((aty[j] * inv).abs());
                q_norm = q_norm.max((sc.q[j] * inv).abs());
            }
            let eps_prim = st.eps_abs + st.eps_rel * ax_norm.max(z_norm);
            let eps_dual = st.eps_abs + st.eps_rel * px_norm.max(aty_norm).max(q_norm);
            if prim_res <= eps_prim && dual_res <= eps_dual {
                status = QpStatus::Solved;
                break;
            }
            if iter % INFEASIBILITY_CHECK_EVERY != 0 {
                continue;
            }
            if primal_infeasible(&sc, qp, &dy, st.eps_prim_inf) {
                status = QpStatus::PrimalInfeasible;
                break;
            }
            if dual_infeasible(&sc, qp, &dx, st.eps_dual_inf) {
                status = QpStatus::DualInfeasible;
                break;
            }
        }

        let x_out: Vec<f64> = x.iter().zip(&sc.d).map(|(v, d)| v * d).collect();
        let y_out: Vec<f64> = y.iter().zip(&sc.e).map(|(v, e)| v * e / sc.c).collect();
        Ok(QpSolution {
            x: x_out,
            y: y_out,
            status,
            iterations,
            primal_residual: prim_res,
            dual_residual: dual_res,
            solve_time: start.elapsed().as_secs_f64(),
        })
    }
}

/// Farkas certificate from the dual increment: `Aᵀ·δy ≈ 0` and `uᵀ·δy₊ + lᵀ·δy₋ < 0`.
fn primal_infeasible(sc: &Scaled, qp: &QuadraticProgram, dy_scaled: &[f64], eps: f64) -> bool {
    let m = dy_scaled.len();
    if m == 0 {
        return false;
    }
    let dy: Vec<f64> = (0..m).map(|i| dy_scaled[i] * sc.e[i]).collect();
    let norm = inf_norm(&dy);
    if norm < DIVISION_TOL {
        return false;
    }
    let tol = eps * norm;
    let mut support = 0.0;
    for i in 0..m {
        if dy[i] > 0.0 {
            if qp.u[i].is_infinite() {
                if dy[i] > tol {
                    return false;
                }
            } else {
                support += qp.u[i] * dy[i];
            }
        } else if dy[i] < 0.0 {
            if qp.l[i].is_infinite() {
                if -dy[i] > tol {
                    return false;
                }
            } else {
                support += qp.l[i] * dy[i];
            }
        }
    }
    if support >= -tol {
        return false;
    }
    let mut atdy = vec![0.0; qp.n()];
    qp.a.mul_transpose_vec(&dy, &mut atdy);
    inf_norm(&atdy) < tol
}

/// Recession direction from the primal increment: `P·δx ≈ 0`, `qᵀ·δx < 0`, `A·δx` inside the recession cone.
fn dual_infeasible(sc: &Scaled, qp: &QuadraticProgram, dx_scaled: &[f64], eps: f64) -> bool {
    let n = dx_scaled.len();
    let dx: Vec<f64> = (0..n).map(|j| dx_scaled[j] * sc.d[j]).collect();
    let norm = inf_norm(&dx);
    if norm < DIVISION_TOL {
        return false;
    }
    let tol = eps * norm;
    if qp.q.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>() >= -tol {
        return false;
    }
    let mut pdx = vec![0.0; n];
    qp.p.mul_vec(&dx, &mut pdx);
    if inf_norm(&pdx) >= tol {
        return false;
    }
    let mut adx = vec![0.0; qp.m()];
    qp.a.mul_vec(&dx, &mut adx);
    adx.iter().enumerate().all(|(i, &v)| {
        (qp.u[i].is_infinite() || v <= tol) && (qp.l[i].is_infinite() || v >= -tol)
    })
}
