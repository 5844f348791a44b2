//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

use lateral_mpc::constraints::ConstraintSet;
use lateral_mpc::mpc::{DiscreteModel, MpcConfig};
use lateral_mpc::qp::{CscMatrix, QuadraticProgram};
use lateral_mpc::tire::TireLinearization;
use lateral_mpc::vehicle::{
    body_matrices_general, body_matrices_vhs, ActuatorConfig, ControlDelta, DriverCommand, ModelKind, Vehicle,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// dense QP + brute-force active-set enumeration

#[derive(Debug, Clone)]
pub struct DenseQp {
    pub p: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a: DMatrix<f64>,
    pub l: DVector<f64>,
    pub u: DVector<f64>,
}

impl DenseQp {
    pub fn to_sparse(&self) -> QuadraticProgram {
        QuadraticProgram {
            p: CscMatrix::from_dense(&self.p, 0.0),
            q: self.q.iter().copied().collect(),
            a: CscMatrix::from_dense(&self.a, 0.0),
            l: self.l.iter().copied().collect(),
            u: self.u.iter().copied().collect(),
        }
    }
}

/// Strictly convex QP of size `n × m`, feasible by construction: every row
/// brackets `A·x_f` for a point `x_f` a short random step away from the
/// unconstrained minimiser, so only a few rows end up active.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> DenseQp {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let p = &g * g.transpose() + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let x_free = -p.clone().lu().solve(&q).expect("P is positive definite");
    let dir: DVector<f64> = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let step: f64 = rng.random_range(0.0..1.0) / dir.norm().max(1e-12);
    let ax = &a * (x_free + dir * step);
    let mut l = DVector::zeros(m);
    let mut u = DVector::zeros(m);
    for i in 0..m {
        l[i] = ax[i] - rng.random_range(0.05..1.5);
        u[i] = ax[i] + rng.random_range(0.05..1.5);
        if rng.random_bool(0.15) {
            l[i] = f64::NEG_INFINITY;
        } else if rng.random_bool(0.15) {
            u[i] = f64::INFINITY;
        }
    }
    DenseQp { p, q, a, l, u }
}

/// Optimal `(x, y)` found by trying every active set in order of increasing
/// size, each row pinned at either bound. Returns `None` when more than
/// `budget` equality-constrained solves would be needed.
pub fn active_set_oracle(qp: &DenseQp, budget: usize) -> Option<(DVector<f64>, DVector<f64>)> {
    let (n, m) = (qp.q.len(), qp.l.len());
    let tol = 1e-9;
    let mut solves = 0;
    for k in 0..=n.min(m) {
        let mut set: Vec<usize> = (0..k).collect();
        loop {
            for signs in 0..(1u32 << k) {
                // bit set: row pinned at its upper bound
                let bounds: Vec<f64> =
                    (0..k).map(|t| if signs >> t & 1 == 1 { qp.u[set[t]] } else { qp.l[set[t]] }).collect();
                if bounds.iter().any(|b| !b.is_finite()) {
                    continue;
                }
                solves += 1;
                if solves > budget {
                    return None;
                }
                let mut kkt = DMatrix::zeros(n + k, n + k);
                let mut rhs = DVector::zeros(n + k);
                kkt.view_mut((0, 0), (n, n)).copy_from(&qp.p);
                for (t, &i) in set.iter().enumerate() {
                    for j in 0..n {
                        kkt[(n + t, j)] = qp.a[(i, j)];
                        kkt[(j, n + t)] = qp.a[(i, j)];
                    }
                    rhs[n + t] = bounds[t];
                }
                rhs.rows_mut(0, n).copy_from(&(-&qp.q));
                let Some(sol) = kkt.lu().solve(&rhs) else { continue };
                let x = sol.rows(0, n).into_owned();
                let ax = &qp.a * &x;
                let feasible = (0..m).all(|i| ax[i] >= qp.l[i] - tol && ax[i] <= qp.u[i] + tol);
                let signs_ok = (0..k).all(|t| {
                    let y = sol[n + t];
                    if signs >> t & 1 == 1 { y >= -tol } else { y <= tol }
                });
                if feasible && signs_ok {
                    let mut y = DVector::zeros(m);
                    for (t, &i) in set.iter().enumerate() {
                        y[i] = sol[n + t];
                    }
                    return Some((x, y));
                }
            }
            if !next_combination(&mut set, m) {
                break;
            }
        }
    }
    None
}

fn next_combination(set: &mut [usize], m: usize) -> bool {
    let k = set.len();
    for t in (0..k).rev() {
        if set[t] < m - k + t {
            set[t] += 1;
            for s in t + 1..k {
                set[s] = set[s - 1] + 1;
            }
            return true;
        }
    }
    false
}

// ---------------------------------------------------------------------------
// fine integration of a linear system

/// `x(T)` of `ẋ = A·x + g` by `steps` classical RK4 steps.
pub fn rk4_linear(a: &DMatrix<f64>, g: &DVector<f64>, x0: &DVector<f64>, t: f64, steps: usize) -> DVector<f64> {
    let h = t / steps as f64;
    let f = |x: &DVector<f64>| a * x + g;
    let mut x = x0.clone();
    for _ in 0..steps {
        let k1 = f(&x);
        let k2 = f(&(&x + &k1 * (0.5 * h)));
        let k3 = f(&(&x + &k2 * (0.5 * h)));
        let k4 = f(&(&x + &k3 * h));
        x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    x
}

// ---------------------------------------------------------------------------
// per-wheel force bookkeeping, written out term by term

/// Derivative of the affine model computed wheel by wheel: slip angle from the
/// total steering, affine lateral force, `Q/r_eff` longitudinal force, rotation
/// by the driver's steering into the body frame, moments about the CoG from
/// each wheel's position (left wheels at `+t/2`), then the body dynamics.
pub fn corner_force_derivative(
    vehicle: &Vehicle,
    lin: &[TireLinearization; 4],
    x: &DVector<f64>,
    w0: &DriverCommand,
    du: &ControlDelta,
    actuators: &ActuatorConfig,
    u: f64,
    phi_r: f64,
) -> DVector<f64> {
    let kind = vehicle.kind();
    let (v, r) = (x[kind.lateral_velocity_index()], x[kind.yaw_rate_index()]);
    let (l_f, l_r) = (vehicle.l_f(), vehicle.l_r());
    let (t_f, t_r) = vehicle.tracks();
    let pos = [(l_f, t_f / 2.0), (l_f, -t_f / 2.0), (-l_r, t_r / 2.0), (-l_r, -t_r / 2.0)];
    let mask = actuators.mask();
    let (mut fx_sum, mut fy_sum, mut mz) = (0.0, 0.0, 0.0);
    for i in 0..4 {
        let dq = if mask[2 * i] { du.torque[i] } else { 0.0 };
        let dd = if mask[2 * i + 1] { du.steering[i] } else { 0.0 };
        let alpha = w0.steering[i] + dd - (v + pos[i].0 * r) / u;
        let fy = lin[i].f_y_bar + lin[i].c_alpha_tilde * (alpha - lin[i].alpha_bar);
        let fx = (w0.torque[i] + dq) / vehicle.r_eff();
        let (s, c) = w0.steering[i].sin_cos();
        let (bx, by) = (c * fx - s * fy, s * fx + c * fy);
        fx_sum += bx;
        fy_sum += by;
        mz += pos[i].0 * by - pos[i].1 * bx;
    }
    let forces = DVector::from_column_slice(&[fx_sum, fy_sum, mz]);
    let mut dx = DVector::zeros(kind.n_states());
    match vehicle {
        Vehicle::GeneralEv(p) => {
            let (a, b) = body_matrices_general(p, u).unwrap();
            dx.rows_mut(0, 4).copy_from(&(a * x.rows(0, 4) + b * &forces));
            for i in 0..4 {
                let dq = if mask[2 * i] { du.torque[i] } else { 0.0 };
                dx[4 + i] = dq / p.i_w;
            }
        }
        Vehicle::Vhs(p) => {
            let (a, b, c_phi) = body_matrices_vhs(p, u).unwrap();
            dx.copy_from(&(a * x + b * &forces + c_phi * phi_r));
        }
    }
    dx
}

// ---------------------------------------------------------------------------
// random finite-horizon problems

pub struct RandomCftoc {
    pub dm: DiscreteModel,
    pub x0: DVector<f64>,
    pub w0: DVector<f64>,
    pub x_d: DVector<f64>,
    pub cons: ConstraintSet,
    pub cfg: MpcConfig,
    pub mask: [bool; 8],
    pub u_prev: [f64; 8],
}

/// Small random sampled system with soft state rows and hard input boxes.
pub fn random_cftoc(rng: &mut ChaCha8Rng) -> RandomCftoc {
    let n = rng.random_range(1..=5);
    let horizon = rng.random_range(1..=10);
    let raw = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let a = DMatrix::identity(n, n) * 0.7 + raw * (0.3 / n as f64);
    let b = DMatrix::from_fn(n, 8, |_, _| rng.random_range(-0.5..0.5));
    let e = DMatrix::from_fn(n, 8, |_, _| rng.random_range(-0.1..0.1));
    let d = DVector::from_fn(n, |_, _| rng.random_range(-0.1..0.1));
    let mut mask = [false; 8];
    for m in mask.iter_mut() {
        *m = rng.random_bool(0.5);
    }
    mask[rng.random_range(0..8)] = true;

    let mut cons = ConstraintSet::empty(n, 8);
    let mut push = |gx: DVector<f64>, gu: DVector<f64>, lo: f64, hi: f64, soft: bool| {
        cons.g_x = cons.g_x.clone().insert_row(cons.g_x.nrows(), 0.0);
        cons.g_u = cons.g_u.clone().insert_row(cons.g_u.nrows(), 0.0);
        let r = cons.g_x.nrows() - 1;
        cons.g_x.row_mut(r).copy_from(&gx.transpose());
        cons.g_u.row_mut(r).copy_from(&gu.transpose());
        cons.lower = cons.lower.clone().push(lo);
        cons.upper = cons.upper.clone().push(hi);
        cons.soft.push(soft);
    };
    for _ in 0..rng.random_range(0..=3) {
        let gx = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let half = rng.random_range(0.2..1.0);
        push(gx, DVector::zeros(8), -half, half, true);
    }
    for ch in 0..8 {
        let mut gu = DVector::zeros(8);
        gu[ch] = 1.0;
        let (lo, hi) = if mask[ch] { (-rng.random_range(0.1..1.0), rng.random_range(0.1..1.0)) } else { (0.0, 0.0) };
        push(DVector::zeros(n), gu, lo, hi, false);
    }
    cons.slack_weight = rng.random_range(1.0..100.0);

    let cfg = MpcConfig {
        model_kind: ModelKind::Vhs,
        horizon,
        sample_time: 0.1,
        state_weights: (0..n).map(|_| rng.random_range(0.1..10.0)).collect(),
        input_weights: (0..8).map(|_| rng.random_range(0.1..5.0)).collect(),
        input_rate_weights: if rng.random_bool(0.5) {
            Some((0..8).map(|_| rng.random_range(0.0..2.0)).collect())
        } else {
            None
        },
        slack_weight: cons.slack_weight,
        solver: Default::default(),
    };
    let mut u_prev = [0.0; 8];
    for (ch, v) in u_prev.iter_mut().enumerate() {
        if mask[ch] {
            *v = rng.random_range(-0.1..0.1);
        }
    }
    RandomCftoc {
        dm: DiscreteModel { a, b, e, d, c_phi: None, t_s: 0.1 },
        x0: DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0)),
        w0: DVector::from_fn(8, |_, _| rng.random_range(-1.0..1.0)),
        x_d: DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
        cons,
        cfg,
        mask,
        u_prev,
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
