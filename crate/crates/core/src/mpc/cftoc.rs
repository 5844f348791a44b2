//! Finite-horizon QP construction.
//!
//! Decision variables are the deltas of the *enabled* actuator channels for
//! each of the `N` steps, followed by one shared slack `s ≥ 0`. Disabled
//! channels are pinned to zero by their input rows, so they are dropped from
//! the QP altogether instead of carried as fixed variables.
//!
//! Row order is step-major: every constraint row for step `k` (acting on
//! `x_{k+1}` and `U_k`) precedes those of step `k + 1`, and the slack sign row
//! comes last. Shifting a solution by one step is then a block shift.

use nalgebra::{DMatrix, DVector};

use super::discretize::DiscreteModel;
use super::MpcConfig;
use crate::constraints::ConstraintSet;
use crate::error::{domain, Error, Result};
use crate::qp::{CscMatrix, QuadraticProgram};

#[derive(Debug, Clone, PartialEq)]
pub struct CftocLayout {
    pub horizon: usize,
    /// Indices into the 8 input channels carried as decision variables.
    pub channels: Vec<usize>,
    pub n_x: usize,
    /// True when predicted states are decision variables (non-condensed form).
    pub states_as_variables: bool,
    pub rows_per_step: usize,
}

impl CftocLayout {
    pub fn n_inputs(&self) -> usize {
        self.horizon * self.channels.len()
    }

    pub fn slack_index(&self) -> usize {
        self.n_inputs() + if self.states_as_variables { self.horizon * self.n_x } else { 0 }
    }

    pub fn n_vars(&self) -> usize {
        self.slack_index() + 1
    }

    /// Expands the step-`k` decision block into the 8-channel input delta.
    pub fn input(&self, z: &[f64], k: usize) -> [f64; 8] {
        let mut u = [0.0; 8];
        let m = self.channels.len();
        for (c, &ch) in self.channels.iter().enumerate() {
            u[ch] = z[k * m + c];
        }
        u
    }
}

#[derive(Debug, Clone)]
pub struct Cftoc {
    pub qp: QuadraticProgram,
    pub layout: CftocLayout,
    /// Predicted states without control, `x_k` for `k = 1..N` at `U = 0` (condensed form only).
    free_response: Vec<DVector<f64>>,
    /// `∂x_k/∂ũ` blocks, stacked by `k` (condensed form only).
    gamma: DMatrix<f64>,
}

impl Cftoc {
    /// States `x_1..x_N` predicted for decision vector `z`.
    pub fn predicted_states(&self, z: &[f64]) -> Vec<DVector<f64>> {
        let l = &self.layout;
        if l.states_as_variables {
            let base = l.n_inputs();
            return (0..l.horizon)
                .map(|k| DVector::from_column_slice(&z[base + k * l.n_x..base + (k + 1) * l.n_x]))
                .collect();
        }
        let u = DVector::from_column_slice(&z[..l.n_inputs()]);
        let stacked = &self.gamma * u;
        (0..l.horizon)
            .map(|k| &self.free_response[k] + stacked.rows(k * l.n_x, l.n_x))
            .collect()
    }

    /// Smallest slack that keeps every soft row of `z` satisfied. The slack
    /// cost is increasing, so this is the exact optimum over `s` for fixed inputs.
    pub fn min_slack(&self, z: &[f64]) -> f64 {
        let slack = self.layout.slack_index();
        let qp = &self.qp;
        let mut without = z.to_vec();
        without[slack] = 0.0;
        let mut ax = vec![0.0; qp.m()];
        qp.a.mul_vec(&without, &mut ax);
        let mut s = 0.0f64;
        for j in qp.a.colptr[slack]..qp.a.colptr[slack + 1] {
            let (i, c) = (qp.a.rowval[j], qp.a.nzval[j]);
            if c < 0.0 && qp.u[i].is_finite() {
                s = s.max((ax[i] - qp.u[i]) / -c);
            } else if c > 0.0 && qp.l[i].is_finite() {
                s = s.max((qp.l[i] - ax[i]) / c);
            }
        }
        s
    }
}

struct Inputs<'a> {
    drift: DVector<f64>,
    x_d: &'a DVector<f64>,
    cfg: &'a MpcConfig,
    channels: Vec<usize>,
    u_prev: [f64; 8],
}

fn check(
    dm: &DiscreteModel,
    x0: &DVector<f64>,
    w0: &DVector<f64>,
    x_d: &DVector<f64>,
    cons: &ConstraintSet,
    cfg: &MpcConfig,
) -> Result<()> {
    let n = dm.n_x();
    if x0.len() != n || x_d.len() != n || cons.g_x.ncols() != n || cfg.state_weights.len() != n {
        return Err(Error::Dimension(format!(
            "state width {n} disagrees with x0 ({}), X_d ({}), constraints ({}) or Q ({})",
            x0.len(),
            x_d.len(),
            cons.g_x.ncols(),
            cfg.state_weights.len()
        )));
    }
    if w0.len() != 8 || cons.g_u.ncols() != 8 || dm.b.ncols() != 8 {
        return Err(Error::Dimension("input width must be 8".into()));
    }
    if x0.iter().chain(x_d.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("initial or desired state".into()));
    }
    Ok(())
}

fn enabled_channels(mask: &[bool; 8]) -> Vec<usize> {
    (0..8).filter(|&j| mask[j]).collect()
}

/// One constraint row at step `k` expressed over the decision vector.
struct RowTerms {
    /// `(variable index, coefficient)`, structural entries included even when zero.
    coeffs: Vec<(usize, f64)>,
    offset: f64,
}

/// Emits the rows of `cons` for every step, calling `terms(r, k)` to express row `r` at step `k`.
fn constraint_rows(
    cons: &ConstraintSet,
    horizon: usize,
    slack: usize,
    mut terms: impl FnMut(usize, usize) -> RowTerms,
) -> Result<(Vec<(usize, usize, f64)>, Vec<f64>, Vec<f64>, usize)> {
    let mut trip = Vec::new();
    let (mut lo, mut hi) = (Vec::new(), Vec::new());
    let mut rows_per_step = 0;
    for k in 0..horizon {
        let start = lo.len();
        for r in 0..cons.rows() {
            let t = terms(r, k);
            let (l, u) = (cons.lower[r] - t.offset, cons.upper[r] - t.offset);
            if t.coeffs.is_empty() {
                if l > 1e-12 || u < -1e-12 {
                    return Err(domain(format!("constraint row {r} excludes the only admissible input")));
                }
                continue;
            }
            if cons.soft[r] {
                if u.is_finite() {
                    let row = lo.len();
                    trip.extend(t.coeffs.iter().map(|&(j, v)| (row, j, v)));
                    trip.push((row, slack, -1.0));
                    lo.push(f64::NEG_INFINITY);
                    hi.push(u);
                }
                if l.is_finite() {
                    let row = lo.len();
                    trip.extend(t.coeffs.iter().map(|&(j, v)| (row, j, v)));
                    trip.push((row, slack, 1.0));
                    lo.push(l);
                    hi.push(f64::INFINITY);
                }
            } else {
                let row = lo.len();
                trip.extend(t.coeffs.iter().map(|&(j, v)| (row, j, v)));
                lo.push(l);
                hi.push(u);
            }
        }
        rows_per_step = lo.len() - start;
    }
    let row = lo.len();
    trip.push((row, slack, 1.0));
    lo.push(0.0);
    hi.push(f64::INFINITY);
    Ok((trip, lo, hi, rows_per_step))
}

/// Input cost `Σ U_kᵀ·R·U_k` plus the optional rate penalty, as triplets over the input block (already doubled).
fn input_cost(inp: &Inputs, horizon: usize, trip: &mut Vec<(usize, usize, f64)>, q: &mut [f64]) {
    let m = inp.channels.len();
    let rate = inp.cfg.input_rate_weights.as_deref();
    for k in 0..horizon {
        for (c, &ch) in inp.channels.iter().enumerate() {
            let i = k * m + c;
            let mut diag = inp.cfg.input_weights[ch];
            if let Some(rw) = rate {
                let w = rw[ch];
                // (U_k − U_{k−1}) with U_{−1} the previously applied delta
                diag += if k + 1 < horizon { 2.0 * w } else { w };
                if k == 0 {
                    q[i] -= 2.0 * w * inp.u_prev[ch];
                } else {
                    trip.push((i, i - m, -2.0 * w));
                    trip.push((i - m, i, -2.0 * w));
                }
            }
            trip.push((i, i, 2.0 * diag));
        }
    }
}

fn weights_ok(cfg: &MpcConfig) -> Result<()> {
    if cfg.input_weights.len() != 8 {
        return Err(Error::Dimension("R must have 8 entries".into()));
    }
    if let Some(r) = &cfg.input_rate_weights {
        if r.len() != 8 {
            return Err(Error::Dimension("input rate weights must have 8 entries".into()));
        }
    }
    Ok(())
}

/// Condensed CFTOC: predicted states are eliminated through
/// `x_k = A^k·x₀ + Σ_{j<k} A^{k−1−j}·(B·U_j + c)`, `c = E·W₀ + D`.
#[allow(clippy::too_many_arguments)]
pub fn build_cftoc(
    dm: &DiscreteModel,
    x0: &DVector<f64>,
    w0: &DVector<f64>,
    x_d: &DVector<f64>,
    cons: &ConstraintSet,
    cfg: &MpcConfig,
    mask: &[bool; 8],
    u_prev: &[f64; 8],
) -> Result<Cftoc> {
    check(dm, x0, w0, x_d, cons, cfg)?;
    weights_ok(cfg)?;
    let inp = Inputs {
        drift: dm.drift(w0),
        x_d,
        cfg,
        channels: enabled_channels(mask),
        u_prev: *u_prev,
    };
    let (n, horizon) = (dm.n_x(), cfg.horizon);
    let m = inp.channels.len();
    let nu = horizon * m;
    let layout = CftocLayout {
        horizon,
        channels: inp.channels.clone(),
        n_x: n,
        states_as_variables: false,
        rows_per_step: 0,
    };
    let slack = layout.slack_index();

    let b_red = DMatrix::from_fn(n, m, |i, c| dm.b[(i, inp.channels[c])]);
    // A^i·B̃ for i = 0..N−1
    let mut powers = Vec::with_capacity(horizon);
    let mut cur = b_red.clone();
    for _ in 0..horizon {
        let next = &dm.a * &cur;
        powers.push(cur);
        cur = next;
    }
    let mut gamma = DMatrix::zeros(horizon * n, nu);
    for k in 0..horizon {
        for j in 0..=k {
            gamma.view_mut((k * n, j * m), (n, m)).copy_from(&powers[k - j]);
        }
    }
    let mut free = Vec::with_capacity(horizon);
    let mut x = x0.clone();
    for _ in 0..horizon {
        x = &dm.a * &x + &inp.drift;
        free.push(x.clone());
    }

    // cost
    let sqrt_q = DVector::from_iterator(n, cfg.state_weights.iter().map(|w| w.sqrt()));
    let mut weighted = gamma.clone();
    let mut err = DVector::zeros(horizon * n);
    for k in 0..horizon {
        for i in 0..n {
            weighted.row_mut(k * n + i).scale_mut(sqrt_q[i]);
            err[k * n + i] = cfg.state_weights[i] * (free[k][i] - inp.x_d[i]);
        }
    }
    let h = weighted.tr_mul(&weighted);
    let mut q = vec![0.0; slack + 1];
    let gq = gamma.tr_mul(&err);
    for j in 0..nu {
        q[j] = 2.0 * gq[j];
    }
    let mut p_trip = Vec::with_capacity(nu * nu + 2 * nu + 1);
    for j in 0..nu {
        for i in 0..nu {
            p_trip.push((i, j, 2.0 * h[(i, j)]));
        }
    }
    input_cost(&inp, horizon, &mut p_trip, &mut q);
    p_trip.push((slack, slack, 2.0 * cfg.slack_weight));
    let p = CscMatrix::from_triplets(slack + 1, slack + 1, &p_trip)?;

    // constraints
    let gx_rows: Vec<Vec<(usize, f64)>> = (0..cons.rows())
        .map(|r| cons.g_x.row(r).iter().copied().enumerate().filter(|e| e.1 != 0.0).collect())
        .collect();
    let (a_trip, l, u, rows_per_step) = constraint_rows(cons, horizon, slack, |r, k| {
        let mut coeffs = Vec::new();
        let mut offset = 0.0;
        if !gx_rows[r].is_empty() {
            for j in 0..=k {
                for c in 0..m {
                    let v: f64 = gx_rows[r].iter().map(|&(i, g)| g * powers[k - j][(i, c)]).sum();
                    coeffs.push((j * m + c, v));
                }
            }
            offset = gx_rows[r].iter().map(|&(i, g)| g * free[k][i]).sum();
        }
        for (c, &ch) in inp.channels.iter().enumerate() {
            let g = cons.g_u[(r, ch)];
            if g != 0.0 {
                match coeffs.iter_mut().find(|e| e.0 == k * m + c) {
                    Some(e) => e.1 += g,
                    None => coeffs.push((k * m + c, g)),
                }
            }
        }
        RowTerms { coeffs, offset }
    })?;
    let a = CscMatrix::from_triplets(l.len(), slack + 1, &a_trip)?;
    Ok(Cftoc {
        qp: QuadraticProgram { p, q, a, l, u },
        layout: CftocLayout { rows_per_step, ..layout },
        free_response: free,
        gamma,
    })
}

/// Non-condensed CFTOC with `x_1..x_N` as variables tied by equality rows.
/// Used to cross-check the condensed construction.
#[allow(clippy::too_many_arguments)]
pub fn build_cftoc_sparse(
    dm: &DiscreteModel,
    x0: &DVector<f64>,
    w0: &DVector<f64>,
    x_d: &DVector<f64>,
    cons: &ConstraintSet,
    cfg: &MpcConfig,
    mask: &[bool; 8],
    u_prev: &[f64; 8],
) -> Result<Cftoc> {
    check(dm, x0, w0, x_d, cons, cfg)?;
    weights_ok(cfg)?;
    let inp = Inputs {
        drift: dm.drift(w0),
        x_d,
        cfg,
        channels: enabled_channels(mask),
        u_prev: *u_prev,
    };
    let (n, horizon) = (dm.n_x(), cfg.horizon);
    let m = inp.channels.len();
    let layout = CftocLayout {
        horizon,
        channels: inp.channels.clone(),
        n_x: n,
        states_as_variables: true,
        rows_per_step: 0,
    };
    let nu = layout.n_inputs();
    let slack = layout.slack_index();
    let xi = |k: usize, i: usize| nu + k * n + i;

    let mut q = vec![0.0; slack + 1];
    let mut p_trip = Vec::new();
    input_cost(&inp, horizon, &mut p_trip, &mut q);
    for k in 0..horizon {
        for i in 0..n {
            let w = cfg.state_weights[i];
            p_trip.push((xi(k, i), xi(k, i), 2.0 * w));
            q[xi(k, i)] = -2.0 * w * inp.x_d[i];
        }
    }
    p_trip.push((slack, slack, 2.0 * cfg.slack_weight));
    let p = CscMatrix::from_triplets(slack + 1, slack + 1, &p_trip)?;

    let gx_rows: Vec<Vec<(usize, f64)>> = (0..cons.rows())
        .map(|r| cons.g_x.row(r).iter().copied().enumerate().filter(|e| e.1 != 0.0).collect())
        .collect();
    let (mut a_trip, mut l, mut u, rows_per_step) = constraint_rows(cons, horizon, slack, |r, k| {
        let mut coeffs: Vec<(usize, f64)> = gx_rows[r].iter().map(|&(i, g)| (xi(k, i), g)).collect();
        for (c, &ch) in inp.channels.iter().enumerate() {
            let g = cons.g_u[(r, ch)];
            if g != 0.0 {
                coeffs.push((k * m + c, g));
            }
        }
        RowTerms { coeffs, offset: 0.0 }
    })?;

    // dynamics: x_{k+1} − A·x_k − B̃·U_k = c  (x_0 moved to the right-hand side)
    let ax0 = &dm.a * x0;
    for k in 0..horizon {
        for i in 0..n {
            let row = l.len();
            a_trip.push((row, xi(k, i), 1.0));
            if k > 0 {
                for j in 0..n {
                    if dm.a[(i, j)] != 0.0 {
                        a_trip.push((row, xi(k - 1, j), -dm.a[(i, j)]));
                    }
                }
            }
            for (c, &ch) in inp.channels.iter().enumerate() {
                if dm.b[(i, ch)] != 0.0 {
                    a_trip.push((row, k * m + c, -dm.b[(i, ch)]));
                }
            }
            let rhs = inp.drift[i] + if k == 0 { ax0[i] } else { 0.0 };
            l.push(rhs);
            u.push(rhs);
        }
    }
    let a = CscMatrix::from_triplets(l.len(), slack + 1, &a_trip)?;
    Ok(Cftoc {
        qp: QuadraticProgram { p, q, a, l, u },
        layout: CftocLayout { rows_per_step, ..layout },
        free_response: Vec::new(),
        gamma: DMatrix::zeros(0, 0),
    })
}
