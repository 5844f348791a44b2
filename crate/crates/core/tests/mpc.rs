mod common;

use common::{max_abs_diff, random_cftoc, rk4_linear};
use lateral_mpc::config::presets;
use lateral_mpc::constraints::{input_box, input_rows, ConstraintSet};
use lateral_mpc::mpc::{
    build_cftoc, build_cftoc_sparse, discretize, operating_point, reference_solver_settings, DiscreteModel,
    MpcConfig, MpcController, Reference,
};
use lateral_mpc::qp::{solve, QpStatus};
use lateral_mpc::vehicle::{ActuatorConfig, ControlDelta, DriverCommand, ModelKind, Vehicle};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn general() -> Vehicle {
    Vehicle::GeneralEv(presets::general_ev_params())
}

fn dallara() -> Vehicle {
    Vehicle::Vhs(presets::dallara_params())
}

/// Largest ZOH-vs-RK4 gap over random operating points of both layouts.
fn zoh_gap(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for vehicle in [general(), dallara()] {
        let n = vehicle.kind().n_states();
        for _ in 0..cases {
            let mut x = DVector::from_fn(n, |_, _| rng.random_range(-0.05..0.05));
            if n == 8 {
                for i in 4..8 {
                    x[i] = 56.0 + rng.random_range(-2.0..2.0);
                }
            }
            let w0 = DriverCommand::front_steer(rng.random_range(-0.1..0.1), [0.0, 0.0, 100.0, 100.0]);
            let du = ControlDelta::from_slice(&[0.0; 8].map(|_: f64| rng.random_range(-0.05..0.05)));
            let u = rng.random_range(20.0..60.0);
            let phi_r = if n == 5 { rng.random_range(-0.4..0.4) } else { 0.0 };
            let t_s = [0.05, 0.1][rng.random_range(0..2)];
            let model = operating_point(&vehicle, &x, &w0, &ActuatorConfig::all(), u, phi_r).unwrap().model;
            let dm = discretize(&model, t_s).unwrap();
            let zoh = dm.step(&x, &du.as_vector(), &w0.as_vector());
            let g = &model.b * du.as_vector() + model.affine_term();
            let fine = rk4_linear(&model.a, &g, &x, t_s, 1000);
            worst = worst.max((zoh - fine).amax());
        }
    }
    worst
}

#[test]
fn zoh_matches_fine_integration() {
    let gap = zoh_gap(10, 1);
    assert!(gap <= 1e-9, "gap {gap}");
}

#[test]
fn zoh_of_scalar_integrator() {
    let model_a = DMatrix::from_element(1, 1, -2.0);
    let g = DVector::from_element(1, 3.0);
    let fine = rk4_linear(&model_a, &g, &DVector::from_element(1, 1.0), 0.1, 1000)[0];
    let exact = (-0.2f64).exp() + 1.5 * (1.0 - (-0.2f64).exp());
    assert!((fine - exact).abs() < 1e-12);
}

fn first_input_gap(case: &common::RandomCftoc) -> (f64, QpStatus, QpStatus) {
    let dense = build_cftoc(&case.dm, &case.x0, &case.w0, &case.x_d, &case.cons, &case.cfg, &case.mask, &case.u_prev)
        .unwrap();
    let sparse =
        build_cftoc_sparse(&case.dm, &case.x0, &case.w0, &case.x_d, &case.cons, &case.cfg, &case.mask, &case.u_prev)
            .unwrap();
    let settings = reference_solver_settings();
    let a = solve(&dense.qp, &settings, None).unwrap();
    let b = solve(&sparse.qp, &settings, None).unwrap();
    let gap = max_abs_diff(&dense.layout.input(&a.x, 0), &sparse.layout.input(&b.x, 0));
    (gap, a.status, b.status)
}

#[test]
fn condensed_and_sparse_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for i in 0..20 {
        let case = random_cftoc(&mut rng);
        let (gap, sa, sb) = first_input_gap(&case);
        assert_eq!((sa, sb), (QpStatus::Solved, QpStatus::Solved), "instance {i}");
        assert!(gap <= 1e-6, "instance {i}: first inputs differ by {gap}");
    }
}

#[test]
fn condensed_predictions_follow_the_model() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let case = random_cftoc(&mut rng);
    let c = build_cftoc(&case.dm, &case.x0, &case.w0, &case.x_d, &case.cons, &case.cfg, &case.mask, &case.u_prev)
        .unwrap();
    let z: Vec<f64> = (0..c.layout.n_vars()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let predicted = c.predicted_states(&z);
    let mut x = case.x0.clone();
    for (k, p) in predicted.iter().enumerate() {
        let u = DVector::from_column_slice(&c.layout.input(&z, k));
        x = case.dm.step(&x, &u, &case.w0);
        assert!((&x - p).amax() < 1e-12);
    }
}

#[test]
fn single_step_scalar_problem_has_closed_form() {
    let (a_d, b_d, x0, x_d) = (0.9, 0.5, 2.0, -1.0);
    let mut b = DMatrix::zeros(1, 8);
    b[(0, 1)] = b_d;
    let dm = DiscreteModel {
        a: DMatrix::from_element(1, 1, a_d),
        b,
        e: DMatrix::zeros(1, 8),
        d: DVector::zeros(1),
        c_phi: None,
        t_s: 0.1,
    };
    let mut mask = [false; 8];
    mask[1] = true;
    let cfg = MpcConfig {
        model_kind: ModelKind::Vhs,
        horizon: 1,
        sample_time: 0.1,
        state_weights: vec![1.0],
        input_weights: vec![1.0; 8],
        input_rate_weights: None,
        slack_weight: 1.0,
        solver: Default::default(),
    };
    let x0v = DVector::from_element(1, x0);
    let xdv = DVector::from_element(1, x_d);
    let c = build_cftoc(&dm, &x0v, &DVector::zeros(8), &xdv, &ConstraintSet::empty(1, 8), &cfg, &mask, &[0.0; 8])
        .unwrap();
    let sol = solve(&c.qp, &reference_solver_settings(), None).unwrap();
    let expected = (x_d - x0 * a_d) * b_d / (b_d * b_d + 1.0);
    assert!((c.layout.input(&sol.x, 0)[1] - expected).abs() < 1e-8);
}

fn run_vhs_steps(steps: usize) -> (Vec<[f64; 8]>, MpcController) {
    let cfg = presets::scenario("vhs_overtake_flat").unwrap();
    let mut ctrl =
        MpcController::new(cfg.mpc.clone(), cfg.vehicle.clone(), cfg.scenario.actuators, cfg.scenario.u(), 0.0)
            .unwrap();
    let mut x = DVector::zeros(5);
    let mut out = Vec::new();
    for k in 0..steps {
        let w0 = DriverCommand::front_steer(-0.01, [0.0; 4]);
        let res = ctrl.step(&x, &w0, &Reference { delta_d: -0.01, y_d: -3.0 }).unwrap();
        let u = res.u_apply.as_vector();
        out.push(std::array::from_fn(|i| u[i]));
        x = res.predicted_states[0].clone();
        x[1] += 0.01 * k as f64;
    }
    (out, ctrl)
}

#[test]
fn controller_is_deterministic_and_analyses_once() {
    let (a, ctrl) = run_vhs_steps(6);
    let (b, _) = run_vhs_steps(6);
    assert_eq!(a, b);
    assert_eq!(ctrl.symbolic_analyses(), 1);
}

#[test]
fn applied_delta_respects_input_bands() {
    let cfg = presets::scenario("general_ev_step_steer").unwrap();
    let vehicle = cfg.vehicle.clone();
    let actuators = ActuatorConfig::all();
    let mut mpc = cfg.mpc.clone();
    mpc.input_weights = vec![1e-6; 8];
    let u = cfg.scenario.u();
    let mut ctrl = MpcController::new(mpc, vehicle.clone(), actuators, u, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let mut x = DVector::from_fn(8, |_, _| rng.random_range(-0.1..0.1));
        for i in 4..8 {
            x[i] = u / vehicle.r_eff() + rng.random_range(-1.0..1.0);
        }
        let w0 = DriverCommand::front_steer(rng.random_range(-0.15..0.15), [300.0; 4]);
        let res = ctrl.step(&x, &w0, &Reference { delta_d: 0.3, y_d: 0.0 }).unwrap();
        let f_y0 = res.linearizations.map(|l| l.f_y_bar);
        let rows = input_rows(&vehicle, &w0, &res.normal_loads, &f_y0, &actuators).unwrap();
        let (lo, hi) = input_box(&rows);
        let applied = res.u_apply.as_vector();
        for j in 0..8 {
            assert!(applied[j] >= lo[j] && applied[j] <= hi[j], "channel {j}: {} not in [{}, {}]", applied[j], lo[j], hi[j]);
        }
    }
}

#[test]
fn no_action_at_target() {
    let cfg = presets::scenario("general_ev_step_steer").unwrap();
    let mut mpc = cfg.mpc.clone();
    mpc.solver = reference_solver_settings();
    let u = cfg.scenario.u();
    let mut ctrl = MpcController::new(mpc, cfg.vehicle.clone(), ActuatorConfig::torque_only(), u, 0.0).unwrap();
    let mut x = DVector::zeros(8);
    for i in 4..8 {
        x[i] = u / cfg.vehicle.r_eff();
    }
    let res = ctrl.step(&x, &DriverCommand::default(), &Reference { delta_d: 0.0, y_d: 0.0 }).unwrap();
    assert!(res.u_apply.max_abs() <= 1e-6, "{:?}", res.u_apply);
}

#[test]
fn masked_channels_stay_zero() {
    let (seq, _) = run_vhs_steps(3);
    for u in seq {
        // vhs layout: rear torque and front steering only
        for j in [0, 2, 5, 7] {
            assert_eq!(u[j], 0.0);
        }
    }
}
