use lateral_mpc::config::presets;
use lateral_mpc::mpc::{discretize, operating_point};
use lateral_mpc::sim::{integrate, run_scenario, PlantState, TireMode};
use lateral_mpc::vehicle::{normal_loads, ActuatorConfig, ControlDelta, DriverCommand, Vehicle};
use nalgebra::DVector;

fn general() -> Vehicle {
    Vehicle::GeneralEv(presets::general_ev_params())
}

fn dallara() -> Vehicle {
    Vehicle::Vhs(presets::dallara_params())
}

fn coast(vehicle: &Vehicle, x0: DVector<f64>, phi_r: f64, u: f64, seconds: f64) -> PlantState {
    let mut s = PlantState::new(x0);
    let steps = (seconds / 0.05).round() as usize;
    for _ in 0..steps {
        s = integrate(
            vehicle,
            &s,
            &DriverCommand::default(),
            &ControlDelta::default(),
            u,
            phi_r,
            &TireMode::Nonlinear,
            0.05,
            10,
        )
        .unwrap();
    }
    s
}

#[test]
fn straight_running_is_an_equilibrium() {
    let s = coast(&dallara(), DVector::zeros(5), 0.0, 50.0, 2.0);
    assert!(s.x.amax() == 0.0);
    assert!((s.x_world - 100.0).abs() < 1e-9);
    let mut x0 = DVector::zeros(8);
    for i in 4..8 {
        x0[i] = 56.0;
    }
    let s = coast(&general(), x0.clone(), 0.0, 22.22, 2.0);
    assert_eq!(s.x, x0);
}

#[test]
fn roll_decays_without_inputs() {
    // the race car oversteers: above about 25 m/s its yaw mode is open-loop unstable
    for (vehicle, n, u) in [(general(), 8, 22.22), (dallara(), 5, 20.0)] {
        let roll = vehicle.kind().roll_index();
        let mut x0 = DVector::zeros(n);
        x0[roll] = 0.02;
        let s = coast(&vehicle, x0, 0.0, u, 10.0);
        assert!(s.x[roll].abs() < 1e-4 && s.x[roll + 1].abs() < 1e-3, "{:?}: {}", vehicle.kind(), s.x);
    }
}

#[test]
fn race_car_roll_pair_is_damped_at_speed() {
    let v = dallara();
    let a = operating_point(&v, &DVector::zeros(5), &DriverCommand::default(), &ActuatorConfig::vhs(), 50.0, 0.0)
        .unwrap()
        .model
        .a;
    let eig = a.complex_eigenvalues();
    let oscillatory: Vec<_> = eig.iter().filter(|c| c.im.abs() > 1e-6).collect();
    assert_eq!(oscillatory.len(), 2);
    assert!(oscillatory.iter().all(|c| c.re < 0.0));
}

#[test]
fn banking_pushes_towards_the_low_side() {
    let v = dallara();
    let phi_r = 0.4;
    let s = coast(&v, DVector::zeros(5), phi_r, 50.0, 0.5);
    // left is the low side: v_y and y grow positive, left wheels carry more
    assert!(s.x[1] > 0.0 && s.x[0] > 0.0, "{}", s.x);
    let loads = normal_loads(&v, &s.x, phi_r);
    assert!(loads[0] + loads[2] > loads[1] + loads[3]);
}

fn one_step(substeps: usize) -> DVector<f64> {
    let v = dallara();
    let mut x0 = DVector::zeros(5);
    x0[1] = 0.3;
    x0[2] = 0.05;
    let w0 = DriverCommand::front_steer(0.02, [0.0; 4]);
    integrate(&v, &PlantState::new(x0), &w0, &ControlDelta::default(), 50.0, 0.1, &TireMode::Nonlinear, 0.2, substeps)
        .unwrap()
        .x
}

#[test]
fn runge_kutta_is_fourth_order() {
    let reference = one_step(2000);
    let coarse = (one_step(4) - &reference).amax();
    let fine = (one_step(8) - &reference).amax();
    let ratio = coarse / fine;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio} ({coarse:e} / {fine:e})");
}

#[test]
fn linear_tire_plant_matches_prediction() {
    for (vehicle, phi_r) in [(general(), 0.0), (dallara(), 0.3)] {
        let n = vehicle.kind().n_states();
        let mut x = DVector::from_element(n, 0.01);
        if n == 8 {
            for i in 4..8 {
                x[i] = 56.0;
            }
        }
        let w0 = DriverCommand::front_steer(0.03, [0.0, 0.0, 80.0, 80.0]);
        // torque-only deltas: the plant rotates forces by the applied steering, the model by the driver's
        let du = ControlDelta { torque: [10.0, -10.0, 40.0, -40.0], steering: [0.0; 4] };
        let u = 40.0;
        let op = operating_point(&vehicle, &x, &w0, &ActuatorConfig::all(), u, phi_r).unwrap();
        let dm = discretize(&op.model, 0.05).unwrap();
        let predicted = dm.step(&x, &du.as_vector(), &w0.as_vector());
        let plant = integrate(
            &vehicle,
            &PlantState::new(x.clone()),
            &w0,
            &du,
            u,
            phi_r,
            &TireMode::Linear(op.linearizations),
            0.05,
            1000,
        )
        .unwrap();
        let gap = (plant.x - predicted).amax();
        assert!(gap <= 1e-6, "{:?}: gap {gap}", vehicle.kind());
    }
}

#[test]
fn same_scenario_gives_identical_trace() {
    let mut cfg = presets::scenario("vhs_overtake_banked").unwrap();
    cfg.scenario.steps = 15;
    let a = run_scenario(&cfg.scenario, &cfg.vehicle, &cfg.mpc).unwrap();
    let b = run_scenario(&cfg.scenario, &cfg.vehicle, &cfg.mpc).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&ra.state), bits(&rb.state));
        assert_eq!(ra.applied, rb.applied);
        assert_eq!(ra.slack.to_bits(), rb.slack.to_bits());
    }
}

#[test]
fn every_preset_runs() {
    for (name, _) in presets::SCENARIOS {
        let mut cfg = presets::scenario(name).unwrap();
        cfg.scenario.steps = 5;
        let trace = run_scenario(&cfg.scenario, &cfg.vehicle, &cfg.mpc).unwrap();
        assert_eq!(trace.rows.len(), 5);
        let mut csv = Vec::new();
        trace.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 6);
        assert!(text.starts_with("time,"));
    }
}
