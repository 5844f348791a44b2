//! `lateral-mpc`: run scenarios, benchmark the controller, inspect models.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime or solver failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use lateral_mpc::config::{self, presets, SimConfig};
use lateral_mpc::error::Error;
use lateral_mpc::matrix_io::write_dense;
use lateral_mpc::mpc::operating_point;
use lateral_mpc::sim::{metrics, run_scenario, write_metrics_csv, DriverMode, Metrics, SimTrace};
use lateral_mpc::vehicle::DriverCommand;
use nalgebra::{DMatrix, DVector};

#[derive(Parser)]
#[command(name = "lateral-mpc", version, about = "Linearized-tire MPC for lateral vehicle control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run closed-loop scenarios and write CSV traces plus metrics.csv.
    Simulate {
        #[command(flatten)]
        input: ConfigArgs,
        /// Output directory; created if missing.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Run scenarios on separate threads (output order is unchanged).
        #[arg(long)]
        parallel: bool,
    },
    /// Time warm-started controller steps.
    Benchmark {
        #[command(flatten)]
        input: ConfigArgs,
        /// Closed-loop steps timed per scenario.
        #[arg(long, default_value_t = 500)]
        reps: usize,
    },
    /// Print tire linearizations and dump A, B, E, D (and C_phi) at a state.
    Inspect {
        #[command(flatten)]
        input: ConfigArgs,
        /// Comma-separated state vector; defaults to the scenario's x0.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        state: Option<Vec<f64>>,
        /// Front steering angle of the driver command, rad.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        steering: f64,
        /// Road banking angle, rad; defaults to the scenario's value.
        #[arg(long, allow_negative_numbers = true)]
        phi_r: Option<f64>,
        /// Write the matrix dump here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Configuration utilities.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the fully expanded config for a scenario.
    Dump {
        #[command(flatten)]
        input: ConfigArgs,
    },
    /// List bundled presets.
    List,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Scenario file or bundled preset name; repeatable. Defaults depend on the command.
    #[arg(long)]
    scenario: Vec<String>,
    /// Vehicle parameter file replacing the scenario's vehicle.
    #[arg(long)]
    vehicle: Option<PathBuf>,
    /// Override a config value, e.g. `--set mpc.N=20`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Dimension(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read(path: &Path, what: &str) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Config(format!("cannot read {what} {}: {e}", path.display())))
}

impl ConfigArgs {
    fn load(&self, defaults: &[&str]) -> CliResult<Vec<SimConfig>> {
        let vehicle = self.vehicle.as_deref().map(|p| read(p, "vehicle file")).transpose()?;
        let names: Vec<String> = if self.scenario.is_empty() {
            defaults.iter().map(|s| s.to_string()).collect()
        } else {
            self.scenario.clone()
        };
        names
            .iter()
            .map(|name| {
                let path = Path::new(name);
                let text = if path.is_file() {
                    read(path, "scenario file")?
                } else if let Ok(t) = presets::scenario_text(name) {
                    t.to_string()
                } else {
                    return Err(Failure::Config(format!("`{name}` is neither a file nor a bundled scenario")));
                };
                Ok(config::load(&text, vehicle.as_deref(), &self.overrides)?)
            })
            .collect()
    }
}

fn run(cfg: &SimConfig) -> lateral_mpc::error::Result<(SimTrace, Metrics)> {
    let trace = run_scenario(&cfg.scenario, &cfg.vehicle, &cfg.mpc)?;
    let m = metrics(&trace, &cfg.scenario);
    Ok((trace, m))
}

fn simulate(input: &ConfigArgs, out: &Path, parallel: bool) -> CliResult<()> {
    let all: Vec<&str> = presets::SCENARIOS.iter().map(|(n, _)| *n).collect();
    let configs = input.load(&all)?;
    let results: Vec<_> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = configs.iter().map(|c| s.spawn(move || run(c))).collect();
            handles.into_iter().map(|h| h.join().expect("scenario thread panicked")).collect()
        })
    } else {
        configs.iter().map(run).collect()
    };
    let results = results.into_iter().collect::<lateral_mpc::error::Result<Vec<_>>>()?;

    // nothing is written until every run has succeeded
    let io = |e: std::io::Error| Failure::Runtime(format!("writing to {}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    let mut summary = Vec::new();
    for (trace, m) in results {
        let file = fs::File::create(out.join(format!("{}.csv", trace.scenario))).map_err(io)?;
        trace.write_csv(std::io::BufWriter::new(file))?;
        println!(
            "{:<28} steps {:>4}  max|alpha| {:.4}  max lat err {:.3} m  mean solve {:.2} ms  degraded {}",
            m.scenario, m.steps, m.max_abs_alpha, m.max_lateral_error, m.mean_solve_ms, m.degraded_steps
        );
        summary.push(m);
    }
    let file = fs::File::create(out.join("metrics.csv")).map_err(io)?;
    write_metrics_csv(&summary, std::io::BufWriter::new(file))?;
    Ok(())
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    let idx = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

fn benchmark(input: &ConfigArgs, reps: usize) -> CliResult<()> {
    if reps == 0 {
        return Err(Failure::Config("--reps must be positive".into()));
    }
    let configs = input.load(&["general_ev_step_steer", "vhs_overtake_flat"])?;
    println!("{:<28} {:>6} {:>10} {:>10} {:>10}", "scenario", "steps", "mean_ms", "p95_ms", "max_ms");
    for mut cfg in configs {
        cfg.scenario.steps = reps;
        let trace = run_scenario(&cfg.scenario, &cfg.vehicle, &cfg.mpc)?;
        let mut t: Vec<f64> = trace.rows.iter().map(|r| r.solve_ms).collect();
        t.sort_by(f64::total_cmp);
        let mean = t.iter().sum::<f64>() / t.len() as f64;
        println!(
            "{:<28} {:>6} {:>10.3} {:>10.3} {:>10.3}",
            cfg.scenario.name,
            t.len(),
            mean,
            percentile(&t, 0.95),
            t[t.len() - 1]
        );
    }
    Ok(())
}

fn inspect(
    input: &ConfigArgs,
    state: Option<&[f64]>,
    steering: f64,
    phi_r: Option<f64>,
    out: Option<&Path>,
) -> CliResult<()> {
    let configs = input.load(&["general_ev_step_steer"])?;
    let mut dump = String::new();
    for cfg in &configs {
        let s = &cfg.scenario;
        let x = DVector::from_column_slice(state.unwrap_or(&s.x0));
        let torque = match &s.driver {
            DriverMode::Command { torque, .. } => *torque,
            DriverMode::Checkpoints { .. } => [0.0; 4],
        };
        let w0 = DriverCommand::front_steer(steering, torque);
        let phi = phi_r.unwrap_or(s.phi_r);
        let op = operating_point(&cfg.vehicle, &x, &w0, &s.actuators, s.u(), phi)?;
        println!("# {} (u = {} m/s, phi_r = {phi})", s.name, s.u());
        println!("{:>5} {:>12} {:>12} {:>14} {:>14}", "wheel", "alpha", "F_z", "F_y_bar", "c_alpha_tilde");
        for i in 0..4 {
            let l = &op.linearizations[i];
            println!(
                "{:>5} {:>12.6} {:>12.3} {:>14.4} {:>14.4}",
                i + 1,
                op.slip_angles[i],
                op.normal_loads[i],
                l.f_y_bar,
                l.c_alpha_tilde
            );
        }
        let m = &op.model;
        write_dense(&mut dump, "A", &m.a);
        write_dense(&mut dump, "B", &m.b);
        write_dense(&mut dump, "E", &m.e);
        write_dense(&mut dump, "D", &DMatrix::from_column_slice(m.d.len(), 1, m.d.as_slice()));
        if let Some(c) = &m.c_phi {
            write_dense(&mut dump, "C_phi", &DMatrix::from_column_slice(c.len(), 1, c.as_slice()));
        }
    }
    match out {
        Some(path) => fs::write(path, dump)
            .map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?,
        None => print!("{dump}"),
    }
    Ok(())
}

fn config_dump(input: &ConfigArgs) -> CliResult<()> {
    let configs = input.load(&["general_ev_step_steer"])?;
    let mut text = String::new();
    for (i, cfg) in configs.iter().enumerate() {
        if i > 0 {
            let _ = writeln!(text, "\n# ----");
        }
        text.push_str(&cfg.to_toml()?);
    }
    print!("{text}");
    Ok(())
}

fn config_list() {
    println!("vehicles:");
    for (n, _) in presets::VEHICLES {
        println!("  {n}");
    }
    println!("scenarios:");
    for (n, _) in presets::SCENARIOS {
        println!("  {n}");
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    let result = match &cli.command {
        Command::Simulate { input, out, parallel } => simulate(input, out, *parallel),
        Command::Benchmark { input, reps } => benchmark(input, *reps),
        Command::Inspect { input, state, steering, phi_r, out } => {
            inspect(input, state.as_deref(), *steering, *phi_r, out.as_deref())
        }
        Command::Config { action: ConfigAction::Dump { input } } => config_dump(input),
        Command::Config { action: ConfigAction::List } => {
            config_list();
            Ok(())
        }
    };
    match result {
        Ok(()) => {
            if matches!(cli.command, Command::Simulate { .. }) {
                eprintln!("done in {:.2} s", started.elapsed().as_secs_f64());
            }
            ExitCode::SUCCESS
        }
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
