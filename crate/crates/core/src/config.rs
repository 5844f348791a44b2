//! TOML configuration: vehicle parameters, controller settings and scenarios.
//!
//! A run is described by three tables:
//!
//! ```toml
//! [vehicle]          # kind = "general_ev" | "vhs", parameters by symbol
//! [vehicle.tire]     # model, C_alpha, C_sigma, mu_x, mu_y
//! [mpc]              # model_kind, N, T_s, Q, R, sigma, optional R_rate
//! [mpc.solver]       # rho, sigma_reg, alpha_relax, eps_abs, eps_rel, max_iter, ...
//! [scenario]         # name, M, u_kph, x0, phi_r, prediction_error_gain, seed, substeps
//! [scenario.driver]  # mode = "command" | "checkpoints"
//! [scenario.actuators]
//! ```
//!
//! A scenario file may name a bundled vehicle with a top-level
//! `vehicle_preset = "..."` instead of carrying a `[vehicle]` table.

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::mpc::MpcConfig;
use crate::sim::Scenario;
use crate::vehicle::Vehicle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub vehicle: Vehicle,
    pub mpc: MpcConfig,
    pub scenario: Scenario,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.vehicle.validate()?;
        if self.mpc.model_kind != self.vehicle.kind() {
            return Err(Error::Config(format!(
                "[mpc] model_kind is {:?} but the vehicle is {:?}",
                self.mpc.model_kind,
                self.vehicle.kind()
            )));
        }
        self.mpc.validate(&self.scenario.actuators)?;
        self.scenario.validate(self.vehicle.kind())
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("serializing config: {e}")))
    }

    /// Parses a complete config (all three tables present).
    pub fn from_toml(text: &str) -> Result<Self> {
        load(text, None, &[])
    }
}

fn parse_table(text: &str, what: &str) -> Result<Table> {
    text.parse::<Table>().map_err(|e| Error::Config(format!("{what}: {e}")))
}

/// Parses a vehicle file (a `[vehicle]` table).
pub fn parse_vehicle(text: &str) -> Result<Vehicle> {
    let mut t = parse_table(text, "vehicle file")?;
    let v = t.remove("vehicle").ok_or_else(|| Error::Config("vehicle file has no [vehicle] table".into()))?;
    let vehicle: Vehicle = v.try_into().map_err(|e| Error::Config(format!("[vehicle]: {e}")))?;
    vehicle.validate()?;
    Ok(vehicle)
}

fn parse_override(item: &str) -> Result<(Vec<String>, Value)> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{item}` is not key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{item}` has an empty key")));
    }
    let raw = raw.trim();
    let value = match parse_table(&format!("v = {raw}"), "override") {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(raw.to_string()),
    };
    Ok((key.split('.').map(str::to_string).collect(), value))
}

fn set_path(table: &mut Table, path: &[String], value: Value, full: &str) -> Result<()> {
    let unknown = || Error::Config(format!("override refers to unknown key `{full}`"));
    let (last, parents) = path.split_last().ok_or_else(unknown)?;
    let mut cur = table;
    for p in parents {
        cur = cur.get_mut(p).and_then(Value::as_table_mut).ok_or_else(unknown)?;
    }
    let slot = cur.get_mut(last).ok_or_else(unknown)?;
    // integers are accepted where floats are expected
    *slot = match (&*slot, value) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (_, v) => v,
    };
    Ok(())
}

/// Builds a config from a scenario file, an optional vehicle file and
/// `key.path=value` overrides. Overrides may only touch keys that exist in the
/// fully expanded config (defaults included).
pub fn load(scenario_text: &str, vehicle_text: Option<&str>, overrides: &[String]) -> Result<SimConfig> {
    let mut table = parse_table(scenario_text, "scenario file")?;
    let preset = table.remove("vehicle_preset");
    if let Some(text) = vehicle_text {
        let vehicle = parse_vehicle(text)?;
        table.insert("vehicle".into(), Value::try_from(vehicle).map_err(|e| Error::Config(e.to_string()))?);
    } else if !table.contains_key("vehicle") {
        let name = preset
            .as_ref()
            .and_then(Value::as_str)
            .ok_or_else(|| Error::Config("no [vehicle] table, vehicle file or vehicle_preset given".into()))?;
        let vehicle = presets::vehicle(name)?;
        table.insert("vehicle".into(), Value::try_from(vehicle).map_err(|e| Error::Config(e.to_string()))?);
    }
    let parsed: SimConfig =
        Value::Table(table).try_into().map_err(|e| Error::Config(format!("config: {e}")))?;
    if overrides.is_empty() {
        parsed.validate()?;
        return Ok(parsed);
    }
    let mut canonical =
        Table::try_from(&parsed).map_err(|e| Error::Config(format!("expanding config: {e}")))?;
    for item in overrides {
        let (path, value) = parse_override(item)?;
        set_path(&mut canonical, &path, value, item.split('=').next().unwrap_or(item).trim())?;
    }
    let cfg: SimConfig =
        Value::Table(canonical).try_into().map_err(|e| Error::Config(format!("after overrides: {e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Bundled parameter sets and scenarios.
pub mod presets {
    use super::{load, parse_vehicle, SimConfig};
    use crate::error::{Error, Result};
    use crate::vehicle::{GeneralEvParams, Vehicle, VhsParams};

    pub const VEHICLES: &[(&str, &str)] = &[
        ("general_ev", include_str!("../presets/general_ev.toml")),
        ("dallara_av21", include_str!("../presets/dallara_av21.toml")),
    ];

    pub const SCENARIOS: &[(&str, &str)] = &[
        ("general_ev_step_steer", include_str!("../presets/general_ev_step_steer.toml")),
        ("vhs_overtake_flat", include_str!("../presets/vhs_overtake_flat.toml")),
        ("vhs_overtake_banked", include_str!("../presets/vhs_overtake_banked.toml")),
        ("vhs_overtake_model_err", include_str!("../presets/vhs_overtake_model_err.toml")),
    ];

    fn lookup<'a>(list: &[(&str, &'a str)], name: &str, what: &str) -> Result<&'a str> {
        list.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
            let names: Vec<_> = list.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown {what} preset `{name}` (available: {})", names.join(", ")))
        })
    }

    pub fn vehicle(name: &str) -> Result<Vehicle> {
        parse_vehicle(lookup(VEHICLES, name, "vehicle")?)
    }

    pub fn scenario_text(name: &str) -> Result<&'static str> {
        lookup(SCENARIOS, name, "scenario")
    }

    pub fn scenario(name: &str) -> Result<SimConfig> {
        load(scenario_text(name)?, None, &[])
    }

    pub fn general_ev_params() -> GeneralEvParams {
        match vehicle("general_ev").expect("bundled preset parses") {
            Vehicle::GeneralEv(p) => p,
            Vehicle::Vhs(_) => unreachable!("general_ev preset is a general EV"),
        }
    }

    pub fn dallara_params() -> VhsParams {
        match vehicle("dallara_av21").expect("bundled preset parses") {
            Vehicle::Vhs(p) => p,
            Vehicle::GeneralEv(_) => unreachable!("dallara_av21 preset is a race car"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses() {
        for (name, _) in presets::SCENARIOS {
            let cfg = presets::scenario(name).unwrap();
            assert_eq!(cfg.scenario.name, *name);
        }
        assert!(presets::vehicle("nope").is_err());
    }

    #[test]
    fn round_trip() {
        for (name, _) in presets::SCENARIOS {
            let cfg = presets::scenario(name).unwrap();
            let text = cfg.to_toml().unwrap();
            assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg, "{name}\n{text}");
        }
    }

    #[test]
    fn overrides_apply_and_reject_unknown_keys() {
        let text = presets::scenario_text("vhs_overtake_flat").unwrap();
        let cfg = load(text, None, &["scenario.M=10".into(), "mpc.N=20".into(), "vehicle.K_s=12000".into()]).unwrap();
        assert_eq!(cfg.scenario.steps, 10);
        assert_eq!(cfg.mpc.horizon, 20);
        match cfg.vehicle {
            Vehicle::Vhs(p) => assert_eq!(p.k_s, 12000.0),
            _ => panic!("wrong kind"),
        }
        assert!(load(text, None, &["scenario.bogus=1".into()]).is_err());
        assert!(load(text, None, &["no_equals".into()]).is_err());
        assert!(load(text, None, &["mpc.N=0".into()]).is_err());
    }

    #[test]
    fn table_values() {
        let p = presets::dallara_params();
        assert!((p.m * p.l_r / (p.l_f + p.l_r) - 355.45).abs() < 0.05);
        let g = presets::general_ev_params();
        assert!((g.h_r() - 0.15).abs() < 1e-12);
    }
}
