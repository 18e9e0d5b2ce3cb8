//! Run configuration: TOML with one table per concern, plus `key=value`
//! overrides on dotted keys.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ExampleOptions;
use crate::kernels::MinmodParams;
use crate::scheme::{InversePolicy, Order};
use crate::time::DEFAULT_CFL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// Example number, 1 to 6.
    pub example: Option<u32>,
    /// Both orders when absent.
    pub order: Option<Order>,
    pub out: PathBuf,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            example: None,
            order: None,
            out: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeSection {
    pub cfl: f64,
    pub theta: f64,
    pub policy: InversePolicy,
}

impl Default for SchemeSection {
    fn default() -> Self {
        Self {
            cfl: DEFAULT_CFL,
            theta: MinmodParams::DEFAULT_THETA,
            policy: InversePolicy::Strict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSection {
    pub dx: Option<f64>,
    pub reference_dx: Option<f64>,
    pub sweep_levels: usize,
}

impl Default for MeshSection {
    fn default() -> Self {
        Self {
            dx: None,
            reference_dx: None,
            sweep_levels: ExampleOptions::default().sweep_levels,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeSection {
    pub t_final: Option<f64>,
    pub wb_time: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhysicsSection {
    pub gravity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpinUpSection {
    pub time: f64,
    pub tolerance: f64,
    pub stall_time: f64,
    /// Relative paths are taken inside `run.out`.
    pub snapshot_dir: Option<PathBuf>,
}

impl Default for SpinUpSection {
    fn default() -> Self {
        let d = ExampleOptions::default();
        Self {
            time: d.spinup_time,
            tolerance: d.spinup_tolerance,
            stall_time: d.spinup_stall_time,
            snapshot_dir: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run: RunSection,
    pub scheme: SchemeSection,
    pub mesh: MeshSection,
    pub time: TimeSection,
    pub physics: PhysicsSection,
    pub spinup: SpinUpSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_table(parse_table(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config { key, message } => Error::Config {
                key: format!("{}: {key}", path.display()),
                message,
            },
            other => other,
        })
    }

    /// Parses `text` after applying `overrides` of the form
    /// `section.key=value`; values are TOML literals, and anything that
    /// does not parse as one is taken as a string.
    pub fn with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table = parse_table(text)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: RunConfig =
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| {
                    Error::config("config", e.message().trim().to_string())
                })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.run.example {
            if !(1..=6).contains(&n) {
                return Err(Error::config(
                    "run.example",
                    format!("must be 1 to 6, got {n}"),
                ));
            }
        }
        self.options().validate().map_err(|e| match e {
            Error::Config { key, message } => Error::Config {
                key: section_of(&key),
                message,
            },
            other => other,
        })
    }

    pub fn options(&self) -> ExampleOptions {
        ExampleOptions {
            cfl: self.scheme.cfl,
            theta: self.scheme.theta,
            dx: self.mesh.dx,
            reference_dx: self.mesh.reference_dx,
            t_final: self.time.t_final,
            wb_time: self.time.wb_time,
            sweep_levels: self.mesh.sweep_levels,
            gravity: self.physics.gravity,
            spinup_time: self.spinup.time,
            spinup_tolerance: self.spinup.tolerance,
            spinup_stall_time: self.spinup.stall_time,
            policy: self.scheme.policy,
            snapshot_dir: self
                .spinup
                .snapshot_dir
                .as_ref()
                .map(|d| self.run.out.join(d)),
        }
    }
}

fn section_of(option: &str) -> String {
    let section = match option {
        "cfl" | "theta" | "policy" => "scheme",
        "dx" | "reference_dx" | "sweep_levels" => "mesh",
        "t_final" | "wb_time" => "time",
        "gravity" => "physics",
        "spinup_time" | "spinup_tolerance" | "spinup_stall_time" => {
            return format!("spinup.{}", option.trim_start_matches("spinup_"));
        }
        _ => return option.to_string(),
    };
    format!("{section}.{option}")
}

fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse::<toml::Table>().map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start.min(text.len())].matches('\n').count() + 1;
                format!("line {line}")
            })
            .unwrap_or_else(|| "config".into());
        Error::config(at, e.message().trim().to_string())
    })
}

fn apply_override(table: &mut toml::Table, item: &str) -> Result<()> {
    let (key, raw) = item
        .split_once('=')
        .ok_or_else(|| Error::config(item, "override must look like section.key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let path: Vec<&str> = key.split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::config(key, "empty key segment"));
    }
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let (last, parents) = path
        .split_last()
        .ok_or_else(|| Error::config(key, "empty key"))?;
    let mut t = table;
    for p in parents {
        t = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| Error::config(key, format!("{p} is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}
