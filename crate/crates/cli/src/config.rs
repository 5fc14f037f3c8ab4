//! Run configuration: one TOML file with a `[system]` table and one table per
//! subcommand. Every key can be overridden with `--set section.key=value`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use unravel::moments::{Unraveling, DEFAULT_ORDER};
use unravel::photocount::synthetic::SyntheticConfig;
use unravel::photocount::G2Params;
use unravel::{Observable, SystemParams};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Dimensionless drive `Y = 2√2·Ω/γ`; when set it replaces `system.omega`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drive_strength: Option<f64>,
    pub system: SystemParams,
    pub simulate: SimulateConfig,
    pub oracle: OracleConfig,
    pub steering: SteeringConfig,
    pub g2: G2Config,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SimUnraveling {
    /// Pure-state quantum jumps; needs unit efficiency and a vacuum bath.
    #[default]
    Direct,
    /// Mixed-state jumps with finite efficiency and thermal occupation.
    DirectImperfect,
    Homodyne,
    Heterodyne,
}

impl SimUnraveling {
    pub fn name(self) -> &'static str {
        match self {
            SimUnraveling::Direct => "direct",
            SimUnraveling::DirectImperfect => "direct-imperfect",
            SimUnraveling::Homodyne => "homodyne",
            SimUnraveling::Heterodyne => "heterodyne",
        }
    }

    pub fn has_clicks(self) -> bool {
        matches!(self, SimUnraveling::Direct | SimUnraveling::DirectImperfect)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub unraveling: SimUnraveling,
    /// Number of leading trajectories written out in full.
    pub retain: usize,
    /// Also write one click file per retained trajectory.
    pub clicks: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub observable: Observable,
    pub master_equation: bool,
    pub renewal: bool,
    /// Strong-drive asymptote of the `σz` QTAV, written when `Y ≥ 5`.
    pub asymptote: bool,
    pub moments: bool,
    pub unraveling: Unraveling,
    pub order: usize,
    pub spectrum: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            observable: Observable::SigmaZ,
            master_equation: true,
            renewal: true,
            asymptote: true,
            moments: true,
            unraveling: Unraveling::Poisson,
            order: DEFAULT_ORDER,
            spectrum: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringConfig {
    /// Direct-detection efficiencies, one output file each.
    pub efficiencies: Vec<f64>,
    /// Start of the window averaged for the steady envelope; half of
    /// `t_max` when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steady_from: Option<f64>,
}

impl Default for SteeringConfig {
    fn default() -> Self {
        SteeringConfig { efficiencies: vec![1.0, 0.8, 0.6], steady_from: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum G2Source {
    #[default]
    Synthetic,
    Files,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GuessConfig {
    pub omega: f64,
    pub detuning: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub snr_det: f64,
}

impl Default for GuessConfig {
    fn default() -> Self {
        GuessConfig { omega: 3.0, detuning: -3.0, a: 1.0, b: 0.0, c: 0.0, snr_det: 10.0 }
    }
}

impl From<GuessConfig> for G2Params {
    fn from(g: GuessConfig) -> Self {
        G2Params { omega: g.omega, detuning: g.detuning, a: g.a, b: g.b, c: g.c, snr_det: g.snr_det }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2Config {
    pub source: G2Source,
    /// Timestamp files, one per line. Without `file_b` the auto-correlation
    /// of `file_a` is used.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file_a: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file_b: Option<PathBuf>,
    /// TOML sidecars with detector metadata (unit, gamma, t_int, rates).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta_a: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub meta_b: Option<PathBuf>,
    pub synthetic: SyntheticConfig,
    /// Write the synthetic click streams next to the other outputs.
    pub write_streams: bool,
    pub bin_width: f64,
    pub tau_max: f64,
    /// Bins with `τ` above this are excluded from the fit.
    pub fit_tau_max: f64,
    pub guess: GuessConfig,
    /// Names of the fitted parameters; the rest keep their guessed values.
    pub free: Vec<String>,
    pub max_restarts: usize,
}

impl Default for G2Config {
    fn default() -> Self {
        G2Config {
            source: G2Source::Synthetic,
            file_a: None,
            file_b: None,
            meta_a: None,
            meta_b: None,
            synthetic: SyntheticConfig::default(),
            write_streams: true,
            bin_width: 0.05,
            tau_max: 50.0,
            fit_tau_max: 10.0,
            guess: GuessConfig::default(),
            free: ["omega", "detuning", "a", "snr_det"].map(String::from).to_vec(),
            max_restarts: 30,
        }
    }
}

/// Reads the file at `path`. A `manifest.json` written by an earlier run is
/// accepted too, in which case its embedded configuration is used.
pub fn read_table(path: &Path) -> Result<toml::Table, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let text = if path.extension().is_some_and(|e| e == "json") {
        let v: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        v.get("config_toml")
            .and_then(|c| c.as_str())
            .ok_or_else(|| CliError::Config(format!("{}: no `config_toml` entry", path.display())))?
            .to_string()
    } else {
        text
    };
    text.parse::<toml::Table>().map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Applies `section.key=value`; the value is read as a TOML literal and
/// falls back to a bare string.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("--set `{assignment}`: expected section.key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("--set `{assignment}`: empty key")));
    }
    let mut node = table;
    for k in &keys[..keys.len() - 1] {
        let entry = node.entry(k.to_string()).or_insert_with(|| toml::Value::Table(Default::default()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("--set `{assignment}`: `{k}` is not a table")))?;
    }
    node.insert(keys[keys.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

pub fn from_table(table: toml::Table) -> Result<Config, CliError> {
    let mut cfg: Config = serde_path_to_error::deserialize(toml::Value::Table(table))
        .map_err(|e| CliError::Config(format!("`{}`: {}", e.path(), e.inner())))?;
    if let Some(y) = cfg.drive_strength {
        if !(y.is_finite() && y >= 0.0) {
            return Err(CliError::Config("`drive_strength`: must be finite and non-negative".into()));
        }
        cfg.system.set_drive_strength(y);
    }
    Ok(cfg)
}

/// File, then `--set` assignments, then `--seed`.
pub fn load(path: Option<&Path>, sets: &[String], seed: Option<u64>) -> Result<Config, CliError> {
    let mut table = match path {
        Some(p) => read_table(p)?,
        None => toml::Table::new(),
    };
    for s in sets {
        apply_override(&mut table, s)?;
    }
    let mut cfg = from_table(table)?;
    if let Some(s) = seed {
        cfg.system.seed = s;
    }
    Ok(cfg)
}

impl Config {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_round_trip() {
        let mut t: toml::Table = "[system]\nn_traj = 50\n".parse().unwrap();
        apply_override(&mut t, "system.seed=7").unwrap();
        apply_override(&mut t, "simulate.unraveling=heterodyne").unwrap();
        apply_override(&mut t, "drive_strength=30").unwrap();
        let cfg = from_table(t).unwrap();
        assert_eq!(cfg.system.n_traj, 50);
        assert_eq!(cfg.system.seed, 7);
        assert_eq!(cfg.simulate.unraveling, SimUnraveling::Heterodyne);
        assert!((cfg.system.drive_strength() - 30.0).abs() < 1e-12);
        let back = from_table(cfg.to_toml().parse().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn errors_name_the_key() {
        let t: toml::Table = "[system]\nomgea = 1.0\n".parse().unwrap();
        let msg = from_table(t).unwrap_err().to_string();
        assert!(msg.contains("omgea"), "{msg}");
        let t: toml::Table = "[oracle]\norder = \"ten\"\n".parse().unwrap();
        let msg = from_table(t).unwrap_err().to_string();
        assert!(msg.contains("oracle.order"), "{msg}");
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "system.seed").is_err());
    }
}
