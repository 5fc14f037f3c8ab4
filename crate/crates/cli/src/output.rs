//! Output directory bookkeeping and the run manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Config;
use crate::error::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

pub struct Outputs {
    dir: PathBuf,
    files: Vec<OutputEntry>,
    started: Instant,
}

impl Outputs {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("{}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), files: Vec::new(), started: Instant::now() })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        self.files.push(OutputEntry { file: name.to_string(), sha256: hex::encode(Sha256::digest(contents)), bytes: contents.len() });
        Ok(())
    }

    /// Writes `manifest.json`. Everything except `wall_clock_seconds` is a
    /// function of the configuration alone.
    pub fn finish(self, command: &str, cfg: &Config, n_traj: usize, details: Value) -> Result<PathBuf, CliError> {
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": cfg.system.seed,
            "n_traj": n_traj,
            "config": cfg,
            "config_toml": cfg.to_toml(),
            "outputs": self.files,
            "details": details,
            "wall_clock_seconds": self.started.elapsed().as_secs_f64(),
        });
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        Ok(path)
    }
}

/// `#` header shared by every CSV of a run.
pub fn provenance(command: &str, cfg: &Config) -> String {
    let p = &cfg.system;
    format!(
        "unravel {} {command}\ntime unit: gamma t (1/gamma)\nseed = {}, n_traj = {}, Y = {:.6}, omega = {:.6}, detuning = {:.6}, efficiency = {:.6}, thermal = {:.6}\ndt = {:e}, sample_dt = {:e}, t_max = {}",
        env!("CARGO_PKG_VERSION"),
        p.seed,
        p.n_traj,
        p.drive_strength(),
        p.omega,
        p.detuning,
        p.efficiency,
        p.thermal,
        p.dt,
        p.sample_dt,
        p.t_max
    )
}

/// CSV from named columns of equal length.
pub fn csv(header: &str, names: &[&str], columns: &[&[f64]]) -> String {
    let mut out = String::new();
    for line in header.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out.push_str(&names.join(","));
    out.push('\n');
    let n = columns.first().map_or(0, |c| c.len());
    for k in 0..n {
        let row: Vec<String> = columns.iter().map(|c| format!("{:.12e}", c[k])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
