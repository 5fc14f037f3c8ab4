use serde_json::{json, Value};
use unravel::steering::{check_steering_params, run_steering};

use crate::config::Config;
use crate::error::CliError;
use crate::output::{provenance, Outputs};

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<Value, CliError> {
    let s = &cfg.steering;
    if s.efficiencies.is_empty() {
        return Err(CliError::Config("`steering.efficiencies`: empty list".into()));
    }
    let steady_from = s.steady_from.unwrap_or(0.5 * cfg.system.t_max);
    let mut runs = Vec::new();
    let mut params = Vec::new();
    for &eta in &s.efficiencies {
        let mut p = cfg.system;
        p.efficiency = eta;
        check_steering_params(&p).map_err(|e| CliError::in_section("steering", e))?;
        params.push(p);
    }
    for p in params {
        let curve = run_steering(&p).map_err(|e| CliError::in_section("system", e))?;
        let steady = curve.steady_envelope(steady_from).map_err(|_| {
            CliError::Config(format!("`steering.steady_from`: {steady_from} lies beyond system.t_max"))
        })?;
        let name = format!("steering_eta_{:.2}.csv", p.efficiency);
        let header = format!(
            "{}\ndirect arm efficiency = {}, heterodyne arm efficiency = 1\nenvelope: trailing maximum over pi/omega",
            provenance("steering", cfg),
            p.efficiency
        );
        out.write(&name, curve.to_csv(&header).as_bytes())?;
        eprintln!("eta = {:.2}: steady envelope of S = {steady:.4}", p.efficiency);
        runs.push(json!({ "efficiency": p.efficiency, "file": name, "steady_envelope": steady, "exceeds_unity": steady > 1.0 }));
    }
    Ok(json!({ "steady_from": steady_from, "runs": runs }))
}
