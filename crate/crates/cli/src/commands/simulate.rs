use serde_json::json;
use unravel::diffusive::{simulate_diffusive, DiffusiveConfig};
use unravel::ensemble::run_ensemble;
use unravel::jump::{simulate_mixed_jump, simulate_pure_jump};
use unravel::record::{write_clicks, TrajectoryRecord};
use unravel::rng::TrajRng;
use unravel::{Observable, Result, SystemParams};

use crate::config::{Config, SimUnraveling};
use crate::error::CliError;
use crate::output::{provenance, Outputs};

fn check(cfg: &Config) -> std::result::Result<(), CliError> {
    let p = &cfg.system;
    let sim = &cfg.simulate;
    p.validate().map_err(|e| CliError::in_section("system", e))?;
    if p.n_traj < 2 {
        return Err(CliError::Config("`system.n_traj`: an ensemble needs at least 2 trajectories".into()));
    }
    match sim.unraveling {
        SimUnraveling::Direct if !p.is_ideal() => {
            return Err(CliError::Config(
                "`simulate.unraveling`: direct needs system.efficiency = 1 and system.thermal = 0, use direct-imperfect".into(),
            ))
        }
        SimUnraveling::Homodyne => DiffusiveConfig::homodyne().validate(p).map_err(|e| CliError::in_section("system", e))?,
        SimUnraveling::Heterodyne => DiffusiveConfig::heterodyne().validate(p).map_err(|e| CliError::in_section("system", e))?,
        _ => {}
    }
    if sim.clicks && !sim.unraveling.has_clicks() {
        return Err(CliError::Config(format!("`simulate.clicks`: the {} unraveling has no clicks", sim.unraveling.name())));
    }
    if sim.retain > p.n_traj {
        return Err(CliError::Config("`simulate.retain`: exceeds system.n_traj".into()));
    }
    Ok(())
}

fn simulate_one(u: SimUnraveling, p: &SystemParams, rng: &mut TrajRng) -> Result<TrajectoryRecord> {
    match u {
        SimUnraveling::Direct => simulate_pure_jump(p, rng),
        SimUnraveling::DirectImperfect => simulate_mixed_jump(p, rng),
        SimUnraveling::Homodyne => simulate_diffusive(p, &DiffusiveConfig::homodyne(), rng),
        SimUnraveling::Heterodyne => simulate_diffusive(p, &DiffusiveConfig::heterodyne(), rng),
    }
}

pub fn run(cfg: &Config, out: &mut Outputs) -> std::result::Result<serde_json::Value, CliError> {
    check(cfg)?;
    let p = cfg.system;
    let u = cfg.simulate.unraveling;
    let grid = p.sample_grid();
    let summary = run_ensemble(p.n_traj, p.seed, grid, cfg.simulate.retain, |rng| simulate_one(u, &p, rng), |r| {
        r.clicks.as_ref().map_or(0, |c| c.len())
    })
    .map_err(|e| CliError::in_section("system", e))?;

    let header = format!("{}\nunraveling = {}", provenance("simulate", cfg), u.name());
    for obs in [Observable::SigmaX, Observable::SigmaY, Observable::SigmaZ] {
        let curve = summary.curve(obs);
        let name = format!("ensemble_{}.csv", obs.name());
        out.write(&name, curve.to_csv(&format!("{header}\nobservable = {}", obs.name())).as_bytes())?;
    }

    if !summary.retained.is_empty() {
        let mut s = String::new();
        for line in header.lines() {
            s.push_str(&format!("# {line}\n"));
        }
        s.push_str("traj,t,x,y,z,purity\n");
        for (k, rec) in summary.retained.iter().enumerate() {
            for (j, b) in rec.bloch.iter().enumerate() {
                s.push_str(&format!("{k},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n", grid.at(j), b.x, b.y, b.z, rec.purity[j]));
            }
        }
        out.write("trajectories.csv", s.as_bytes())?;
    }
    if cfg.simulate.clicks {
        for (k, rec) in summary.retained.iter().enumerate() {
            let mut buf = Vec::new();
            let times = rec.clicks.as_ref().map_or(&[][..], |c| &c.times[..]);
            write_clicks(&mut buf, times, p.seed, k as u64)?;
            out.write(&format!("clicks_{k:05}.txt"), &buf)?;
        }
    }
    let total_clicks: usize = summary.probes.iter().sum();
    Ok(json!({
        "unraveling": u.name(),
        "grid_points": grid.len,
        "retained": summary.retained.len(),
        "total_clicks": if u.has_clicks() { Some(total_clicks) } else { None },
    }))
}
