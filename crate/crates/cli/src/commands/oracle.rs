use serde_json::{json, Value};
use unravel::dyson::{asymptotic_var_strong, max_renewal_step, renewal_qtav, strong_drive_warning};
use unravel::me::{bloch_generator, propagate_me};
use unravel::moments::{build_system, degree_one_deviation, integrate, observable_vector, qtav_from_moments, spectrum};
use unravel::{MixedState, Observable, TimeGrid};

use crate::config::Config;
use crate::error::CliError;
use crate::output::{csv, provenance, Outputs};

/// Tolerance of the logged degree-1 check.
const DEGREE_ONE_TOL: f64 = 1e-12;

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<Value, CliError> {
    let p = cfg.system;
    let o = &cfg.oracle;
    p.validate().map_err(|e| CliError::in_section("system", e))?;
    if (o.renewal || o.moments) && !p.is_ideal() {
        return Err(CliError::Config(
            "`system.efficiency`: the renewal and moment oracles need efficiency = 1 and thermal = 0".into(),
        ));
    }
    let grid = p.sample_grid();
    let t = grid.times();
    let obs = o.observable;
    let header = format!("{}\nobservable = {}", provenance("oracle", cfg), obs.name());
    let mut details = json!({ "observable": obs.name(), "grid_points": grid.len });

    if o.master_equation {
        let states = propagate_me(&p, &MixedState::ground(), &t).map_err(|e| CliError::in_section("system", e))?;
        let mean: Vec<f64> = states.iter().map(|r| obs.from_bloch(&r.bloch())).collect();
        out.write("me.csv", csv(&format!("{header}\nmaster-equation mean"), &["t", "mean"], &[&t, &mean]).as_bytes())?;
    }

    if o.renewal {
        let stride = (p.sample_dt / max_renewal_step(&p) - 1e-9).ceil().max(1.0) as usize;
        let fine = TimeGrid::new(grid.step / stride as f64, (grid.len - 1) * stride + 1);
        let r = renewal_qtav(&p, obs, fine).map_err(|e| CliError::in_section("system", e))?.subsample(stride);
        out.write(
            "renewal.csv",
            csv(
                &format!("{header}\nrenewal-equation route, solver step {:e}", fine.step),
                &["t", "mean", "second", "qtav"],
                &[&t, &r.mean, &r.second, &r.qtav],
            )
            .as_bytes(),
        )?;
        details["renewal_step"] = json!(fine.step);
    }

    if o.asymptote && obs == Observable::SigmaZ && p.drive_strength() >= 5.0 && p.detuning == 0.0 {
        if let Some(w) = strong_drive_warning(&p) {
            eprintln!("warning: {w}");
        }
        let v: Vec<f64> = t
            .iter()
            .map(|&s| asymptotic_var_strong(&p, s))
            .collect::<unravel::Result<_>>()
            .map_err(|e| CliError::in_section("system", e))?;
        out.write("asymptote.csv", csv(&format!("{header}\nstrong-drive asymptote"), &["t", "qtav"], &[&t, &v]).as_bytes())?;
    }

    if o.moments {
        let sys = build_system(&p, o.unraveling, o.order).map_err(|e| CliError::in_section("oracle", e))?;
        let dev = degree_one_deviation(&sys, &bloch_generator(&p));
        let passed = dev <= DEGREE_ONE_TOL;
        eprintln!(
            "check: degree-1 block vs Bloch generator, max deviation {dev:.3e} ({})",
            if passed { "pass" } else { "FAIL" }
        );
        details["moments"] = json!({
            "unraveling": o.unraveling.to_string(),
            "order": sys.order,
            "dimension": sys.dim(),
            "dropped_terms": sys.dropped_terms,
            "max_division_remainder": sys.max_remainder,
            "degree_one_deviation": dev,
            "degree_one_check": passed,
        });
        if !passed {
            return Err(CliError::Numerical(format!("degree-1 block deviates from the Bloch generator by {dev:e}")));
        }
        let a = observable_vector(obs).map_err(|e| CliError::in_section("oracle", e))?;
        let traj = integrate(&sys, grid).map_err(|e| CliError::in_section("oracle", e))?;
        if traj.truncation_suspect {
            eprintln!("warning: moments outgrow the Bloch-ball bound, raise oracle.order");
        }
        details["moments"]["truncation_suspect"] = json!(traj.truncation_suspect);
        let c = qtav_from_moments(&sys, &traj, &a);
        out.write(
            "moments_qtav.csv",
            csv(
                &format!("{header}\nmoment hierarchy, unraveling = {}, order K = {}", o.unraveling, o.order),
                &["t", "mean", "qtav"],
                &[&t, &c.mean, &c.qtav],
            )
            .as_bytes(),
        )?;
        if o.spectrum {
            let ev = spectrum(&sys).map_err(|e| CliError::in_section("oracle", e))?;
            let re: Vec<f64> = ev.iter().map(|z| z.re).collect();
            let im: Vec<f64> = ev.iter().map(|z| z.im).collect();
            out.write(
                "spectrum.csv",
                csv(&format!("{header}\ngenerator eigenvalues in units of gamma, order K = {}", o.order), &["re", "im"], &[&re, &im])
                    .as_bytes(),
            )?;
        }
    }
    Ok(details)
}
