use std::io::BufReader;
use std::path::Path;

use serde_json::{json, Value};
use unravel::photocount::synthetic::synthesize;
use unravel::photocount::{estimate_g2, estimate_g2_auto, fit_g2, FitOptions, G2Params, SeriesMeta, TimestampSeries, SNR_WINDOW};
use unravel::record::{read_timestamps, write_clicks};

use crate::config::{Config, G2Source};
use crate::error::CliError;
use crate::output::{provenance, Outputs};

fn load_series(file: &Path, meta: Option<&Path>) -> Result<TimestampSeries, CliError> {
    let f = std::fs::File::open(file).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    let times = read_timestamps(BufReader::new(f)).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    let meta = match meta {
        Some(m) => {
            let text = std::fs::read_to_string(m).map_err(|e| CliError::Input(format!("{}: {e}", m.display())))?;
            toml::from_str::<SeriesMeta>(&text).map_err(|e| CliError::Config(format!("{}: {e}", m.display())))?
        }
        None => SeriesMeta {
            detector: file.file_stem().map_or("A".into(), |s| s.to_string_lossy().into_owned()),
            unit: Default::default(),
            gamma: None,
            t_int: None,
            signal_rate: None,
            dark_rate: None,
        },
    };
    let s = TimestampSeries::from_meta(times, &meta).map_err(|e| CliError::Input(format!("{}: {e}", file.display())))?;
    s.to_gamma_t().map_err(|e| CliError::in_section("g2", e))
}

fn free_mask(names: &[String]) -> Result<[bool; 6], CliError> {
    let mut free = [false; 6];
    for n in names {
        let i = G2Params::NAMES
            .iter()
            .position(|k| k == n)
            .ok_or_else(|| CliError::Config(format!("`g2.free`: unknown parameter `{n}`, expected one of {:?}", G2Params::NAMES)))?;
        free[i] = true;
    }
    Ok(free)
}

pub fn run(cfg: &Config, out: &mut Outputs) -> Result<Value, CliError> {
    let g = &cfg.g2;
    let free = free_mask(&g.free)?;
    if !(g.bin_width > 0.0 && g.tau_max > g.bin_width) {
        return Err(CliError::Config("`g2.bin_width`: need 0 < bin_width < tau_max".into()));
    }
    let seed = cfg.system.seed;
    let (a, b) = match g.source {
        G2Source::Synthetic => {
            let (a, b) = synthesize(&g.synthetic, seed).map_err(|e| CliError::in_section("g2.synthetic", e))?;
            if g.write_streams {
                for (k, s) in [&a, &b].into_iter().enumerate() {
                    let mut buf = Vec::new();
                    write_clicks(&mut buf, &s.times, seed, k as u64)?;
                    out.write(&format!("clicks_{}.txt", s.detector), &buf)?;
                }
            }
            (a, Some(b))
        }
        G2Source::Files => {
            let fa = g.file_a.as_deref().ok_or_else(|| CliError::Config("`g2.file_a`: required for source = files".into()))?;
            let a = load_series(fa, g.meta_a.as_deref())?;
            let b = match &g.file_b {
                Some(fb) => Some(load_series(fb, g.meta_b.as_deref())?),
                None => None,
            };
            (a, b)
        }
    };
    let est = match &b {
        Some(b) => estimate_g2(&a, b, g.bin_width, g.tau_max),
        None => estimate_g2_auto(&a, g.bin_width, g.tau_max),
    }
    .map_err(|e| CliError::in_section("g2", e))?;
    let header = format!(
        "{}\ng2 source = {:?}, detectors = {} x {}\nbin width = {} gamma t, tau_max = {}",
        provenance("g2", cfg),
        g.source,
        a.detector,
        b.as_ref().map_or(a.detector.as_str(), |s| s.detector.as_str()),
        g.bin_width,
        g.tau_max
    );
    out.write("g2.csv", est.to_csv(&header).as_bytes())?;

    let snr = est.snr_in_window(SNR_WINDOW).ok();
    let opts = FitOptions { free, max_restarts: g.max_restarts, tau_range: (0.0, g.fit_tau_max), ..Default::default() };
    let fit = fit_g2(&est, &g.guess.into(), &opts).map_err(|e| CliError::in_section("g2", e))?;
    let report = json!({
        "fit": fit,
        "parameter_names": G2Params::NAMES,
        "guess": G2Params::from(g.guess),
        "measured_snr": snr,
        "snr_window": SNR_WINDOW,
        "counts": { "a": a.times.len(), "b": b.as_ref().map(|s| s.times.len()) },
        "rates": { "a": a.rate(), "b": b.as_ref().map(|s| s.rate()) },
        "t_int": a.t_int,
    });
    let text = serde_json::to_string_pretty(&report).expect("fit report serializes") + "\n";
    out.write("fit.json", text.as_bytes())?;
    let p = fit.params;
    eprintln!(
        "fit: omega = {:.4} +- {:.4}, detuning = {:.4} +- {:.4}, chi2_red = {:.3}",
        p.omega, fit.stderr[0], p.detuning, fit.stderr[1], fit.chi2_red
    );
    Ok(json!({ "bins": est.len(), "chi2_red": fit.chi2_red, "measured_snr": snr }))
}
