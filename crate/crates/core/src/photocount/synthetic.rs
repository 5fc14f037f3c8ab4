//! Synthetic two-detector click streams from the jump unraveling.
//!
//! Every photodetection resets the emitter to `|↓⟩`, so the emission times
//! form a renewal process with the exact waiting-time distribution. Each
//! photon goes to one of two detectors with probability `split`, survives
//! with probability `η`, and each detector adds independent dark counts at
//! rate `R_sig/SNR_Det`.

use rand::Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::TimestampSeries;
use crate::error::{Error, Result};
use crate::jump::sample_waiting_time;
use crate::me::steady_excited;
use crate::params::SystemParams;
use crate::rng::{derive_seed, trajectory_rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub omega: f64,
    pub detuning: f64,
    pub gamma: f64,
    /// Observation time in `γt`.
    pub t_int: f64,
    /// Detection efficiency of each detector.
    pub efficiency: f64,
    /// Probability that a photon is routed to detector A.
    pub split: f64,
    /// Detected signal rate over dark-count rate; infinite disables dark
    /// counts.
    pub snr_det: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            omega: 3.3,
            detuning: -3.2,
            gamma: 1.0,
            t_int: 2e5,
            efficiency: 0.5,
            split: 0.5,
            snr_det: 18.0,
        }
    }
}

impl SyntheticConfig {
    fn system(&self) -> SystemParams {
        let mut p = SystemParams::default();
        p.omega = self.omega;
        p.detuning = self.detuning;
        p.gamma = self.gamma;
        p
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_int > 0.0) {
            return Err(Error::param("t_int", "must be positive"));
        }
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(Error::param("efficiency", "must lie in (0, 1]"));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return Err(Error::param("split", "must lie in (0, 1)"));
        }
        if !(self.snr_det > 0.0) {
            return Err(Error::param("snr_det", "must be positive"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::param("omega", "a click stream needs a nonzero drive"));
        }
        self.system().validate()
    }

    /// Emission rate `γ ρ_ee`.
    pub fn emission_rate(&self) -> Result<f64> {
        Ok(self.gamma * steady_excited(&self.system())?)
    }

    /// Signal rate on detector A and B.
    pub fn signal_rates(&self) -> Result<(f64, f64)> {
        let r = self.emission_rate()? * self.efficiency;
        Ok((r * self.split, r * (1.0 - self.split)))
    }
}

/// All emission times in `[0, t_max]` after a start in `|↓⟩`.
pub fn emission_times<R: Rng + ?Sized>(p: &SystemParams, t_max: f64, rng: &mut R) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut t = sample_waiting_time(p, rng)?;
    while t <= t_max {
        out.push(t);
        t += sample_waiting_time(p, rng)?;
    }
    Ok(out)
}

fn poisson_times<R: Rng + ?Sized>(rate: f64, t_max: f64, rng: &mut R) -> Vec<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Vec::new();
    }
    let exp = Exp::new(rate).expect("positive rate");
    let mut out = Vec::new();
    let mut t = rng.sample(exp);
    while t <= t_max {
        out.push(t);
        t += rng.sample(exp);
    }
    out
}

fn merge_sorted(a: Vec<f64>, b: Vec<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Two detector streams in `γt`. Emission, routing and each detector's dark
/// counts draw from separate streams derived from `seed`.
pub fn synthesize(cfg: &SyntheticConfig, seed: u64) -> Result<(TimestampSeries, TimestampSeries)> {
    cfg.validate()?;
    let p = cfg.system();
    let emissions = emission_times(&p, cfg.t_int, &mut trajectory_rng(seed, 0))?;
    let mut route = trajectory_rng(seed, 1);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for t in emissions {
        let to_a = route.random::<f64>() < cfg.split;
        if route.random::<f64>() < cfg.efficiency {
            if to_a {
                a.push(t);
            } else {
                b.push(t);
            }
        }
    }
    let (ra, rb) = cfg.signal_rates()?;
    let dark_seed = derive_seed(seed, 0xDA2C);
    let da = poisson_times(ra / cfg.snr_det, cfg.t_int, &mut trajectory_rng(dark_seed, 0));
    let db = poisson_times(rb / cfg.snr_det, cfg.t_int, &mut trajectory_rng(dark_seed, 1));
    let mut sa = TimestampSeries::new("A", merge_sorted(a, da), cfg.t_int)?;
    let mut sb = TimestampSeries::new("B", merge_sorted(b, db), cfg.t_int)?;
    sa.signal_rate = Some(ra);
    sb.signal_rate = Some(rb);
    if cfg.snr_det.is_finite() {
        sa.dark_rate = Some(ra / cfg.snr_det);
        sb.dark_rate = Some(rb / cfg.snr_det);
    }
    Ok((sa, sb))
}
