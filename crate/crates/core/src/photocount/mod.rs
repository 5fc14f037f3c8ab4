//! Photon-timestamp analysis: coincidence-based `g²(τ)`, the
//! imperfection-corrected fit model and signal-to-noise estimates.

pub mod fit;
pub mod synthetic;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::me::g2_analytic;
use crate::params::SystemParams;

pub use fit::{fit_g2, FitOptions, FitResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimeUnit {
    Seconds,
    #[default]
    GammaT,
}

/// Detector metadata, as found in a timestamp sidecar file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesMeta {
    pub detector: String,
    #[serde(default)]
    pub unit: TimeUnit,
    /// `γ` in 1/s, needed to convert seconds to `γt`.
    #[serde(default)]
    pub gamma: Option<f64>,
    /// Observation time; defaults to the last timestamp.
    #[serde(default)]
    pub t_int: Option<f64>,
    #[serde(default)]
    pub signal_rate: Option<f64>,
    #[serde(default)]
    pub dark_rate: Option<f64>,
}

/// Sorted arrival times of one detector in `[0, t_int]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimestampSeries {
    pub detector: String,
    pub times: Vec<f64>,
    pub t_int: f64,
    pub unit: TimeUnit,
    pub gamma: Option<f64>,
    pub signal_rate: Option<f64>,
    pub dark_rate: Option<f64>,
}

impl TimestampSeries {
    pub fn new(detector: impl Into<String>, times: Vec<f64>, t_int: f64) -> Result<Self> {
        let s = TimestampSeries {
            detector: detector.into(),
            times,
            t_int,
            unit: TimeUnit::GammaT,
            gamma: None,
            signal_rate: None,
            dark_rate: None,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn from_meta(times: Vec<f64>, meta: &SeriesMeta) -> Result<Self> {
        let t_int = meta.t_int.or(times.last().copied()).ok_or_else(|| Error::EmptySeries(meta.detector.clone()))?;
        let s = TimestampSeries {
            detector: meta.detector.clone(),
            times,
            t_int,
            unit: meta.unit,
            gamma: meta.gamma,
            signal_rate: meta.signal_rate,
            dark_rate: meta.dark_rate,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() {
            return Err(Error::EmptySeries(self.detector.clone()));
        }
        if !(self.t_int > 0.0) {
            return Err(Error::param("t_int", "must be positive"));
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidState(format!("timestamps of `{}` are not sorted", self.detector)));
        }
        if self.times[0] < 0.0 || *self.times.last().unwrap() > self.t_int {
            return Err(Error::InvalidState(format!("timestamps of `{}` leave [0, t_int]", self.detector)));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.times.len() as f64 / self.t_int
    }

    /// The same series in units of `1/γ`.
    pub fn to_gamma_t(&self) -> Result<TimestampSeries> {
        match self.unit {
            TimeUnit::GammaT => Ok(self.clone()),
            TimeUnit::Seconds => {
                let g = self.gamma.ok_or_else(|| Error::param("gamma", "needed to convert seconds to gamma t"))?;
                Ok(TimestampSeries {
                    times: self.times.iter().map(|t| t * g).collect(),
                    t_int: self.t_int * g,
                    unit: TimeUnit::GammaT,
                    signal_rate: self.signal_rate.map(|r| r / g),
                    dark_rate: self.dark_rate.map(|r| r / g),
                    ..self.clone()
                })
            }
        }
    }
}

/// Normalized coincidence histogram over `|t_b − t_a|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct G2Estimate {
    /// Bin centres.
    pub tau: Vec<f64>,
    pub g2: Vec<f64>,
    /// Poisson counting error of each bin.
    pub err: Vec<f64>,
    pub counts: Vec<u64>,
    pub bin_width: f64,
    /// Expected coincidences per bin for uncorrelated streams.
    pub expected: f64,
}

impl G2Estimate {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Mean over standard deviation of `g²` for bins with centre in
    /// `[lo, hi]`.
    pub fn snr_in_window(&self, window: (f64, f64)) -> Result<f64> {
        let v: Vec<f64> = self.tau.iter().zip(&self.g2).filter(|(t, _)| **t >= window.0 && **t <= window.1).map(|(_, g)| *g).collect();
        if v.len() < 2 {
            return Err(Error::param("snr_window", "fewer than two bins inside the window"));
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Ok(mean / var.sqrt())
    }

    /// CSV with columns `tau, g2, err`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("tau,g2,err\n");
        for k in 0..self.len() {
            out.push_str(&format!("{:.12e},{:.12e},{:.12e}\n", self.tau[k], self.g2[k], self.err[k]));
        }
        out
    }
}

const SWEEP_CHUNK: usize = 1 << 14;

fn histogram(a: &[f64], b: &[f64], bin_width: f64, n_bins: usize) -> Vec<u64> {
    let tau_max = bin_width * n_bins as f64;
    a.par_chunks(SWEEP_CHUNK)
        .map(|chunk| {
            let mut h = vec![0u64; n_bins];
            let mut lo = b.partition_point(|&t| t < chunk[0] - tau_max);
            for &ta in chunk {
                while lo < b.len() && b[lo] <= ta - tau_max {
                    lo += 1;
                }
                let mut j = lo;
                while j < b.len() && b[j] < ta + tau_max {
                    let k = ((b[j] - ta).abs() / bin_width) as usize;
                    if k < n_bins {
                        h[k] += 1;
                    }
                    j += 1;
                }
            }
            h
        })
        .reduce(|| vec![0u64; n_bins], |mut x, y| {
            x.iter_mut().zip(&y).for_each(|(p, q)| *p += q);
            x
        })
}

fn normalize(counts: Vec<u64>, bin_width: f64, expected: f64) -> G2Estimate {
    let n = counts.len();
    G2Estimate {
        tau: (0..n).map(|k| (k as f64 + 0.5) * bin_width).collect(),
        g2: counts.iter().map(|&c| c as f64 / expected).collect(),
        err: counts.iter().map(|&c| (c.max(1) as f64).sqrt() / expected).collect(),
        counts,
        bin_width,
        expected,
    }
}

/// Cross-correlation of two detectors. Bin `k` collects pairs with
/// `kΔ ≤ |t_b − t_a| < (k+1)Δ`; the uncorrelated expectation is
/// `2 r_a r_b Δ T` over the common window `T`.
pub fn estimate_g2(a: &TimestampSeries, b: &TimestampSeries, bin_width: f64, tau_max: f64) -> Result<G2Estimate> {
    a.validate()?;
    b.validate()?;
    if a.unit != b.unit {
        return Err(Error::param("unit", "both series must use the same time unit"));
    }
    if !(bin_width > 0.0) || !(tau_max >= bin_width) {
        return Err(Error::BadGrid);
    }
    let t = a.t_int.min(b.t_int);
    if tau_max >= t {
        return Err(Error::param("tau_max", "must be shorter than the observation window"));
    }
    let n_bins = (tau_max / bin_width).round() as usize;
    let counts = histogram(&a.times, &b.times, bin_width, n_bins);
    let expected = 2.0 * a.rate() * b.rate() * bin_width * t;
    Ok(normalize(counts, bin_width, expected))
}

/// Auto-correlation of one detector over distinct pairs `i < j`, normalized
/// by `r² Δ T`.
pub fn estimate_g2_auto(a: &TimestampSeries, bin_width: f64, tau_max: f64) -> Result<G2Estimate> {
    a.validate()?;
    if !(bin_width > 0.0) || !(tau_max >= bin_width) || tau_max >= a.t_int {
        return Err(Error::BadGrid);
    }
    let n_bins = (tau_max / bin_width).round() as usize;
    let mut counts = vec![0u64; n_bins];
    for i in 0..a.times.len() {
        for &tj in &a.times[i + 1..] {
            let k = ((tj - a.times[i]) / bin_width) as usize;
            if k >= n_bins {
                break;
            }
            counts[k] += 1;
        }
    }
    let r = a.rate();
    Ok(normalize(counts, bin_width, r * r * bin_width * a.t_int))
}

/// Parameters of the corrected correlation model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Params {
    pub omega: f64,
    pub detuning: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub snr_det: f64,
}

impl G2Params {
    pub const NAMES: [&'static str; 6] = ["omega", "detuning", "a", "b", "c", "snr_det"];

    pub fn ideal(omega: f64, detuning: f64) -> Self {
        G2Params { omega, detuning, a: 1.0, b: 0.0, c: 0.0, snr_det: f64::INFINITY }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.omega, self.detuning, self.a, self.b, self.c, self.snr_det]
    }

    pub fn from_array(v: [f64; 6]) -> Self {
        G2Params { omega: v[0], detuning: v[1], a: v[2], b: v[3], c: v[4], snr_det: v[5] }
    }

    fn system(&self) -> SystemParams {
        let mut p = SystemParams::default();
        p.omega = self.omega;
        p.detuning = self.detuning;
        p
    }
}

/// `[A(τ)g²(τ) + 2/SNR + 1/SNR²] / [1 + 2/SNR + 1/SNR²]` with
/// `A(τ) = a + b e^{−cτ}`; `τ` in units of `1/γ`.
pub fn g2_model(taus: &[f64], m: &G2Params) -> Result<Vec<f64>> {
    if !(m.snr_det > 0.0) || m.c < 0.0 || m.omega < 0.0 {
        return Err(Error::param("g2_model", "need omega >= 0, c >= 0, snr_det > 0"));
    }
    let g = g2_analytic(&m.system(), taus)?;
    let beta = 2.0 / m.snr_det + 1.0 / (m.snr_det * m.snr_det);
    Ok(taus
        .iter()
        .zip(&g)
        .map(|(t, g)| {
            let a = m.a + m.b * (-m.c * t).exp();
            (a * g + beta) / (1.0 + beta)
        })
        .collect())
}

/// `√(η² g² R t_int)`.
pub fn snr_model(eta: f64, g2: f64, rate: f64, t_int: f64) -> Result<f64> {
    if eta < 0.0 || g2 < 0.0 || rate < 0.0 || t_int < 0.0 {
        return Err(Error::param("snr_model", "inputs must be non-negative"));
    }
    Ok((eta * eta * g2 * rate * t_int).sqrt())
}

/// Default long-delay window for SNR estimates, in `γτ`.
pub const SNR_WINDOW: (f64, f64) = (20.0, 50.0);
