//! EPR-steering functional built from two differently conditioned
//! ensembles of the same emitter.
//!
//! `S = mean f1(ρ^D) + mean f2(ρ^H)`, with `ρ^D` conditioned on direct
//! photodetection and `ρ^H` on heterodyne detection. Any single-qubit state
//! has `f1 + f2 ≤ 1`, so an objective-state model forces `S ≤ 1`.
//!
//! Axes: with the drive along `σx`, direct detection builds coherence only
//! along `σy`; the heterodyne functional takes the two remaining axes.

use rand::Rng;

use crate::diffusive::{simulate_diffusive, DiffusiveConfig};
use crate::ensemble::{run_series_ensemble, StreamMoments};
use crate::error::{Error, Result};
use crate::jump::simulate_jump;
use crate::params::{SystemParams, TimeGrid};
use crate::record::TrajectoryRecord;
use crate::rng::derive_seed;
use crate::state::BlochVector;

pub fn f1(b: &BlochVector) -> f64 {
    b.y * b.y
}

pub fn f2(b: &BlochVector) -> f64 {
    b.x * b.x + b.z * b.z
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeringCurve {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub f1_mean: Vec<f64>,
    pub f2_mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Trailing maximum of `S` over one Rabi period `π/Ω`.
    pub envelope: Vec<f64>,
}

/// Sliding maximum over the trailing window `[t − width, t]`.
pub fn envelope(t: &[f64], s: &[f64], width: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(s.len());
    let mut lo = 0;
    let mut deque: std::collections::VecDeque<usize> = Default::default();
    for k in 0..s.len() {
        while deque.back().is_some_and(|&j| s[j] <= s[k]) {
            deque.pop_back();
        }
        deque.push_back(k);
        while t[k] - t[lo] > width + 1e-12 {
            lo += 1;
        }
        while deque.front().is_some_and(|&j| j < lo) {
            deque.pop_front();
        }
        out.push(s[deque[0]]);
    }
    out
}

impl SteeringCurve {
    pub fn from_moments(grid: &TimeGrid, f1: &[StreamMoments], f2: &[StreamMoments], omega: f64) -> Result<Self> {
        if f1.len() != grid.len || f2.len() != grid.len {
            return Err(Error::GridMismatch);
        }
        let t = grid.times();
        let s: Vec<f64> = f1.iter().zip(f2).map(|(a, b)| a.mean + b.mean).collect();
        let stderr = f1.iter().zip(f2).map(|(a, b)| a.stderr_mean().hypot(b.stderr_mean())).collect();
        let width = if omega > 0.0 { std::f64::consts::PI / omega } else { 0.0 };
        Ok(SteeringCurve {
            envelope: envelope(&t, &s, width),
            f1_mean: f1.iter().map(|m| m.mean).collect(),
            f2_mean: f2.iter().map(|m| m.mean).collect(),
            t,
            s,
            stderr,
        })
    }

    /// Mean of the envelope over `t ≥ t_from`.
    pub fn steady_envelope(&self, t_from: f64) -> Result<f64> {
        let tail: Vec<f64> = self.t.iter().zip(&self.envelope).filter(|(t, _)| **t >= t_from).map(|(_, e)| *e).collect();
        if tail.is_empty() {
            return Err(Error::BadGrid);
        }
        Ok(tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// CSV with columns `t, S, f1_mean, f2_mean, envelope`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::new();
        for line in header.lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out.push_str("t,S,f1_mean,f2_mean,envelope\n");
        for k in 0..self.t.len() {
            out.push_str(&format!(
                "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}\n",
                self.t[k], self.s[k], self.f1_mean[k], self.f2_mean[k], self.envelope[k]
            ));
        }
        out
    }
}

fn series_moments(records: &[TrajectoryRecord], f: fn(&BlochVector) -> f64) -> Result<(TimeGrid, Vec<StreamMoments>)> {
    let first = records.first().ok_or(Error::TooFewTrajectories { needed: 1, got: 0 })?;
    let grid = first.grid;
    let mut stats = vec![StreamMoments::default(); grid.len];
    for r in records {
        if r.grid != grid || r.bloch.len() != grid.len {
            return Err(Error::GridMismatch);
        }
        for (m, b) in stats.iter_mut().zip(&r.bloch) {
            m.push(f(b));
        }
    }
    Ok((grid, stats))
}

/// `S(t)` from stored direct-detection and heterodyne records.
pub fn steering_value(direct: &[TrajectoryRecord], heterodyne: &[TrajectoryRecord], omega: f64) -> Result<SteeringCurve> {
    let (g1, m1) = series_moments(direct, f1)?;
    let (g2, m2) = series_moments(heterodyne, f2)?;
    if g1 != g2 {
        return Err(Error::GridMismatch);
    }
    SteeringCurve::from_moments(&g1, &m1, &m2, omega)
}

/// Checks the preconditions: vacuum, and a unit-efficiency heterodyne arm.
pub fn check_steering_params(p: &SystemParams) -> Result<()> {
    p.validate()?;
    if p.thermal != 0.0 {
        return Err(Error::param("thermal", "steering assumes direct detection in vacuum"));
    }
    Ok(())
}

/// Simulates both ensembles with `p.n_traj` trajectories each. The direct
/// arm uses `p.efficiency`; the heterodyne arm always has unit efficiency.
pub fn run_steering(p: &SystemParams) -> Result<SteeringCurve> {
    check_steering_params(p)?;
    let grid = p.sample_grid();
    let [m1] = run_series_ensemble(p.n_traj, derive_seed(p.seed, 1), grid, |rng| simulate_jump(p, rng), |b| [f1(b)])?;
    let mut ph = p.clone();
    ph.efficiency = 1.0;
    let cfg = DiffusiveConfig::heterodyne();
    let [m2] = run_series_ensemble(p.n_traj, derive_seed(p.seed, 2), grid, |rng| simulate_diffusive(&ph, &cfg, rng), |b| [f2(b)])?;
    SteeringCurve::from_moments(&grid, &m1, &m2, p.omega)
}

/// Single-trajectory helper used in tests and examples.
pub fn steering_pair<R: Rng + ?Sized>(p: &SystemParams, rng: &mut R) -> Result<(TrajectoryRecord, TrajectoryRecord)> {
    let mut ph = p.clone();
    ph.efficiency = 1.0;
    Ok((simulate_jump(p, rng)?, simulate_diffusive(&ph, &DiffusiveConfig::heterodyne(), rng)?))
}
