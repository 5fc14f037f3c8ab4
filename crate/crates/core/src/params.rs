//! Physical and numerical parameters shared by every engine.
//!
//! All rates are in units of the spontaneous decay rate and all times are
//! dimensionless `γt`. The drive strength `Y = 2√2·Ω/γ` is never stored; it is
//! recomputed from `omega` and `gamma` whenever it is needed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Half Rabi frequency Ω (the Rabi frequency is 2Ω).
    pub omega: f64,
    /// Spontaneous decay rate γ.
    pub gamma: f64,
    /// Drive detuning Δ.
    pub detuning: f64,
    /// Detection efficiency η.
    pub efficiency: f64,
    /// Thermal occupation n̄ of the bath.
    pub thermal: f64,
    /// Local-oscillator phase θ (homodyne).
    pub lo_phase: f64,
    /// Heterodyne offset ω_LO − ω_A.
    pub het_detuning: f64,
    /// Integration step.
    pub dt: f64,
    /// Spacing of the recorded expectation samples.
    pub sample_dt: f64,
    /// Simulation horizon.
    pub t_max: f64,
    pub n_traj: usize,
    pub seed: u64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            omega: 10.0 / (2.0 * std::f64::consts::SQRT_2),
            gamma: 1.0,
            detuning: 0.0,
            efficiency: 1.0,
            thermal: 0.0,
            lo_phase: 0.0,
            het_detuning: 0.0,
            dt: 1e-3,
            sample_dt: 1e-2,
            t_max: 6.0,
            n_traj: 10_000,
            seed: 0,
        }
    }
}

impl SystemParams {
    /// Parameters with a given drive strength `Y` and every other field at
    /// its default.
    pub fn with_drive_strength(y: f64) -> Self {
        let mut p = SystemParams::default();
        p.set_drive_strength(y);
        p
    }

    /// `Y = 2√2·Ω/γ`.
    pub fn drive_strength(&self) -> f64 {
        2.0 * std::f64::consts::SQRT_2 * self.omega / self.gamma
    }

    pub fn set_drive_strength(&mut self, y: f64) {
        self.omega = y * self.gamma / (2.0 * std::f64::consts::SQRT_2);
    }

    /// True for the pure-state direct-detection case (η = 1, n̄ = 0).
    pub fn is_ideal(&self) -> bool {
        self.efficiency == 1.0 && self.thermal == 0.0
    }

    /// Largest integration step that keeps Rabi cycles resolved:
    /// `min(cap, fraction/Ω)`.
    pub fn resolved_step(&self, cap: f64, fraction: f64) -> f64 {
        if self.omega.abs() > 0.0 {
            cap.min(fraction / self.omega.abs())
        } else {
            cap
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("omega", self.omega),
            ("gamma", self.gamma),
            ("detuning", self.detuning),
            ("efficiency", self.efficiency),
            ("thermal", self.thermal),
            ("lo_phase", self.lo_phase),
            ("het_detuning", self.het_detuning),
            ("dt", self.dt),
            ("sample_dt", self.sample_dt),
            ("t_max", self.t_max),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if self.gamma <= 0.0 {
            return Err(Error::param("gamma", "must be positive"));
        }
        if self.omega < 0.0 {
            return Err(Error::param("omega", "must be non-negative"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::param("efficiency", "must lie in [0, 1]"));
        }
        if self.thermal < 0.0 {
            return Err(Error::param("thermal", "must be non-negative"));
        }
        if self.dt <= 0.0 {
            return Err(Error::param("dt", "must be positive"));
        }
        if self.sample_dt < self.dt * (1.0 - 1e-9) {
            return Err(Error::param("sample_dt", "must be at least dt"));
        }
        let ratio = self.sample_dt / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::param("sample_dt", "must be an integer multiple of dt"));
        }
        if self.t_max < 0.0 {
            return Err(Error::param("t_max", "must be non-negative"));
        }
        if self.n_traj == 0 {
            return Err(Error::param("n_traj", "must be positive"));
        }
        Ok(())
    }

    /// Number of integration steps between recorded samples.
    pub fn sample_stride(&self) -> usize {
        (self.sample_dt / self.dt).round().max(1.0) as usize
    }

    /// Recording grid `0, sample_dt, …` up to `t_max`.
    pub fn sample_grid(&self) -> TimeGrid {
        TimeGrid::covering(self.sample_dt, self.t_max)
    }
}

/// Uniform time grid `t_k = k·step`, `k = 0..len`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub step: f64,
    pub len: usize,
}

impl TimeGrid {
    pub fn new(step: f64, len: usize) -> Self {
        TimeGrid { step, len }
    }

    /// Smallest grid with spacing `step` whose last point is the last
    /// multiple of `step` not beyond `t_max`.
    pub fn covering(step: f64, t_max: f64) -> Self {
        let n = (t_max / step + 1e-9).floor() as usize + 1;
        TimeGrid { step, len: n }
    }

    pub fn at(&self, k: usize) -> f64 {
        k as f64 * self.step
    }

    pub fn last(&self) -> f64 {
        self.at(self.len.saturating_sub(1))
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.len).map(|k| self.at(k)).collect()
    }

    /// Index of the grid point closest to `t`, clamped to the grid.
    pub fn index_of(&self, t: f64) -> usize {
        ((t / self.step).round().max(0.0) as usize).min(self.len.saturating_sub(1))
    }
}
