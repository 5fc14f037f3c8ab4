//! Diffusive unravelings: homodyne and heterodyne detection.
//!
//! Both are integrated with Euler–Maruyama and renormalized after every
//! step. The decay channel is `L = √γ σ−`.
//!
//! Homodyne at local-oscillator phase `θ` measures the quadrature
//! `e^{−iθ}σ− + e^{iθ}σ+`: `θ = 0` gives `σx`, `θ = π/2` gives `σy`. The
//! unnormalized update is
//! `ψ + (−iH − ½L_θ†L_θ)ψ dt + (⟨L_θ + L_θ†⟩dt + dW) L_θ ψ`
//! with `L_θ = e^{−iθ}L` and `dW ~ N(0, dt)`.
//!
//! Heterodyne uses the quantum-state-diffusion form
//! `ψ + [−iH + ⟨L†⟩L − ½L†L − ½|⟨L⟩|²]ψ dt + (L − ⟨L⟩)ψ dW/√2`
//! with complex `dW = dWx + i·dWy`, `dWx, dWy ~ N(0, dt)`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::me::hamiltonian;
use crate::params::SystemParams;
use crate::record::TrajectoryRecord;
use crate::state::{self, MixedState, Op, PureState, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusiveMode {
    /// Fixed phase `θ = lo_phase`.
    Homodyne,
    /// Averaged fast-oscillator limit (quantum state diffusion).
    Heterodyne,
    /// Homodyne with `θ(t) = lo_phase − het_detuning·t`, for comparison
    /// with the averaged form.
    RotatingHomodyne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusiveConfig {
    pub mode: DiffusiveMode,
}

impl DiffusiveConfig {
    pub fn homodyne() -> Self {
        DiffusiveConfig { mode: DiffusiveMode::Homodyne }
    }

    pub fn heterodyne() -> Self {
        DiffusiveConfig { mode: DiffusiveMode::Heterodyne }
    }

    pub fn rotating() -> Self {
        DiffusiveConfig { mode: DiffusiveMode::RotatingHomodyne }
    }

    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        p.validate()?;
        let hmax = p.resolved_step(1e-3, 0.02);
        if p.dt > hmax * (1.0 + 1e-9) {
            return Err(Error::param("dt", format!("must be <= {hmax:.3e} (1e-3 and 0.02/omega)")));
        }
        if p.thermal != 0.0 {
            return Err(Error::param("thermal", "diffusive unravelings assume a vacuum bath"));
        }
        match self.mode {
            DiffusiveMode::Heterodyne if p.efficiency != 1.0 => {
                Err(Error::param("efficiency", "heterodyne detection is simulated at unit efficiency"))
            }
            DiffusiveMode::RotatingHomodyne if p.efficiency != 1.0 => {
                Err(Error::param("efficiency", "the rotating oscillator is simulated at unit efficiency"))
            }
            DiffusiveMode::RotatingHomodyne if p.dt * p.het_detuning.abs() > 0.05 => Err(Error::param(
                "dt",
                "must resolve the oscillator rotation: dt * |het_detuning| <= 0.05",
            )),
            _ => Ok(()),
        }
    }
}

struct Ops {
    drift: Op,
    lower: Op,
    sqrt_gamma: f64,
}

impl Ops {
    fn new(p: &SystemParams) -> Self {
        let sqrt_gamma = p.gamma.sqrt();
        let lower = state::sigma_minus() * C64::new(sqrt_gamma, 0.0);
        let ldl = lower.adjoint() * lower;
        let drift = hamiltonian(p) * C64::new(0.0, -1.0) - ldl * C64::new(0.5, 0.0);
        Ops { drift, lower, sqrt_gamma }
    }
}

fn homodyne_update(psi: &PureState, ops: &Ops, theta: f64, dt: f64, dw: f64) -> Result<PureState> {
    let v = psi.to_vector();
    let phase = Complex64::from_polar(1.0, -theta);
    // ⟨L_θ + L_θ†⟩ = 2√γ Re(e^{−iθ}⟨σ−⟩)
    let quad = 2.0 * ops.sqrt_gamma * (phase * psi.coherence()).re;
    let lv = ops.lower * v * phase;
    let next = v + ops.drift * v * C64::new(dt, 0.0) + lv * C64::new(quad * dt + dw, 0.0);
    let mut out = PureState::from_vector(next);
    out.normalize()?;
    Ok(out)
}

/// One homodyne step at phase `lo_phase`. `dw ~ N(0, dt)`.
pub fn step_homodyne(psi: &PureState, p: &SystemParams, dw: f64) -> Result<PureState> {
    homodyne_update(psi, &Ops::new(p), p.lo_phase, p.dt, dw)
}

fn heterodyne_update(psi: &PureState, ops: &Ops, dt: f64, dw: Complex64) -> Result<PureState> {
    let v = psi.to_vector();
    // ⟨L⟩ = √γ⟨σ−⟩
    let l_mean = psi.coherence() * ops.sqrt_gamma;
    let lv = ops.lower * v;
    let centred = lv - v * l_mean;
    let next = v
        + (ops.drift * v + lv * l_mean.conj() - v * C64::new(0.5 * l_mean.norm_sqr(), 0.0)) * C64::new(dt, 0.0)
        + centred * (dw * std::f64::consts::FRAC_1_SQRT_2);
    let mut out = PureState::from_vector(next);
    out.normalize()?;
    Ok(out)
}

/// One heterodyne step. `dw = dWx + i·dWy` with independent `N(0, dt)`
/// components.
pub fn step_heterodyne(psi: &PureState, p: &SystemParams, dw: Complex64) -> Result<PureState> {
    heterodyne_update(psi, &Ops::new(p), p.dt, dw)
}

/// Homodyne step for efficiency `η < 1` on a density matrix:
/// `ρ' ∝ MρM† + (1−η)LρL†dt` with
/// `M = I + (−iH − ½L†L)dt + √η L dY`, `dY = √η⟨L+L†⟩dt + dW`.
/// Positivity is preserved by construction and the normalized map agrees
/// with the stochastic master equation to first order.
pub fn step_homodyne_mixed(rho: &MixedState, p: &SystemParams, dw: f64) -> Result<MixedState> {
    let ops = Ops::new(p);
    let eta = p.efficiency;
    let l = ops.lower * Complex64::from_polar(1.0, -p.lo_phase);
    let r = rho.rho;
    let quad = (l * r + r * l.adjoint()).trace().re / rho.trace();
    let dy = eta.sqrt() * quad * p.dt + dw;
    let m = Op::identity() + ops.drift * C64::new(p.dt, 0.0) + l * C64::new(eta.sqrt() * dy, 0.0);
    let next = m * r * m.adjoint() + l * r * l.adjoint() * C64::new((1.0 - eta) * p.dt, 0.0);
    let tr = next.trace().re;
    if !(tr > 1e-12) || !tr.is_finite() {
        return Err(Error::NormCollapse { norm: tr });
    }
    let next = next * C64::new(1.0 / tr, 0.0);
    // re-hermitize against rounding drift
    Ok(MixedState { rho: (next + next.adjoint()) * C64::new(0.5, 0.0) })
}

/// Full diffusive trajectory from `|↓⟩`, sampled every `sample_dt`.
pub fn simulate_diffusive<R: Rng + ?Sized>(
    p: &SystemParams,
    cfg: &DiffusiveConfig,
    rng: &mut R,
) -> Result<TrajectoryRecord> {
    cfg.validate(p)?;
    let grid = p.sample_grid();
    let stride = p.sample_stride();
    let n_steps = (grid.len - 1) * stride;
    let sd = p.dt.sqrt();
    let mut rec = TrajectoryRecord::with_capacity(grid, None);
    let ops = Ops::new(p);

    if cfg.mode == DiffusiveMode::Homodyne && p.efficiency < 1.0 {
        let mut rho = MixedState::ground();
        let b = rho.bloch();
        rec.push(b, b.purity());
        for n in 1..=n_steps {
            let g: f64 = rng.sample(StandardNormal);
            rho = step_homodyne_mixed(&rho, p, g * sd)?;
            if n % stride == 0 {
                let b = rho.bloch();
                rec.push(b, b.purity());
            }
        }
        return Ok(rec);
    }

    let mut psi = PureState::ground();
    rec.push(psi.bloch(), 1.0);
    for n in 1..=n_steps {
        psi = match cfg.mode {
            DiffusiveMode::Homodyne => {
                let g: f64 = rng.sample(StandardNormal);
                homodyne_update(&psi, &ops, p.lo_phase, p.dt, g * sd)?
            }
            DiffusiveMode::RotatingHomodyne => {
                let g: f64 = rng.sample(StandardNormal);
                let t = (n - 1) as f64 * p.dt;
                homodyne_update(&psi, &ops, p.lo_phase - p.het_detuning * t, p.dt, g * sd)?
            }
            DiffusiveMode::Heterodyne => {
                let gx: f64 = rng.sample(StandardNormal);
                let gy: f64 = rng.sample(StandardNormal);
                heterodyne_update(&psi, &ops, p.dt, Complex64::new(gx * sd, gy * sd))?
            }
        };
        if n % stride == 0 {
            rec.push(psi.bloch(), 1.0);
        }
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trajectory_rng;

    #[test]
    fn dark_atom_is_a_fixed_point() {
        let mut p = SystemParams::with_drive_strength(10.0);
        p.omega = 0.0;
        for dw in [-0.3, 0.0, 0.7] {
            let a = step_homodyne(&PureState::ground(), &p, dw).unwrap();
            assert_eq!(a, PureState::ground());
            let b = step_heterodyne(&PureState::ground(), &p, Complex64::new(dw, -dw)).unwrap();
            assert_eq!(b, PureState::ground());
        }
    }

    #[test]
    fn steps_are_deterministic_and_normalized() {
        let p = SystemParams::with_drive_strength(10.0);
        let psi = PureState::new(C64::new(0.6, 0.1), C64::new(0.2, -0.7)).unwrap();
        let a = step_homodyne(&psi, &p, 0.013).unwrap();
        let b = step_homodyne(&psi, &p, 0.013).unwrap();
        assert_eq!(a, b);
        assert!((a.norm_sqr() - 1.0).abs() < 1e-12);
        let c = step_heterodyne(&psi, &p, Complex64::new(0.02, -0.01)).unwrap();
        assert!((c.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mixed_homodyne_reduces_to_pure_at_unit_efficiency() {
        let p = SystemParams::with_drive_strength(10.0);
        let psi = PureState::new(C64::new(0.6, 0.1), C64::new(0.2, -0.7)).unwrap();
        let a = step_homodyne(&psi, &p, 0.021).unwrap().to_mixed();
        let b = step_homodyne_mixed(&psi.to_mixed(), &p, 0.021).unwrap();
        assert!((a.rho - b.rho).norm() < 1e-12);
    }

    #[test]
    fn guards() {
        let mut p = SystemParams::with_drive_strength(10.0);
        p.dt = 2e-3;
        p.sample_dt = 1e-2;
        assert!(DiffusiveConfig::homodyne().validate(&p).is_err());
        let mut p = SystemParams::with_drive_strength(10.0);
        p.efficiency = 0.5;
        assert!(DiffusiveConfig::heterodyne().validate(&p).is_err());
        assert!(DiffusiveConfig::homodyne().validate(&p).is_ok());
        let mut p = SystemParams::with_drive_strength(10.0);
        p.het_detuning = 100.0;
        assert!(DiffusiveConfig::rotating().validate(&p).is_err());
    }

    #[test]
    fn zero_horizon_has_one_sample() {
        let mut p = SystemParams::with_drive_strength(10.0);
        p.t_max = 0.0;
        let rec = simulate_diffusive(&p, &DiffusiveConfig::heterodyne(), &mut trajectory_rng(0, 0)).unwrap();
        assert_eq!(rec.bloch.len(), 1);
        assert_eq!(rec.bloch[0].z, -1.0);
    }

    #[test]
    fn same_stream_same_trajectory() {
        let mut p = SystemParams::with_drive_strength(10.0);
        p.t_max = 1.0;
        for cfg in [DiffusiveConfig::homodyne(), DiffusiveConfig::heterodyne()] {
            let a = simulate_diffusive(&p, &cfg, &mut trajectory_rng(11, 5)).unwrap();
            let b = simulate_diffusive(&p, &cfg, &mut trajectory_rng(11, 5)).unwrap();
            assert_eq!(a, b);
            for bv in &a.bloch {
                assert!((bv.norm_sqr() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn imperfect_homodyne_stays_physical() {
        let mut p = SystemParams::with_drive_strength(10.0);
        p.efficiency = 0.4;
        p.t_max = 2.0;
        let rec = simulate_diffusive(&p, &DiffusiveConfig::homodyne(), &mut trajectory_rng(2, 0)).unwrap();
        for (b, q) in rec.bloch.iter().zip(&rec.purity) {
            assert!(b.norm_sqr() <= 1.0 + 1e-9);
            assert!(*q <= 1.0 + 1e-9);
        }
        assert!(rec.purity.iter().any(|&q| q < 0.99));
    }
}
