//! Unconditional master-equation dynamics.
//!
//! The rotating-frame Lindbladian is
//! `L ρ = −i[H, ρ] + γ(n̄+1) D[σ−]ρ + γn̄ D[σ+]ρ` with `H = Ωσx − (Δ/2)σz`.
//! Everything here works on the four real components `(r0, x, y, z)` of
//! `ρ = (r0·I + xσx + yσy + zσz)/2`, where `r0` is the trace.

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::state::{self, BlochVector, MixedState, Op, C64};

/// One dissipative channel `rate·(w·LρL† − ½{L†L, ρ})`. The sandwich
/// weight `w` is 1 for a full Lindblad term and `1 − η` for the part of a
/// monitored channel that survives conditioning on "no click".
#[derive(Debug, Clone, Copy)]
pub struct Channel {
    pub rate: f64,
    pub op: Op,
    pub sandwich: f64,
}

#[derive(Debug, Clone)]
pub struct Lindbladian {
    pub hamiltonian: Op,
    pub channels: Vec<Channel>,
}

pub fn hamiltonian(p: &SystemParams) -> Op {
    state::sigma_x() * C64::new(p.omega, 0.0) - state::sigma_z() * C64::new(0.5 * p.detuning, 0.0)
}

impl Lindbladian {
    pub fn master(p: &SystemParams) -> Self {
        Self::with_detection(p, 0.0)
    }

    /// No-click propagator `ℓ′ = L − ηJ` for detection efficiency `η` on
    /// the downward channel. Upward thermal jumps stay unmonitored.
    pub fn conditional(p: &SystemParams) -> Self {
        Self::with_detection(p, p.efficiency)
    }

    fn with_detection(p: &SystemParams, eta: f64) -> Self {
        let mut channels = vec![Channel {
            rate: p.gamma * (p.thermal + 1.0),
            op: state::sigma_minus(),
            sandwich: 1.0 - eta,
        }];
        if p.thermal > 0.0 {
            channels.push(Channel {
                rate: p.gamma * p.thermal,
                op: state::sigma_plus(),
                sandwich: 1.0,
            });
        }
        Lindbladian { hamiltonian: hamiltonian(p), channels }
    }

    pub fn apply(&self, rho: &Op) -> Op {
        let mi = C64::new(0.0, -1.0);
        let mut out = (self.hamiltonian * rho - rho * self.hamiltonian) * mi;
        for ch in &self.channels {
            let l = ch.op;
            let ld = l.adjoint();
            let ldl = ld * l;
            let sandwich = l * rho * ld * C64::new(ch.sandwich, 0.0);
            let anti = (ldl * rho + rho * ldl) * C64::new(0.5, 0.0);
            out += (sandwich - anti) * C64::new(ch.rate, 0.0);
        }
        out
    }

    /// Real 4×4 matrix acting on `(r0, x, y, z)`.
    pub fn generator(&self) -> Matrix4<f64> {
        let basis = [state::identity(), state::sigma_x(), state::sigma_y(), state::sigma_z()];
        let mut a = Matrix4::zeros();
        for (k, pk) in basis.iter().enumerate() {
            let image = self.apply(&(pk * C64::new(0.5, 0.0)));
            for (j, pj) in basis.iter().enumerate() {
                a[(j, k)] = (pj * image).trace().re;
            }
        }
        a
    }
}

/// Generator of the master equation on `(r0, x, y, z)`.
pub fn bloch_generator(p: &SystemParams) -> Matrix4<f64> {
    Lindbladian::master(p).generator()
}

/// Fourth-order Taylor polynomial of `e^{hA}`, which is exactly one
/// classical RK4 step for a linear autonomous system.
pub fn rk4_step_matrix(a: &Matrix4<f64>, h: f64) -> Matrix4<f64> {
    let ha = a * h;
    let ha2 = ha * ha;
    let ha3 = ha2 * ha;
    let ha4 = ha3 * ha;
    Matrix4::identity() + ha + ha2 / 2.0 + ha3 / 6.0 + ha4 / 24.0
}

pub fn components(rho: &MixedState) -> Vector4<f64> {
    let tr = rho.trace();
    let b = rho.bloch();
    Vector4::new(tr, b.x * tr, b.y * tr, b.z * tr)
}

pub fn from_components(v: &Vector4<f64>) -> MixedState {
    MixedState::from_components(v[0], BlochVector::new(v[1], v[2], v[3]))
}

/// Integration step used by [`propagate_me`]: `min(10⁻³, 0.005/Ω)`.
pub fn me_step(p: &SystemParams) -> f64 {
    p.resolved_step(1e-3, 0.005)
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() || t_grid[0] != 0.0 {
        return Err(Error::BadGrid);
    }
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) || t_grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::BadGrid);
    }
    Ok(())
}

/// Solves the master equation with fixed-step RK4 and returns `ρ(t)` at
/// each requested time.
pub fn propagate_me(p: &SystemParams, rho0: &MixedState, t_grid: &[f64]) -> Result<Vec<MixedState>> {
    p.validate()?;
    rho0.validate()?;
    check_grid(t_grid)?;
    let a = bloch_generator(p);
    let hmax = me_step(p);
    let mut v = components(rho0);
    let mut out = Vec::with_capacity(t_grid.len());
    out.push(from_components(&v));
    let mut cached: Option<(usize, f64, Matrix4<f64>)> = None;
    for w in t_grid.windows(2) {
        let span = w[1] - w[0];
        let n = (span / hmax * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = span / n as f64;
        let step = match cached {
            Some((cn, ch, m)) if cn == n && (ch - h).abs() <= 1e-15 * h => m,
            _ => {
                let m = rk4_step_matrix(&a, h);
                cached = Some((n, h, m));
                m
            }
        };
        for _ in 0..n {
            v = step * v;
        }
        out.push(from_components(&v));
    }
    Ok(out)
}

/// `⟨σz(t)⟩` from the master equation, starting in `|↓⟩`.
pub fn me_inversion(p: &SystemParams, t_grid: &[f64]) -> Result<Vec<f64>> {
    Ok(propagate_me(p, &MixedState::ground(), t_grid)?
        .iter()
        .map(|r| r.bloch().z)
        .collect())
}

/// Closed-form mean inversion from the ground state at resonance and zero
/// temperature:
/// `S_z [1 + Y² e^{−3γt/4} (cosh δt + (3γ/4δ) sinh δt)]`,
/// `δ = (γ/4)√(1 − 8Y²)`, `S_z = −1/(1 + Y²)`.
///
/// `δ` is imaginary above `Y = 1/√8`, so the hyperbolic functions are
/// evaluated in complex arithmetic. Detuning and thermal occupation are
/// ignored.
pub fn analytic_inversion(p: &SystemParams, t: f64) -> f64 {
    let g = p.gamma;
    let y2 = p.drive_strength().powi(2);
    let sz = -1.0 / (1.0 + y2);
    let delta = Complex64::new(1.0 - 8.0 * y2, 0.0).sqrt() * (g / 4.0);
    let dt = delta * t;
    let sinhc = if dt.norm() < 1e-6 {
        // sinh(δt)/δ
        Complex64::new(t, 0.0) * (1.0 + dt * dt / 6.0)
    } else {
        dt.sinh() / delta
    };
    let bracket = dt.cosh() + sinhc * (0.75 * g);
    let val = sz * (1.0 + y2 * (-0.75 * g * t).exp() * bracket);
    debug_assert!(val.im.abs() < 1e-12);
    val.re
}

/// Steady-state Bloch vector of the master equation.
pub fn steady_state(p: &SystemParams) -> Result<BlochVector> {
    p.validate()?;
    let a = bloch_generator(p);
    let b: Matrix3<f64> = a.fixed_view::<3, 3>(1, 1).into_owned();
    let c: Vector3<f64> = a.fixed_view::<3, 1>(1, 0).into_owned();
    let v = b
        .lu()
        .solve(&(-c))
        .ok_or_else(|| Error::InvalidState("singular Bloch generator".into()))?;
    Ok(BlochVector::new(v[0], v[1], v[2]))
}

/// `⟨σ+σ−⟩` in the steady state.
pub fn steady_excited(p: &SystemParams) -> Result<f64> {
    Ok(0.5 * (1.0 + steady_state(p)?.z))
}

/// Normalized intensity correlation from the regression structure:
/// excited population a delay `τ` after a reset to `|↓⟩`, divided by the
/// steady-state excited population.
pub fn g2_analytic(p: &SystemParams, taus: &[f64]) -> Result<Vec<f64>> {
    if p.omega == 0.0 {
        return Err(Error::param("omega", "g2 is undefined without drive (zero steady-state emission)"));
    }
    let pss = steady_excited(p)?;
    if !(pss > 0.0) {
        return Err(Error::InvalidState("steady-state excited population is zero".into()));
    }
    if taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::param("tau", "delays must be non-negative"));
    }
    let a = bloch_generator(p);
    let v0 = Vector4::new(1.0, 0.0, 0.0, -1.0);
    let mut out = Vec::with_capacity(taus.len());
    // uniform grids reuse one step exponential
    let mut prev: Option<(f64, Vector4<f64>)> = None;
    let mut step: Option<(f64, Matrix4<f64>)> = None;
    for &tau in taus {
        let v = match prev {
            Some((tp, vp)) if tau >= tp => {
                let d = tau - tp;
                let m = match step {
                    Some((sd, m)) if (sd - d).abs() <= 1e-12 * d.max(1e-300) => m,
                    _ => {
                        let m = (a * d).exp();
                        step = Some((d, m));
                        m
                    }
                };
                m * vp
            }
            _ => (a * tau).exp() * v0,
        };
        prev = Some((tau, v));
        out.push(0.5 * (v[0] + v[3]) / pss);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{expectation_real, Observable, PureState};

    fn grid(n: usize, t_max: f64) -> Vec<f64> {
        (0..n).map(|k| t_max * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn undriven_decay_is_exponential() {
        let mut p = SystemParams::default();
        p.omega = 0.0;
        let ts = grid(50, 5.0);
        let rhos = propagate_me(&p, &PureState::excited().to_mixed(), &ts).unwrap();
        for (t, r) in ts.iter().zip(&rhos) {
            assert!((r.rho[(1, 1)].re - (-t).exp()).abs() < 1e-10);
        }
    }

    #[test]
    fn generator_matches_hand_written_bloch_equations() {
        let mut p = SystemParams::with_drive_strength(3.0);
        p.detuning = -0.7;
        let a = bloch_generator(&p);
        let (o, d, g) = (p.omega, p.detuning, p.gamma);
        #[rustfmt::skip]
        let expected = Matrix4::new(
            0.0, 0.0,      0.0,      0.0,
            0.0, -g / 2.0, -d,       0.0,
            0.0, d,        -g / 2.0, 2.0 * o,
            -g,  0.0,      -2.0 * o, -g,
        );
        assert!((a - expected).abs().max() < 1e-14, "{a}");
    }

    #[test]
    fn thermal_generator_rates() {
        let mut p = SystemParams::default();
        p.omega = 0.0;
        p.thermal = 0.3;
        let a = bloch_generator(&p);
        let g = p.gamma * (2.0 * p.thermal + 1.0);
        assert!((a[(3, 3)] + g).abs() < 1e-14);
        assert!((a[(3, 0)] + p.gamma).abs() < 1e-14);
        assert!((a[(1, 1)] + g / 2.0).abs() < 1e-14);
        let ss = steady_state(&p).unwrap();
        assert!((ss.z + 1.0 / (2.0 * p.thermal + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn inversion_matches_ode_for_strong_drive() {
        let p = SystemParams::with_drive_strength(10.0);
        let ts = grid(601, 6.0);
        let z = me_inversion(&p, &ts).unwrap();
        for (t, zv) in ts.iter().zip(&z) {
            assert!((analytic_inversion(&p, *t) - zv).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn inversion_both_sides_of_critical_drive() {
        for y in [0.1, 0.3, 1.0 / 8f64.sqrt(), 0.5, 1.0, 30.0] {
            let p = SystemParams::with_drive_strength(y);
            let ts = grid(301, 6.0);
            let z = me_inversion(&p, &ts).unwrap();
            for (t, zv) in ts.iter().zip(&z) {
                assert!((analytic_inversion(&p, *t) - zv).abs() < 1e-8, "Y={y} t={t} diff={}", analytic_inversion(&p, *t) - zv);
            }
        }
    }

    #[test]
    fn inversion_limits() {
        let p = SystemParams::with_drive_strength(1.0);
        assert!((analytic_inversion(&p, 0.0) + 1.0).abs() < 1e-15);
        assert!((analytic_inversion(&p, 200.0) + 0.5).abs() < 1e-12);
    }

    #[test]
    fn steady_inversion_formula() {
        for y in [0.2, 1.0, 10.0, 30.0] {
            let p = SystemParams::with_drive_strength(y);
            let ss = steady_state(&p).unwrap();
            assert!((ss.z + 1.0 / (1.0 + y * y)).abs() < 1e-12);
            let long = propagate_me(&p, &MixedState::ground(), &[0.0, 40.0]).unwrap();
            assert!((long[1].bloch().z - ss.z).abs() < 1e-9);
        }
    }

    #[test]
    fn physicality_preserved_on_grid() {
        let mut p = SystemParams::with_drive_strength(7.0);
        p.thermal = 0.2;
        p.detuning = 1.3;
        let ts = grid(100, 8.0);
        let start = MixedState::from_bloch(BlochVector::new(0.3, -0.4, 0.5));
        for r in propagate_me(&p, &start, &ts).unwrap() {
            assert!((r.trace() - 1.0).abs() < 1e-9);
            assert!((r.rho - r.rho.adjoint()).norm() < 1e-10);
            assert!(r.min_eigenvalue() > -1e-10);
        }
    }

    #[test]
    fn bad_inputs_rejected() {
        let p = SystemParams::default();
        assert_eq!(propagate_me(&p, &MixedState::ground(), &[]), Err(Error::BadGrid));
        assert_eq!(propagate_me(&p, &MixedState::ground(), &[0.0, 1.0, 1.0]), Err(Error::BadGrid));
        assert_eq!(propagate_me(&p, &MixedState::ground(), &[0.5, 1.0]), Err(Error::BadGrid));
        let bad = MixedState::from_bloch(BlochVector::new(1.0, 1.0, 0.0));
        assert!(propagate_me(&p, &bad, &[0.0]).is_err());
    }

    #[test]
    fn g2_limits_and_antibunching() {
        let p = SystemParams::with_drive_strength(10.0);
        let g = g2_analytic(&p, &[0.0, 60.0, 80.0]).unwrap();
        assert!(g[0].abs() < 1e-14);
        assert!((g[1] - 1.0).abs() < 1e-6);
        assert!((g[2] - 1.0).abs() < 1e-6);
        let mut dark = p;
        dark.omega = 0.0;
        assert!(g2_analytic(&dark, &[0.0]).is_err());
    }

    #[test]
    fn g2_red_detuned_overshoot() {
        let mut p = SystemParams::default();
        p.omega = 3.3;
        p.detuning = -3.2;
        let taus: Vec<f64> = (0..2000).map(|k| k as f64 * 0.002).collect();
        let g = g2_analytic(&p, &taus).unwrap();
        let max = g.iter().cloned().fold(f64::MIN, f64::max);
        assert!(max > 2.0, "max g2 = {max}");
    }

    #[test]
    fn g2_uniform_and_scattered_grids_agree() {
        let mut p = SystemParams::default();
        p.omega = 2.0;
        p.detuning = 0.5;
        let uniform: Vec<f64> = (0..200).map(|k| k as f64 * 0.05).collect();
        let a = g2_analytic(&p, &uniform).unwrap();
        for (k, &t) in uniform.iter().enumerate().step_by(17) {
            let b = g2_analytic(&p, &[t]).unwrap()[0];
            assert!((a[k] - b).abs() < 1e-11);
        }
    }

    #[test]
    fn g2_oscillation_frequency() {
        let p = SystemParams::with_drive_strength(10.0);
        let mu = (p.omega.powi(2) - p.gamma.powi(2) / 16.0).sqrt();
        let h = 1e-3;
        let taus: Vec<f64> = (0..6000).map(|k| k as f64 * h).collect();
        let g = g2_analytic(&p, &taus).unwrap();
        let peaks: Vec<f64> = (1..g.len() - 1)
            .filter(|&k| g[k] > g[k - 1] && g[k] >= g[k + 1])
            .map(|k| taus[k])
            .collect();
        assert!(peaks.len() >= 4);
        let spacing = (peaks[peaks.len() - 1] - peaks[0]) / (peaks.len() - 1) as f64;
        let freq = 2.0 * std::f64::consts::PI / spacing;
        assert!((freq - 2.0 * mu).abs() / (2.0 * mu) < 1e-2, "freq {freq} vs {}", 2.0 * mu);
    }

    #[test]
    fn expectation_consistent_with_components() {
        let r = MixedState::from_bloch(BlochVector::new(0.1, 0.2, -0.3));
        let v = components(&r);
        assert!((v[2] - expectation_real(&r, Observable::SigmaY)).abs() < 1e-14);
    }
}
