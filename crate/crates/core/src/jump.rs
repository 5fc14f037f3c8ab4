//! Direct photodetection: quantum-jump trajectories.
//!
//! With unit efficiency and no thermal photons the conditional state is pure
//! and is reset to `|↓⟩` after every click. Between clicks it is the
//! normalized image of `e^{−iH_eff t}|↓⟩`, with
//! `H_eff = [[Δ/2, Ω], [Ω, −Δ/2 − iγ/2]]`, and the waiting times are drawn
//! exactly from their survival function. Otherwise a density matrix is
//! propagated step by step under the no-click generator `ℓ′ = L − ηJ`.

use nalgebra::Vector4;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::Open01;

use crate::error::{Error, Result};
use crate::me::{rk4_step_matrix, Lindbladian};
use crate::params::SystemParams;
use crate::record::{ClickRecord, TrajectoryRecord};
use crate::state::{BlochVector, PureState};

/// `sin z / z` for complex `z`, with its Taylor series near 0.
fn sinc(z: Complex64) -> Complex64 {
    if z.norm() < 1e-4 {
        let z2 = z * z;
        1.0 - z2 / 6.0 + z2 * z2 / 120.0
    } else {
        z.sin() / z
    }
}

/// `(cos z, sinc z)·e^{−d}`, with the damping folded into the exponentials
/// so that large imaginary `z` cannot overflow against a vanishing `e^{−d}`.
fn damped_cos_sinc(z: Complex64, d: f64) -> (Complex64, Complex64) {
    if z.norm() < 1.0 {
        let e = (-d).exp();
        return (z.cos() * e, sinc(z) * e);
    }
    let i = Complex64::i();
    let ep = (i * z - d).exp();
    let em = (-i * z - d).exp();
    (0.5 * (ep + em), (ep - em) / (2.0 * i * z))
}

/// `μ = ½√(4Ω² − γ²/4)`, imaginary below `Ω = γ/4`.
pub fn mu(p: &SystemParams) -> Complex64 {
    0.5 * Complex64::new(4.0 * p.omega * p.omega - p.gamma * p.gamma / 4.0, 0.0).sqrt()
}

/// Unnormalized `e^{−iH_eff t}|↓⟩` for any detuning.
pub fn no_jump_amplitudes(p: &SystemParams, t: f64) -> PureState {
    let i = Complex64::i();
    let c = Complex64::new(0.5 * p.detuning, 0.25 * p.gamma);
    let kappa = (c * c + p.omega * p.omega).sqrt();
    let (cos, sinc) = damped_cos_sinc(kappa * t, 0.25 * p.gamma * t);
    let s = sinc * t;
    PureState {
        amp_down: cos - i * s * c,
        amp_up: -i * s * p.omega,
    }
}

/// Probability of no emission in `[0, t]` after a reset, from the no-jump
/// norm. Valid for any detuning.
pub fn survival(p: &SystemParams, t: f64) -> f64 {
    no_jump_amplitudes(p, t).norm_sqr()
}

/// Waiting-time density `γ|⟨↑|e^{−iH_eff τ}|↓⟩|²`. Valid for any detuning.
pub fn waiting_density(p: &SystemParams, tau: f64) -> f64 {
    p.gamma * no_jump_amplitudes(p, tau).amp_up.norm_sqr()
}

/// `p0(t) = e^{−γt/2}[Ω²/μ² − (γ²/16μ²)cos 2μt + (γ/4μ) sin 2μt]` at
/// resonance, rewritten through `sinc` so that `μ → 0` is regular:
/// `e^{−γt/2}[1 + (γ²t²/8) sinc²(μt) + (γt/2) sinc(2μt)]`.
pub fn null_probability(p: &SystemParams, t: f64) -> f64 {
    let g = p.gamma;
    let m = mu(p);
    let (_, s1) = damped_cos_sinc(m * t, 0.25 * g * t);
    let (_, s2) = damped_cos_sinc(m * (2.0 * t), 0.5 * g * t);
    let v = s1 * s1 * (g * g * t * t / 8.0) + s2 * (g * t / 2.0);
    (-0.5 * g * t).exp() + v.re
}

/// `w(τ) = e^{−γτ/2}(γΩ²/μ²) sin²(μτ) = e^{−γτ/2} γΩ²τ² sinc²(μτ)` at
/// resonance.
pub fn waiting_time_density(p: &SystemParams, tau: f64) -> f64 {
    let (_, s) = damped_cos_sinc(mu(p) * tau, 0.25 * p.gamma * tau);
    p.gamma * p.omega * p.omega * tau * tau * (s * s).re
}

/// Solves `survival(τ) = u` for `τ`. Bracketing by doubling, then Newton
/// steps on `dS/dτ = −w` that fall back to bisection whenever they leave the
/// bracket.
pub fn invert_survival(p: &SystemParams, u: f64) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::param("u", format!("{u} not in (0, 1)")));
    }
    if p.omega == 0.0 {
        return Ok(f64::INFINITY);
    }
    let f = |t: f64| survival(p, t) - u;
    let mut lo = 0.0;
    let mut hi = 1.0 / p.gamma;
    let mut doublings = 0;
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 || !hi.is_finite() {
            return Err(Error::RootFinding { u, lo, hi });
        }
    }
    let mut t = 0.5 * (lo + hi);
    for _ in 0..300 {
        let ft = f(t);
        if ft > 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo < 1e-10 || ft == 0.0 {
            return Ok(t);
        }
        let w = waiting_density(p, t);
        let newton = t + ft / w;
        let next = if w > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - t).abs() < 1e-13 * t.max(1.0) {
            return Ok(next);
        }
        t = next;
    }
    Err(Error::RootFinding { u, lo, hi })
}

/// Draws one waiting time by inverting the survival function.
pub fn sample_waiting_time<R: Rng + ?Sized>(p: &SystemParams, rng: &mut R) -> Result<f64> {
    let u: f64 = rng.sample(Open01);
    invert_survival(p, u)
}

fn require_ideal(p: &SystemParams) -> Result<()> {
    if !p.is_ideal() {
        return Err(Error::param(
            "efficiency",
            "pure-state jump trajectories need efficiency = 1 and thermal = 0",
        ));
    }
    Ok(())
}

/// Pure-state trajectory from `|↓⟩` with exact waiting-time sampling.
pub fn simulate_pure_jump<R: Rng + ?Sized>(p: &SystemParams, rng: &mut R) -> Result<TrajectoryRecord> {
    p.validate()?;
    require_ideal(p)?;
    let grid = p.sample_grid();
    let mut clicks = ClickRecord::new(p.t_max);
    let mut rec = TrajectoryRecord::with_capacity(grid, None);
    let mut reset = 0.0;
    let mut next = sample_waiting_time(p, rng)?;
    for k in 0..grid.len {
        let t = grid.at(k);
        while next <= t {
            clicks.times.push(next);
            reset = next;
            next = reset + sample_waiting_time(p, rng)?;
        }
        let mut psi = no_jump_amplitudes(p, t - reset);
        psi.normalize()?;
        rec.push(psi.bloch(), 1.0);
    }
    while next <= p.t_max {
        clicks.times.push(next);
        next += sample_waiting_time(p, rng)?;
    }
    rec.clicks = Some(clicks);
    Ok(rec)
}

/// Largest step allowed for the stepped jump scheme: `min(10⁻³, 0.02/Ω)`.
pub fn max_jump_step(p: &SystemParams) -> f64 {
    p.resolved_step(1e-3, 0.02)
}

/// Conditional density-matrix trajectory for `η < 1` and/or `n̄ > 0`.
///
/// Each step of length `dt` either registers a click with probability
/// `p_c = ηγ(n̄+1)⟨σ+σ−⟩dt`, collapsing to `|↓⟩⟨↓|` and stamping the click at
/// the end of the step, or advances one RK4 step under `ℓ′` followed by
/// renormalization.
pub fn simulate_mixed_jump<R: Rng + ?Sized>(p: &SystemParams, rng: &mut R) -> Result<TrajectoryRecord> {
    p.validate()?;
    let hmax = max_jump_step(p);
    if p.dt > hmax * (1.0 + 1e-9) {
        return Err(Error::param("dt", format!("must be <= {hmax:.3e} for this drive")));
    }
    let grid = p.sample_grid();
    let stride = p.sample_stride();
    let n_steps = (grid.len - 1) * stride;
    let step = rk4_step_matrix(&Lindbladian::conditional(p).generator(), p.dt);
    let rate = p.efficiency * p.gamma * (p.thermal + 1.0) * p.dt;
    let ground = Vector4::new(1.0, 0.0, 0.0, -1.0);

    let mut clicks = ClickRecord::new(p.t_max);
    let mut rec = TrajectoryRecord::with_capacity(grid, None);
    let mut v = ground;
    let push = |rec: &mut TrajectoryRecord, v: &Vector4<f64>| {
        let b = BlochVector::new(v[1], v[2], v[3]);
        rec.push(b, b.purity());
    };
    push(&mut rec, &v);
    for n in 1..=n_steps {
        let pc = rate * 0.5 * (1.0 + v[3]);
        if pc >= 0.1 {
            return Err(Error::StepTooLarge { p: pc, t: (n - 1) as f64 * p.dt });
        }
        let u: f64 = rng.random();
        if u < pc {
            v = ground;
            clicks.times.push(n as f64 * p.dt);
        } else {
            v = step * v;
            let tr = v[0];
            if !(tr > 1e-12) {
                return Err(Error::NormCollapse { norm: tr });
            }
            v /= tr;
        }
        if n % stride == 0 {
            push(&mut rec, &v);
        }
    }
    rec.clicks = Some(clicks);
    Ok(rec)
}

/// Exact sampler in the ideal case, stepped density-matrix scheme otherwise.
pub fn simulate_jump<R: Rng + ?Sized>(p: &SystemParams, rng: &mut R) -> Result<TrajectoryRecord> {
    if p.is_ideal() {
        simulate_pure_jump(p, rng)
    } else {
        simulate_mixed_jump(p, rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::trajectory_rng;

    fn params(y: f64) -> SystemParams {
        SystemParams::with_drive_strength(y)
    }

    /// Composite Simpson on `[a, b]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for k in 1..n {
            s += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn closed_forms_match_propagator() {
        for y in [0.2, 8f64.sqrt() / 4.0 * 2.0, 1.0, 10.0, 30.0] {
            let p = params(y);
            for k in 0..200 {
                let t = k as f64 * 0.037;
                assert!((null_probability(&p, t) - survival(&p, t)).abs() < 1e-12, "Y={y} t={t}");
                assert!((waiting_time_density(&p, t) - waiting_density(&p, t)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_point_uses_limit() {
        let mut p = SystemParams::default();
        p.omega = p.gamma / 4.0;
        assert!(mu(&p).norm() < 1e-15);
        for t in [0.0, 0.5, 3.0] {
            let expect = p.gamma * p.omega * p.omega * t * t * (-0.5 * p.gamma * t).exp();
            assert!((waiting_time_density(&p, t) - expect).abs() < 1e-15);
            let p0 = (-0.5 * t).exp() * (1.0 + t / 2.0 + t * t / 8.0);
            assert!((null_probability(&p, t) - p0).abs() < 1e-14);
        }
    }

    #[test]
    fn density_is_minus_derivative_of_survival() {
        for y in [0.5, 10.0] {
            let p = params(y);
            let h = 1e-5;
            for k in 1..300 {
                let t = k as f64 * 0.02;
                let fd = -(null_probability(&p, t + h) - null_probability(&p, t - h)) / (2.0 * h);
                assert!((fd - waiting_time_density(&p, t)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn density_normalized() {
        for y in [0.5, 10.0] {
            let p = params(y);
            let total = simpson(|t| waiting_time_density(&p, t), 0.0, 400.0, 2_000_000);
            assert!((total - 1.0).abs() < 1e-8, "Y={y}: {total}");
        }
    }

    #[test]
    fn null_probability_limits() {
        let p = params(10.0);
        assert!((null_probability(&p, 0.0) - 1.0).abs() < 1e-15);
        assert!(null_probability(&p, 100.0) < 1e-20);
        let strong = params(200.0);
        for t in [0.5, 1.0, 2.0] {
            let dev = (null_probability(&strong, t) - (-0.5 * t).exp()).abs();
            assert!(dev < 2.0 * strong.gamma / strong.omega);
        }
        assert_eq!(waiting_time_density(&p, 0.0), 0.0);
    }

    #[test]
    fn inversion_round_trip() {
        let p = params(10.0);
        let t = invert_survival(&p, 0.5).unwrap();
        assert!((null_probability(&p, t) - 0.5).abs() < 1e-9);
        for u in [1e-12, 1e-3, 0.3, 0.999_999] {
            let t = invert_survival(&p, u).unwrap();
            assert!((survival(&p, t) - u).abs() < 1e-9 * u.max(1e-3));
        }
        let weak = params(2.0 * 2f64.sqrt() / 56.0);
        let t = invert_survival(&weak, 0.01).unwrap();
        assert!((survival(&weak, t) - 0.01).abs() < 1e-9);
    }

    #[test]
    fn dark_atom_never_clicks() {
        let mut p = params(10.0);
        p.omega = 0.0;
        let rec = simulate_pure_jump(&p, &mut trajectory_rng(1, 0)).unwrap();
        assert!(rec.clicks.unwrap().is_empty());
        assert!(rec.bloch.iter().all(|b| b.z == -1.0));
        let mut m = p;
        m.efficiency = 0.5;
        let rec = simulate_mixed_jump(&m, &mut trajectory_rng(1, 0)).unwrap();
        assert!(rec.clicks.unwrap().is_empty());
        assert!(rec.bloch.iter().all(|b| (b.z + 1.0).abs() < 1e-12));
    }

    #[test]
    fn pure_trajectory_invariants() {
        let p = params(10.0);
        for k in 0..20 {
            let rec = simulate_pure_jump(&p, &mut trajectory_rng(3, k)).unwrap();
            assert_eq!(rec.bloch.len(), rec.grid.len);
            for b in &rec.bloch {
                assert!(b.x.abs() < 1e-12);
                assert!((b.norm_sqr() - 1.0).abs() < 1e-9);
            }
            rec.clicks.unwrap().validate().unwrap();
        }
    }

    #[test]
    fn detuned_trajectory_leaves_the_yz_plane() {
        let mut p = params(5.0);
        p.detuning = -3.2;
        let rec = simulate_pure_jump(&p, &mut trajectory_rng(3, 0)).unwrap();
        assert!(rec.bloch.iter().any(|b| b.x.abs() > 0.05));
        assert!(rec.bloch.iter().all(|b| (b.norm_sqr() - 1.0).abs() < 1e-9));
    }

    #[test]
    fn mixed_scheme_guards() {
        let mut p = params(10.0);
        p.efficiency = 1.0;
        p.thermal = 300.0;
        p.omega = 1.0;
        // thermal pumping drives P↑ to ~1/2, so p_c = ηγ(n̄+1)·P↑·dt ≈ 0.15
        let e = simulate_mixed_jump(&p, &mut trajectory_rng(0, 0)).unwrap_err();
        assert!(matches!(e, Error::StepTooLarge { .. }));
        let mut q = params(10.0);
        q.efficiency = 0.5;
        q.dt = 5e-3;
        q.sample_dt = 1e-2;
        assert!(simulate_mixed_jump(&q, &mut trajectory_rng(0, 0)).is_err());
    }

    #[test]
    fn mixed_purity_bounded() {
        let mut p = params(10.0);
        p.efficiency = 0.5;
        p.thermal = 0.1;
        let rec = simulate_mixed_jump(&p, &mut trajectory_rng(9, 1)).unwrap();
        assert!(rec.purity.iter().all(|&q| q <= 1.0 + 1e-12 && q >= 0.5 - 1e-12));
        rec.clicks.unwrap().validate().unwrap();
        let mut ideal = params(10.0);
        ideal.efficiency = 1.0;
        let rec = simulate_mixed_jump(&ideal, &mut trajectory_rng(9, 1)).unwrap();
        assert!(rec.purity.iter().all(|&q| (q - 1.0).abs() < 1e-9));
    }

    #[test]
    fn ideal_requirement_enforced() {
        let mut p = params(10.0);
        p.efficiency = 0.9;
        assert!(simulate_pure_jump(&p, &mut trajectory_rng(0, 0)).is_err());
    }
}
