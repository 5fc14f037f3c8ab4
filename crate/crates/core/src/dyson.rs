//! Renewal-equation engine for nonlinear averages under ideal direct
//! detection.
//!
//! Every jump resets the atom to `|↓⟩`, so the trajectory ensemble is a
//! renewal process. With `O_m(t) = p0(t)·⟨O⟩_c(t)^m`, where `⟨O⟩_c` is the
//! expectation in the normalized no-jump state, the m-th power average is
//!
//! `mean(⟨O⟩^m)(t) = O_m(t) + ∫₀ᵗ O_m(t − s) h(s) ds`,
//!
//! where the jump density `h` solves `h = w + w∗h`. Both integrals are done
//! with the trapezoidal rule on a uniform grid.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::jump::{mu, no_jump_amplitudes, waiting_time_density};
use crate::params::{SystemParams, TimeGrid};
use crate::state::{Observable, QuantumState};

fn require_ideal(p: &SystemParams) -> Result<()> {
    if !p.is_ideal() {
        return Err(Error::param("efficiency", "the renewal engine needs efficiency = 1 and thermal = 0"));
    }
    Ok(())
}

/// `O_m(t) = [Tr(O e^{ℓt}|↓⟩⟨↓|)]^m / p0(t)^{m−1}`, evaluated as
/// `p0·⟨O⟩_c^m`.
pub fn om_kernel(p: &SystemParams, t: f64, obs: Observable, m: u32) -> Result<f64> {
    if m == 0 {
        return Err(Error::param("m", "must be positive"));
    }
    let psi = no_jump_amplitudes(p, t);
    let p0 = psi.norm_sqr();
    if !(p0 > f64::MIN_POSITIVE) {
        // p0 ≈ e^{−γt/2} at strong drive
        let usable = 2.0 * (f64::MIN_POSITIVE.ln().abs()) / p.gamma;
        return Err(Error::Underflow { t, usable });
    }
    let c = QuantumState::expect_op(&psi, &obs.matrix()).re;
    Ok(p0 * c.powi(m as i32))
}

/// Closed form of `[Tr(σz e^{ℓt}|↓⟩⟨↓|)]²` at resonance:
/// `e^{−γt}{1/2 + γ²/(32μ²) + ½[1 − γ²/(16μ²)]cos 4μt + (γ/4μ) sin 4μt}`.
pub fn sz_squared_numerator(p: &SystemParams, t: f64) -> f64 {
    let g = p.gamma;
    let m = mu(p);
    let m2 = m * m;
    let ph = m * (4.0 * t);
    let v: Complex64 = 0.5 + g * g / (32.0 * m2) + 0.5 * (1.0 - g * g / (16.0 * m2)) * ph.cos() + g / (4.0 * m) * ph.sin();
    (-g * t).exp() * v.re
}

/// Waiting-time density and jump (renewal) density on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalGrid {
    pub grid: TimeGrid,
    pub kernel: Vec<f64>,
    pub density: Vec<f64>,
}

/// Largest grid spacing accepted by the renewal solver.
pub fn max_renewal_step(p: &SystemParams) -> f64 {
    p.resolved_step(1e-3, 0.02)
}

fn check_step(p: &SystemParams, h: f64) -> Result<()> {
    let max = max_renewal_step(p);
    if h > max * (1.0 + 1e-9) || !(h > 0.0) {
        return Err(Error::GridTooCoarse { h, max });
    }
    Ok(())
}

/// `∫₀^{t_n} f(t_n − s) g(s) ds` by the trapezoidal rule for every `n`.
fn trapezoid_convolution(f: &[f64], g: &[f64], h: f64) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for k in 1..n {
        let mut s = 0.5 * (f[k] * g[0] + f[0] * g[k]);
        for j in 1..k {
            s += f[k - j] * g[j];
        }
        out[k] = h * s;
    }
    out
}

impl RenewalGrid {
    /// Solves `h(t_n) = w(t_n) + ∫₀^{t_n} w(t_n − s) h(s) ds` forward in
    /// time. `w(0) = 0` makes each step explicit.
    pub fn solve(p: &SystemParams, grid: TimeGrid) -> Result<Self> {
        p.validate()?;
        require_ideal(p)?;
        check_step(p, grid.step)?;
        // fail before the quadratic solve rather than after it
        om_kernel(p, grid.last(), Observable::SigmaZ, 1)?;
        let h = grid.step;
        let n = grid.len;
        let kernel: Vec<f64> = (0..n).map(|k| waiting_time_density(p, grid.at(k))).collect();
        let mut density = vec![0.0; n];
        density[0] = kernel[0];
        for k in 1..n {
            let mut s = 0.5 * kernel[k] * density[0];
            for j in 1..k {
                s += kernel[k - j] * density[j];
            }
            let rhs = kernel[k] + h * s;
            density[k] = rhs / (1.0 - 0.5 * h * kernel[0]);
        }
        Ok(RenewalGrid { grid, kernel, density })
    }

    /// `mean(⟨O⟩^m)` on the solver grid.
    pub fn average(&self, p: &SystemParams, obs: Observable, m: u32) -> Result<Vec<f64>> {
        let om: Vec<f64> = (0..self.grid.len)
            .map(|k| om_kernel(p, self.grid.at(k), obs, m))
            .collect::<Result<_>>()?;
        let conv = trapezoid_convolution(&om, &self.density, self.grid.step);
        Ok(om.iter().zip(&conv).map(|(a, b)| a + b).collect())
    }
}

/// `mean(⟨O⟩^m)(t)` on `grid` via the renewal equation.
pub fn renewal_average(p: &SystemParams, obs: Observable, m: u32, grid: TimeGrid) -> Result<Vec<f64>> {
    RenewalGrid::solve(p, grid)?.average(p, obs, m)
}

/// Mean and QTAV of `⟨O⟩` from the renewal route.
#[derive(Debug, Clone, PartialEq)]
pub struct RenewalCurves {
    pub grid: TimeGrid,
    pub mean: Vec<f64>,
    pub second: Vec<f64>,
    pub qtav: Vec<f64>,
}

impl RenewalCurves {
    /// Keeps every `stride`-th point.
    pub fn subsample(&self, stride: usize) -> RenewalCurves {
        let pick = |v: &[f64]| v.iter().step_by(stride).copied().collect::<Vec<_>>();
        RenewalCurves {
            grid: TimeGrid::new(self.grid.step * stride as f64, (self.grid.len - 1) / stride + 1),
            mean: pick(&self.mean),
            second: pick(&self.second),
            qtav: pick(&self.qtav),
        }
    }
}

pub fn renewal_qtav(p: &SystemParams, obs: Observable, grid: TimeGrid) -> Result<RenewalCurves> {
    let r = RenewalGrid::solve(p, grid)?;
    let mean = r.average(p, obs, 1)?;
    let second = r.average(p, obs, 2)?;
    let qtav = second.iter().zip(&mean).map(|(s, m)| s - m * m).collect();
    Ok(RenewalCurves { grid, mean, second, qtav })
}

/// Strong-drive asymptote of the QTAV of `σz` including first-order
/// corrections in `γ/Ω`:
/// `½{1 + e^{−γt/2}cos 4Ωt + (γ/8Ω)e^{−γt/2}[4 sin 4Ωt − sin 6Ωt − 3 sin 2Ωt]}`.
/// Requires `Y ≥ 5`; see [`strong_drive_warning`] below `Y = 10`.
pub fn asymptotic_var_strong(p: &SystemParams, t: f64) -> Result<f64> {
    if p.drive_strength() < 5.0 {
        return Err(Error::param("omega", "strong-drive asymptote needs Y >= 5"));
    }
    let (g, o) = (p.gamma, p.omega);
    let e = (-0.5 * g * t).exp();
    let first = 4.0 * (4.0 * o * t).sin() - (6.0 * o * t).sin() - 3.0 * (2.0 * o * t).sin();
    Ok(0.5 * (1.0 + e * (4.0 * o * t).cos() + g / (8.0 * o) * e * first))
}

/// The same asymptote with the `sin 2Ωt` terms kept apart:
/// `½{1 + e^{−γt/2}cos 4Ωt + (γ/8Ω)e^{−γt/2}[4 sin 4Ωt − sin 6Ωt − sin 2Ωt]
///   − (γ/4Ω)e^{−γt/2} sin 2Ωt}`.
pub fn asymptotic_var_strong_split(p: &SystemParams, t: f64) -> f64 {
    let (g, o) = (p.gamma, p.omega);
    let e = (-0.5 * g * t).exp();
    let bracket = 4.0 * (4.0 * o * t).sin() - (6.0 * o * t).sin() - (2.0 * o * t).sin();
    0.5 * (1.0 + e * (4.0 * o * t).cos() + g / (8.0 * o) * e * bracket - g / (4.0 * o) * e * (2.0 * o * t).sin())
}

pub fn strong_drive_warning(p: &SystemParams) -> Option<String> {
    let y = p.drive_strength();
    (y < 10.0).then(|| format!("Y = {y:.2} is below 10; the strong-drive asymptote is only qualitative"))
}

/// Weak-drive value of the QTAV with its error scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakDriveEstimate {
    pub value: f64,
    /// Order of the neglected terms, `(Ω/γ)²`.
    pub error_bound: f64,
}

/// `Var(σz) = 0 + O((Ω/γ)²)` for `Ω ≤ 0.1γ`.
pub fn asymptotic_var_weak(p: &SystemParams, _t: f64) -> Result<WeakDriveEstimate> {
    if p.omega > 0.1 * p.gamma {
        return Err(Error::param("omega", "weak-drive limit needs omega <= 0.1 gamma"));
    }
    Ok(WeakDriveEstimate { value: 0.0, error_bound: (p.omega / p.gamma).powi(2) })
}

/// Coefficients of the strong-drive template
/// `1/2 + ¼e^{−3γt/4}[C1 cos C_Ω t + C2 sin C_Ω t]
///  + ¼e^{−γt/2}[C3 cos 4Ωt + C4 sin 4Ωt + C5 cos 6Ωt + C6 sin 6Ωt]`
/// fitted to a curve of `mean(⟨σz⟩²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemplateFit {
    pub c: [f64; 6],
    pub c_omega: f64,
    pub rms: f64,
}

fn template_columns(t: f64, g: f64, o: f64, c_omega: f64) -> [f64; 6] {
    let slow = 0.25 * (-0.75 * g * t).exp();
    let fast = 0.25 * (-0.5 * g * t).exp();
    [
        slow * (c_omega * t).cos(),
        slow * (c_omega * t).sin(),
        fast * (4.0 * o * t).cos(),
        fast * (4.0 * o * t).sin(),
        fast * (6.0 * o * t).cos(),
        fast * (6.0 * o * t).sin(),
    ]
}

fn solve_template(p: &SystemParams, t: &[f64], y: &[f64], c_omega: f64) -> Option<([f64; 6], f64)> {
    let n = t.len();
    let mut a = DMatrix::zeros(n, 6);
    let mut b = DVector::zeros(n);
    for k in 0..n {
        let row = template_columns(t[k], p.gamma, p.omega, c_omega);
        for j in 0..6 {
            a[(k, j)] = row[j];
        }
        b[k] = y[k] - 0.5;
    }
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).ok()?;
    let r = &a * &x - &b;
    let rms = (r.norm_squared() / n as f64).sqrt();
    Some(([x[0], x[1], x[2], x[3], x[4], x[5]], rms))
}

/// Linear least squares in `C1…C6` with `C_Ω` chosen by golden-section
/// search in `[1.8Ω, 2.2Ω]`.
pub fn fit_template(p: &SystemParams, t: &[f64], second_power: &[f64]) -> Result<TemplateFit> {
    if t.len() != second_power.len() || t.len() < 12 {
        return Err(Error::GridMismatch);
    }
    let cost = |c: f64| solve_template(p, t, second_power, c).map_or(f64::INFINITY, |s| s.1);
    let (mut lo, mut hi) = (1.8 * p.omega, 2.2 * p.omega);
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    for _ in 0..80 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = cost(x2);
        }
    }
    let c_omega = 0.5 * (lo + hi);
    let (c, rms) = solve_template(p, t, second_power, c_omega).ok_or(Error::FitFailed {
        restarts: 0,
        chi2: f64::INFINITY,
        best: vec![],
    })?;
    Ok(TemplateFit { c, c_omega, rms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jump::null_probability;
    use crate::me::{analytic_inversion, steady_excited};

    fn grid(t_max: f64, h: f64) -> TimeGrid {
        TimeGrid::covering(h, t_max)
    }

    #[test]
    fn kernel_initial_values() {
        let p = SystemParams::with_drive_strength(10.0);
        assert!((om_kernel(&p, 0.0, Observable::SigmaZ, 1).unwrap() + 1.0).abs() < 1e-15);
        assert!((om_kernel(&p, 0.0, Observable::SigmaZ, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!(om_kernel(&p, 1.0, Observable::SigmaZ, 0).is_err());
    }

    #[test]
    fn squared_numerator_closed_form() {
        let p = SystemParams::with_drive_strength(10.0);
        for t in [0.0, 0.13, 0.5, 1.7, 4.0] {
            let via_kernel = om_kernel(&p, t, Observable::SigmaZ, 2).unwrap() * null_probability(&p, t);
            assert!((via_kernel - sz_squared_numerator(&p, t)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn underflow_reported() {
        let p = SystemParams::with_drive_strength(10.0);
        assert!(matches!(om_kernel(&p, 5000.0, Observable::SigmaZ, 2), Err(Error::Underflow { .. })));
    }

    #[test]
    fn first_power_reproduces_inversion() {
        for y in [0.3, 1.0, 10.0, 30.0] {
            let p = SystemParams::with_drive_strength(y);
            let g = grid(6.0, 1e-3);
            let m1 = renewal_average(&p, Observable::SigmaZ, 1, g).unwrap();
            for k in (0..g.len).step_by(10) {
                let dev = (m1[k] - analytic_inversion(&p, g.at(k))).abs();
                assert!(dev < 1e-4, "Y={y} t={} dev={dev}", g.at(k));
            }
            assert_eq!(m1[0], -1.0);
        }
    }

    #[test]
    fn renewal_density_approaches_click_rate() {
        for y in [1.0, 10.0] {
            let p = SystemParams::with_drive_strength(y);
            let r = RenewalGrid::solve(&p, grid(30.0, 1e-3)).unwrap();
            assert!(r.density.iter().all(|&h| h >= 0.0));
            let rate = p.gamma * steady_excited(&p).unwrap();
            let tail = *r.density.last().unwrap();
            assert!((tail - rate).abs() / rate < 0.01, "Y={y}: {tail} vs {rate}");
        }
    }

    #[test]
    fn coarse_grid_rejected() {
        let p = SystemParams::with_drive_strength(30.0);
        assert!(matches!(renewal_average(&p, Observable::SigmaZ, 2, grid(1.0, 2e-3)), Err(Error::GridTooCoarse { .. })));
    }

    #[test]
    fn asymptote_forms_agree() {
        let p = SystemParams::with_drive_strength(30.0);
        for k in 0..1000 {
            let t = k as f64 * 0.01;
            let a = asymptotic_var_strong(&p, t).unwrap();
            assert!((a - asymptotic_var_strong_split(&p, t)).abs() < 1e-14);
        }
        assert!((asymptotic_var_strong(&p, 200.0).unwrap() - 0.5).abs() < 1e-15);
        assert!(asymptotic_var_strong(&SystemParams::with_drive_strength(3.0), 1.0).is_err());
        assert!(strong_drive_warning(&SystemParams::with_drive_strength(7.0)).is_some());
        assert!(strong_drive_warning(&p).is_none());
    }

    #[test]
    fn weak_drive_estimate() {
        let mut p = SystemParams::default();
        p.omega = 1.0 / 56.0;
        let w = asymptotic_var_weak(&p, 3.0).unwrap();
        assert_eq!(w.value, 0.0);
        assert!(w.error_bound < 1e-3);
        p.omega = 0.0;
        assert_eq!(asymptotic_var_weak(&p, 3.0).unwrap().value, 0.0);
        p.omega = 1.0;
        assert!(asymptotic_var_weak(&p, 3.0).is_err());
    }

    #[test]
    fn template_coefficients() {
        let mut c4y = Vec::new();
        for y in [10.0, 30.0] {
            let p = SystemParams::with_drive_strength(y);
            let r = renewal_qtav(&p, Observable::SigmaZ, grid(10.0, 5e-4)).unwrap();
            let keep: Vec<usize> = (0..r.grid.len).filter(|&k| r.grid.at(k) >= 2.0).step_by(4).collect();
            let t: Vec<f64> = keep.iter().map(|&k| r.grid.at(k)).collect();
            let s: Vec<f64> = keep.iter().map(|&k| r.second[k]).collect();
            let fit = fit_template(&p, &t, &s).unwrap();
            assert!((fit.c[2] - 2.0).abs() < 0.25, "Y={y}: C3={}", fit.c[2]);
            assert!((fit.c_omega / p.omega - 2.0).abs() < 0.1);
            c4y.push(fit.c[3] * y);
        }
        // C4 ~ 1/Y: C4·Y roughly constant
        assert!((c4y[0] / c4y[1] - 1.0).abs() < 0.3, "{c4y:?}");
    }
}
