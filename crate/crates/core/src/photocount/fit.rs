//! Weighted least-squares fit of the corrected `g²` model with a restarted
//! Nelder–Mead simplex.
//!
//! The simplex works on unconstrained coordinates: `Ω = |u|`, `c = |w|`,
//! `SNR = e^v`; the detuning and `a`, `b` are used as they are.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{g2_model, G2Estimate, G2Params};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Which of `(Ω, Δ, a, b, c, SNR)` are varied.
    pub free: [bool; 6],
    pub max_restarts: usize,
    pub max_iter: usize,
    /// Fit only bins with `τ` in this range.
    pub tau_range: (f64, f64),
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { free: [true; 6], max_restarts: 30, max_iter: 20_000, tau_range: (0.0, f64::INFINITY) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: G2Params,
    /// Standard errors, zero for fixed parameters.
    pub stderr: [f64; 6],
    pub free: [bool; 6],
    pub chi2: f64,
    pub dof: usize,
    pub chi2_red: f64,
    /// `√χ²`.
    pub residual_norm: f64,
    /// Covariance of the free parameters in the order of `free`.
    pub covariance: Vec<Vec<f64>>,
    pub restarts: usize,
}

fn to_natural(z: &[f64], base: &[f64; 6], free: &[bool; 6]) -> [f64; 6] {
    let mut v = *base;
    let mut k = 0;
    for i in 0..6 {
        if free[i] {
            v[i] = match i {
                0 | 4 => z[k].abs(),
                5 => z[k].exp(),
                _ => z[k],
            };
            k += 1;
        }
    }
    v
}

fn to_internal(v: &[f64; 6], free: &[bool; 6]) -> Vec<f64> {
    (0..6)
        .filter(|&i| free[i])
        .map(|i| match i {
            5 => v[i].ln(),
            _ => v[i],
        })
        .collect()
}

struct Data {
    tau: Vec<f64>,
    g2: Vec<f64>,
    err: Vec<f64>,
}

impl Data {
    fn residuals(&self, v: &[f64; 6]) -> Option<Vec<f64>> {
        let m = g2_model(&self.tau, &G2Params::from_array(*v)).ok()?;
        let r: Vec<f64> = m.iter().zip(&self.g2).zip(&self.err).map(|((m, g), e)| (g - m) / e).collect();
        r.iter().all(|x| x.is_finite()).then_some(r)
    }

    fn chi2(&self, v: &[f64; 6]) -> f64 {
        self.residuals(v).map_or(f64::INFINITY, |r| r.iter().map(|x| x * x).sum())
    }
}

/// Plain Nelder–Mead from `x0`; returns the best vertex and its value.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], max_iter: usize) -> (Vec<f64>, f64) {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += if x[i].abs() > 1e-3 { 0.1 * x[i].abs() } else { 0.05 };
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let spread = values[n] - values[0];
        let size = simplex[1..].iter().flat_map(|x| x.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs())).fold(0.0, f64::max);
        if spread <= 1e-15 * values[0].abs() + 1e-30 && size < 1e-12 {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
    (simplex[best].clone(), values[best])
}

/// Covariance `(JᵀJ)⁻¹·χ²_red` of the free natural parameters from a
/// central-difference Jacobian of the weighted residuals.
fn covariance(data: &Data, v: &[f64; 6], free: &[bool; 6], chi2_red: f64) -> Option<DMatrix<f64>> {
    let idx: Vec<usize> = (0..6).filter(|&i| free[i]).collect();
    let n = data.tau.len();
    let mut j = DMatrix::zeros(n, idx.len());
    for (col, &i) in idx.iter().enumerate() {
        let h = 1e-6 * v[i].abs().max(1e-3);
        let mut up = *v;
        let mut dn = *v;
        up[i] += h;
        dn[i] -= h;
        if i == 4 {
            dn[i] = dn[i].max(0.0);
        }
        let (ru, rd) = (data.residuals(&up)?, data.residuals(&dn)?);
        let width = up[i] - dn[i];
        for k in 0..n {
            j[(k, col)] = (ru[k] - rd[k]) / width;
        }
    }
    let jtj = j.transpose() * &j;
    jtj.try_inverse().map(|inv| inv * chi2_red.max(0.0))
}

/// Fits the model to `est` starting from `guess`. Parameters marked fixed in
/// `opts.free` keep their guessed values. The sign of the detuning is taken
/// from the guess, since `g²` depends on `Δ²` only.
pub fn fit_g2(est: &G2Estimate, guess: &G2Params, opts: &FitOptions) -> Result<FitResult> {
    let keep: Vec<usize> = (0..est.len()).filter(|&k| est.tau[k] >= opts.tau_range.0 && est.tau[k] <= opts.tau_range.1).collect();
    let data = Data {
        tau: keep.iter().map(|&k| est.tau[k]).collect(),
        g2: keep.iter().map(|&k| est.g2[k]).collect(),
        err: keep.iter().map(|&k| est.err[k]).collect(),
    };
    let n_free = opts.free.iter().filter(|&&f| f).count();
    if n_free == 0 {
        return Err(Error::param("free", "no free parameters"));
    }
    if data.tau.len() < 8 * n_free {
        return Err(Error::param("bins", format!("{} bins for {n_free} free parameters, need 8x", data.tau.len())));
    }
    if !(guess.snr_det > 0.0) {
        return Err(Error::param("snr_det", "initial guess must be positive"));
    }
    let base = guess.to_array();
    let objective = |z: &[f64]| data.chi2(&to_natural(z, &base, &opts.free));
    let mut z = to_internal(&base, &opts.free);
    let mut best = objective(&z);
    let mut converged = false;
    let mut restarts = 0;
    while restarts < opts.max_restarts {
        let (zn, fnew) = nelder_mead(&objective, &z, opts.max_iter);
        restarts += 1;
        let improved = best - fnew;
        if fnew <= best {
            z = zn;
            best = fnew;
        }
        if improved.abs() <= 1e-10 * best + 1e-24 {
            converged = true;
            break;
        }
    }
    let mut v = to_natural(&z, &base, &opts.free);
    if guess.detuning < 0.0 && v[1] > 0.0 || guess.detuning > 0.0 && v[1] < 0.0 {
        v[1] = -v[1];
    }
    if !converged || !best.is_finite() {
        return Err(Error::FitFailed { restarts, chi2: best, best: v.to_vec() });
    }
    let dof = data.tau.len() - n_free;
    let chi2_red = best / dof as f64;
    let cov = covariance(&data, &v, &opts.free, chi2_red);
    let mut stderr = [0.0; 6];
    let mut covariance = Vec::new();
    match cov {
        Some(c) => {
            let mut k = 0;
            for i in 0..6 {
                if opts.free[i] {
                    stderr[i] = c[(k, k)].max(0.0).sqrt();
                    k += 1;
                }
            }
            for r in 0..c.nrows() {
                covariance.push(c.row(r).iter().copied().collect());
            }
        }
        None => {
            for i in 0..6 {
                if opts.free[i] {
                    stderr[i] = f64::INFINITY;
                }
            }
        }
    }
    Ok(FitResult {
        params: G2Params::from_array(v),
        stderr,
        free: opts.free,
        chi2: best,
        dof,
        chi2_red,
        residual_norm: best.sqrt(),
        covariance,
        restarts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_free(truth: &G2Params) -> G2Estimate {
        let tau: Vec<f64> = (0..300).map(|k| (k as f64 + 0.5) * 0.04).collect();
        let g2 = g2_model(&tau, truth).unwrap();
        G2Estimate {
            err: vec![0.01; tau.len()],
            counts: vec![0; tau.len()],
            tau,
            g2,
            bin_width: 0.04,
            expected: 1.0,
        }
    }

    #[test]
    fn exact_recovery_without_noise() {
        let truth = G2Params { omega: 3.3, detuning: -3.2, a: 1.0, b: 0.0, c: 0.0, snr_det: 18.0 };
        let est = noise_free(&truth);
        let guess = G2Params { omega: 3.0, detuning: -2.8, a: 0.95, b: 0.0, c: 0.0, snr_det: 12.0 };
        let opts = FitOptions { free: [true, true, true, false, false, true], ..Default::default() };
        let fit = fit_g2(&est, &guess, &opts).unwrap();
        let got = fit.params.to_array();
        let want = truth.to_array();
        for i in [0, 1, 2, 5] {
            assert!((got[i] - want[i]).abs() <= 1e-6 * want[i].abs(), "{}: {} vs {}", G2Params::NAMES[i], got[i], want[i]);
        }
        assert!(fit.chi2 < 1e-10);
    }

    #[test]
    fn recovers_motion_envelope() {
        let truth = G2Params { omega: 3.3, detuning: -3.2, a: 1.05, b: 0.4, c: 0.3, snr_det: 18.0 };
        let est = noise_free(&truth);
        let guess = G2Params { omega: 3.1, detuning: -3.0, a: 1.0, b: 0.3, c: 0.2, snr_det: 15.0 };
        let fit = fit_g2(&est, &guess, &FitOptions::default()).unwrap();
        for (g, w) in fit.params.to_array().iter().zip(truth.to_array()) {
            assert!((g - w).abs() <= 1e-5 * w.abs().max(1.0), "{g} vs {w}");
        }
    }

    #[test]
    fn too_few_bins() {
        let truth = G2Params::ideal(3.3, -3.2);
        let mut est = noise_free(&G2Params { snr_det: 18.0, ..truth });
        est.tau.truncate(20);
        est.g2.truncate(20);
        est.err.truncate(20);
        assert!(fit_g2(&est, &G2Params { snr_det: 18.0, ..truth }, &FitOptions::default()).is_err());
    }
}
