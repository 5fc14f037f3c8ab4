//! Truncated linear hierarchy for ensemble moments of the Bloch coordinates.
//!
//! The conditional state is written as `ρ = Σ_i x_i X_i` in the orthonormal
//! basis `X = {I, σx, σy, σz}/√2`, so `x0 = 1/√2` on every normalized
//! trajectory and only `x1, x2, x3` fluctuate. A moment `E[x1^a x2^b x3^c]`
//! is indexed by its exponent triple, which is the same as a sorted
//! multiset of basis indices. Moments of total degree above the truncation
//! order are set to zero.

pub mod poly;

use std::collections::HashMap;
use std::f64::consts::FRAC_1_SQRT_2;
use std::fmt;
use std::str::FromStr;

use nalgebra::linalg::Schur;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::EnsembleCurve;
use crate::error::{Error, Result};
use crate::me::Lindbladian;
use crate::params::{SystemParams, TimeGrid};
use crate::state::{self, Observable, Op};
use poly::{degree, unit, Exponent, Poly};

pub const DEFAULT_ORDER: usize = 10;
const REMAINDER_TOL: f64 = 1e-12;
const IMAG_TOL: f64 = 1e-12;
const GROWTH_BOUND: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Unraveling {
    /// Direct photodetection.
    Poisson,
    /// Heterodyne detection with complex Wiener noise.
    WienerHeterodyne,
}

impl fmt::Display for Unraveling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unraveling::Poisson => "poisson",
            Unraveling::WienerHeterodyne => "wiener-heterodyne",
        })
    }
}

impl FromStr for Unraveling {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" | "direct" => Ok(Unraveling::Poisson),
            "wiener-heterodyne" | "wiener" | "heterodyne" => Ok(Unraveling::WienerHeterodyne),
            _ => Err(Error::Parse(format!("unknown unraveling `{s}`"))),
        }
    }
}

/// One element of the Hilbert–Schmidt orthonormal basis.
#[derive(Debug, Clone, Copy)]
pub struct BasisOperator {
    pub index: usize,
    pub matrix: Op,
}

pub fn basis() -> [BasisOperator; 4] {
    let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let m = [state::identity(), state::sigma_x(), state::sigma_y(), state::sigma_z()];
    std::array::from_fn(|i| BasisOperator { index: i, matrix: m[i] * s })
}

/// `a_i = Tr(A X_i)`, so that `⟨A⟩ = Σ_i a_i x_i`.
pub fn linear_form(a: &Op) -> [Complex64; 4] {
    let b = basis();
    std::array::from_fn(|i| (a * b[i].matrix).trace())
}

pub fn observable_vector(obs: Observable) -> Result<[f64; 4]> {
    if !obs.is_hermitian() {
        return Err(Error::param("observable", "moment averages need a Hermitian observable"));
    }
    Ok(linear_form(&obs.matrix()).map(|c| c.re))
}

/// The linear form as a polynomial in `x1, x2, x3` with `x0 = 1/√2`.
fn form_poly(a: &[Complex64; 4]) -> Poly {
    Poly::linear(a[0] * FRAC_1_SQRT_2, [a[1], a[2], a[3]])
}

fn coordinate(i: usize) -> Poly {
    if i == 0 {
        Poly::constant(Complex64::new(FRAC_1_SQRT_2, 0.0))
    } else {
        Poly::var(i)
    }
}

/// Coefficient tables of the stochastic equations for `x_i`.
#[derive(Debug, Clone)]
pub struct CoeffTables {
    pub unraveling: Unraveling,
    /// `u[i][j]`: coefficient of `x_j` in `⟨ℓ†(X_i)⟩`.
    pub u: [[f64; 4]; 4],
    /// Poisson: numerator `⟨σ+X_iσ−⟩ − ⟨σ+σ−⟩x_i` of `g^i`, so that
    /// `g^i = noise[i] / (l·x)`. Wiener: `f^i = ⟨X_i(L − ⟨L⟩)⟩`.
    pub noise: [Poly; 4],
    /// `⟨σ+σ−⟩ = l·x`.
    pub l: [f64; 4],
}

impl CoeffTables {
    pub fn l_poly(&self) -> Poly {
        form_poly(&self.l.map(|v| Complex64::new(v, 0.0)))
    }

    pub fn drift_linear(&self, i: usize) -> Poly {
        form_poly(&self.u[i].map(|v| Complex64::new(v, 0.0)))
    }
}

fn require_ideal(p: &SystemParams) -> Result<()> {
    p.validate()?;
    if !p.is_ideal() {
        return Err(Error::param("efficiency", "the moment hierarchy needs efficiency = 1 and thermal = 0"));
    }
    Ok(())
}

pub fn coeff_tables(p: &SystemParams, unraveling: Unraveling) -> Result<CoeffTables> {
    require_ideal(p)?;
    let b = basis();
    let lind = Lindbladian::master(p);
    let mut u = [[0.0; 4]; 4];
    for j in 0..4 {
        let image = lind.apply(&b[j].matrix);
        for i in 0..4 {
            u[i][j] = (b[i].matrix * image).trace().re;
        }
    }
    let sm = state::sigma_minus();
    let sp = state::sigma_plus();
    let l_form = linear_form(&(sp * sm));
    let l = l_form.map(|c| c.re);
    let l_poly = form_poly(&l_form);
    let noise = match unraveling {
        Unraveling::Poisson => std::array::from_fn(|i| {
            let sandwich = form_poly(&linear_form(&(sp * b[i].matrix * sm)));
            &sandwich - &(&l_poly * &coordinate(i))
        }),
        Unraveling::WienerHeterodyne => {
            let sg = Complex64::new(p.gamma.sqrt(), 0.0);
            let mean_l = form_poly(&linear_form(&sm)).scale(sg);
            std::array::from_fn(|i| {
                let xl = form_poly(&linear_form(&(b[i].matrix * sm))).scale(sg);
                &xl - &(&coordinate(i) * &mean_l)
            })
        }
    };
    Ok(CoeffTables { unraveling, u, noise, l })
}

/// All exponent triples of total degree `0..=order`, ordered by degree.
pub fn moment_indices(order: usize) -> Vec<Exponent> {
    let mut out = Vec::new();
    for n in 0..=order {
        for a in (0..=n).rev() {
            for b in (0..=n - a).rev() {
                out.push([a as u8, b as u8, (n - a - b) as u8]);
            }
        }
    }
    out
}

pub fn format_index(e: &Exponent) -> String {
    let mut s = String::from("E[");
    let mut first = true;
    for v in 0..3 {
        for _ in 0..e[v] {
            if !first {
                s.push(' ');
            }
            s.push_str(&format!("x{}", v + 1));
            first = false;
        }
    }
    if first {
        s.push('1');
    }
    s.push(']');
    s
}

#[derive(Debug, Clone)]
pub struct MomentSystem {
    pub unraveling: Unraveling,
    pub order: usize,
    pub indices: Vec<Exponent>,
    pub lookup: HashMap<Exponent, usize>,
    /// `dy/dt = M y`.
    pub generator: DMatrix<f64>,
    pub initial: DVector<f64>,
    pub tables: CoeffTables,
    /// Number of generated terms beyond the truncation order.
    pub dropped_terms: usize,
    /// Largest remainder left by the divisions by `⟨σ+σ−⟩`; zero for the
    /// Wiener hierarchy.
    pub max_remainder: f64,
}

impl MomentSystem {
    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    pub fn index_of(&self, e: Exponent) -> Option<usize> {
        self.lookup.get(&e).copied()
    }
}

/// Right-hand side of `d E[x^e]/dt` as a polynomial in `x`.
fn poisson_rhs(t: &CoeffTables, gamma: f64, e: &Exponent, max_remainder: &mut f64) -> Result<Poly> {
    let n = degree(e);
    let mono = Poly::monomial(*e);
    let l = t.l_poly();
    let mut rhs = Poly::zero();
    for v in 1..=3 {
        if e[v - 1] == 0 {
            continue;
        }
        let drift = &t.drift_linear(v) - &t.noise[v].scale(Complex64::new(gamma, 0.0));
        rhs = &rhs + &(&drift * &mono.derivative(v));
    }
    // ⟨L†L⟩·[Π_k(x_k + g^k) − Π_k x_k] with g^k = noise_k / l
    let mut numerator = Poly::constant(Complex64::new(1.0, 0.0));
    for v in 1..=3 {
        let factor = &(&l * &Poly::var(v)) + &t.noise[v];
        numerator = &numerator * &factor.pow(e[v - 1] as usize);
    }
    let a = t.l[0] * FRAC_1_SQRT_2;
    let b = t.l[3];
    for _ in 1..n {
        let (q, r) = numerator.div_linear_x3(a, b);
        *max_remainder = max_remainder.max(r.max_abs());
        if r.max_abs() > REMAINDER_TOL {
            return Err(Error::NonzeroRemainder { moment: format_index(e), remainder: r.max_abs() });
        }
        numerator = q;
    }
    let jump = &numerator - &(&l * &mono);
    Ok(&rhs + &jump.scale(Complex64::new(gamma, 0.0)))
}

fn wiener_rhs(t: &CoeffTables, e: &Exponent) -> Result<Poly> {
    let mono = Poly::monomial(*e);
    let mut rhs = Poly::zero();
    for v in 1..=3 {
        if e[v - 1] == 0 {
            continue;
        }
        let d = mono.derivative(v);
        rhs = &rhs + &(&t.drift_linear(v) * &d);
        for w in 1..=3 {
            let dd = d.derivative(w);
            if dd.terms.is_empty() {
                continue;
            }
            let fv = &t.noise[v];
            let fw = &t.noise[w];
            let diffusion = &(fv * &fw.conj()) + &(&fv.conj() * fw);
            if diffusion.max_imag() > IMAG_TOL {
                return Err(Error::ComplexDiffusion { moment: format_index(e), imag: diffusion.max_imag() });
            }
            rhs = &rhs + &(&diffusion * &dd).scale(Complex64::new(0.5, 0.0));
        }
    }
    Ok(rhs)
}

pub fn build_system(p: &SystemParams, unraveling: Unraveling, order: usize) -> Result<MomentSystem> {
    if order < 2 {
        return Err(Error::param("order", "truncation order must be at least 2"));
    }
    let tables = coeff_tables(p, unraveling)?;
    let indices = moment_indices(order);
    let lookup: HashMap<Exponent, usize> = indices.iter().enumerate().map(|(k, e)| (*e, k)).collect();
    let dim = indices.len();
    let mut generator = DMatrix::zeros(dim, dim);
    let mut dropped_terms = 0;
    let mut max_remainder = 0.0;
    for (row, e) in indices.iter().enumerate() {
        if degree(e) == 0 {
            continue;
        }
        let rhs = match unraveling {
            Unraveling::Poisson => poisson_rhs(&tables, p.gamma, e, &mut max_remainder)?,
            Unraveling::WienerHeterodyne => wiener_rhs(&tables, e)?,
        };
        if rhs.max_imag() > IMAG_TOL {
            return Err(Error::ComplexDiffusion { moment: format_index(e), imag: rhs.max_imag() });
        }
        for (f, c) in &rhs.terms {
            match lookup.get(f) {
                Some(&col) => generator[(row, col)] += c.re,
                None => dropped_terms += 1,
            }
        }
    }
    let ground = [0.0, 0.0, -FRAC_1_SQRT_2];
    let initial = DVector::from_iterator(dim, indices.iter().map(|e| (0..3).map(|v| ground[v].powi(e[v] as i32)).product()));
    Ok(MomentSystem { unraveling, order, indices, lookup, generator, initial, tables, dropped_terms, max_remainder })
}

/// Moment vectors on a uniform grid.
#[derive(Debug, Clone)]
pub struct MomentTrajectory {
    pub grid: TimeGrid,
    pub values: Vec<DVector<f64>>,
    /// Set when some moment exceeds `GROWTH_BOUND · 2^{−deg/2}`. Any
    /// physical Bloch vector obeys `|E[x^e]| ≤ 2^{−deg/2}`; the top-degree
    /// moments of a hard-truncated system overshoot that somewhat, growth
    /// well beyond it means the order is too low.
    pub truncation_suspect: bool,
}

impl MomentTrajectory {
    pub fn moment(&self, sys: &MomentSystem, e: Exponent) -> Option<Vec<f64>> {
        let k = sys.index_of(e)?;
        Some(self.values.iter().map(|y| y[k]).collect())
    }
}

pub fn integrate(sys: &MomentSystem, grid: TimeGrid) -> Result<MomentTrajectory> {
    if grid.len == 0 || !(grid.step > 0.0) {
        return Err(Error::BadGrid);
    }
    let step = (&sys.generator * grid.step).exp();
    let mut values = Vec::with_capacity(grid.len);
    let mut y = sys.initial.clone();
    values.push(y.clone());
    for _ in 1..grid.len {
        y = &step * &y;
        values.push(y.clone());
    }
    let bounds: Vec<f64> = sys.indices.iter().map(|e| GROWTH_BOUND * 0.5f64.powf(degree(e) as f64 / 2.0)).collect();
    let truncation_suspect = values.iter().any(|y| y.iter().zip(&bounds).any(|(v, b)| !(v.abs() <= *b)));
    Ok(MomentTrajectory { grid, values, truncation_suspect })
}

fn linear_expectation(sys: &MomentSystem, y: &DVector<f64>, a: &[f64; 4]) -> f64 {
    a[0] * FRAC_1_SQRT_2 + (1..=3).map(|v| a[v] * y[sys.lookup[&unit(v)]]).sum::<f64>()
}

fn quadratic_expectation(sys: &MomentSystem, y: &DVector<f64>, a: &[f64; 4]) -> f64 {
    let mut s = a[0] * a[0] * 0.5;
    for v in 1..=3 {
        s += 2.0 * a[0] * FRAC_1_SQRT_2 * a[v] * y[sys.lookup[&unit(v)]];
        for w in 1..=3 {
            let mut e = unit(v);
            e[w - 1] += 1;
            s += a[v] * a[w] * y[sys.lookup[&e]];
        }
    }
    s
}

/// Mean and QTAV of `⟨A⟩ = a·x` from integrated moments. Standard errors
/// are zero.
pub fn qtav_from_moments(sys: &MomentSystem, traj: &MomentTrajectory, a: &[f64; 4]) -> EnsembleCurve {
    let n = traj.values.len();
    let mean: Vec<f64> = traj.values.iter().map(|y| linear_expectation(sys, y, a)).collect();
    let second: Vec<f64> = traj.values.iter().map(|y| quadratic_expectation(sys, y, a)).collect();
    EnsembleCurve {
        t: traj.grid.times(),
        qtav: second.iter().zip(&mean).map(|(s, m)| s - m * m).collect(),
        mean,
        stderr_mean: vec![0.0; n],
        stderr_qtav: vec![0.0; n],
        n_traj: 0,
        m_moments: Some(vec![]),
    }
}

/// Eigenvalues of the generator. The constant moment has an all-zero row,
/// so the spectrum is `{0}` plus that of the remaining block.
pub fn spectrum(sys: &MomentSystem) -> Result<Vec<Complex64>> {
    let n = sys.dim();
    let block = sys.generator.view((1, 1), (n - 1, n - 1)).clone_owned();
    for eps in [1e-13, 1e-12, 1e-11, 1e-10] {
        if let Some(schur) = Schur::try_new(block.clone(), eps, 100_000) {
            let mut ev = vec![Complex64::new(0.0, 0.0)];
            ev.extend(schur.complex_eigenvalues().iter().copied());
            ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
            return Ok(ev);
        }
    }
    Err(Error::param("generator", "Schur iteration did not converge"))
}

/// Largest entry of the degree-1 rows that differs from the Bloch generator
/// `a` (in `(1, x, y, z)` order), including any coupling to higher degrees.
pub fn degree_one_deviation(sys: &MomentSystem, a: &nalgebra::Matrix4<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for v in 1..=3 {
        let r = sys.lookup[&unit(v)];
        worst = worst.max((sys.generator[(r, 0)] - a[(v, 0)] * FRAC_1_SQRT_2).abs());
        for (c, e) in sys.indices.iter().enumerate() {
            let want = match degree(e) {
                1 => a[(v, (1..=3).find(|&w| e[w - 1] == 1).unwrap())],
                _ => 0.0,
            };
            if c != 0 {
                worst = worst.max((sys.generator[(r, c)] - want).abs());
            }
        }
    }
    worst
}

/// Largest distance of `Im λ` from the nearest even multiple of `Ω` over
/// eigenvalues with `Re λ ≥ min_re`.
pub fn max_band_offset(ev: &[Complex64], omega: f64, min_re: f64) -> f64 {
    ev.iter()
        .filter(|z| z.re >= min_re)
        .map(|z| {
            let k = (z.im / (2.0 * omega)).round();
            (z.im - 2.0 * k * omega).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::me::{bloch_generator, me_inversion};

    fn p(y: f64) -> SystemParams {
        SystemParams::with_drive_strength(y)
    }

    #[test]
    fn basis_is_orthonormal() {
        let b = basis();
        for i in 0..4 {
            for j in 0..4 {
                let g = (b[i].matrix.adjoint() * b[j].matrix).trace();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - Complex64::new(want, 0.0)).norm() < 1e-14);
            }
        }
        let a = observable_vector(Observable::SigmaZ).unwrap();
        assert!((a[3] - 2f64.sqrt()).abs() < 1e-14 && a[0].abs() + a[1].abs() + a[2].abs() < 1e-14);
        assert!(observable_vector(Observable::Lowering).is_err());
    }

    #[test]
    fn coefficient_tables() {
        let pp = p(10.0);
        let t = coeff_tables(&pp, Unraveling::Poisson).unwrap();
        assert!((t.l[0] - FRAC_1_SQRT_2).abs() < 1e-14 && (t.l[3] - FRAC_1_SQRT_2).abs() < 1e-14);
        assert!(t.l[1].abs() + t.l[2].abs() < 1e-14);
        let a = bloch_generator(&pp);
        // row of σz/√2: Bloch z row with the constant rescaled
        assert!((t.u[3][0] - a[(3, 0)]).abs() < 1e-14);
        for j in 1..4 {
            assert!((t.u[3][j] - a[(3, j)]).abs() < 1e-14);
        }
        let w = coeff_tables(&pp, Unraveling::WienerHeterodyne).unwrap();
        assert!(w.noise[0].max_abs() < 1e-15);
        assert!(t.noise[0].max_abs() < 1e-15);
    }

    #[test]
    fn index_set_size() {
        assert_eq!(moment_indices(10).len(), 286);
        assert_eq!(format_index(&[1, 0, 2]), "E[x1 x3 x3]");
    }

    #[test]
    fn degree_one_block_is_bloch() {
        let pp = p(10.0);
        let a = bloch_generator(&pp);
        for u in [Unraveling::Poisson, Unraveling::WienerHeterodyne] {
            let s = build_system(&pp, u, 4).unwrap();
            assert!(degree_one_deviation(&s, &a) < 1e-13);
            for v in 1..=3 {
                let r = s.index_of(unit(v)).unwrap();
                assert!((s.generator[(r, 0)] - a[(v, 0)] * FRAC_1_SQRT_2).abs() < 1e-13);
                for w in 1..=3 {
                    let c = s.index_of(unit(w)).unwrap();
                    assert!((s.generator[(r, c)] - a[(v, w)]).abs() < 1e-13, "{u} {v} {w}");
                }
                for (c, e) in s.indices.iter().enumerate() {
                    if degree(e) > 1 {
                        assert_eq!(s.generator[(r, c)], 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn unravelings_differ_at_degree_two() {
        let pp = p(10.0);
        let a = build_system(&pp, Unraveling::Poisson, 4).unwrap();
        let b = build_system(&pp, Unraveling::WienerHeterodyne, 4).unwrap();
        let r = a.index_of([0, 0, 2]).unwrap();
        let diff: f64 = (0..a.dim()).map(|c| (a.generator[(r, c)] - b.generator[(r, c)]).abs()).sum();
        assert!(diff > 0.1);
    }

    #[test]
    fn nested_orders_share_blocks() {
        let pp = p(10.0);
        for u in [Unraveling::Poisson, Unraveling::WienerHeterodyne] {
            let a = build_system(&pp, u, 6).unwrap();
            let b = build_system(&pp, u, 7).unwrap();
            for (r, er) in a.indices.iter().enumerate() {
                for (c, ec) in a.indices.iter().enumerate() {
                    let (rb, cb) = (b.index_of(*er).unwrap(), b.index_of(*ec).unwrap());
                    assert_eq!(a.generator[(r, c)], b.generator[(rb, cb)]);
                }
            }
        }
    }

    #[test]
    fn mean_follows_master_equation() {
        let pp = p(10.0);
        let grid = TimeGrid::covering(0.01, 6.0);
        let me = me_inversion(&pp, &grid.times()).unwrap();
        let a = observable_vector(Observable::SigmaZ).unwrap();
        for u in [Unraveling::Poisson, Unraveling::WienerHeterodyne] {
            let s = build_system(&pp, u, 6).unwrap();
            let traj = integrate(&s, grid).unwrap();
            let c = qtav_from_moments(&s, &traj, &a);
            for k in 0..grid.len {
                assert!((c.mean[k] - me[k]).abs() < 1e-6, "{u} t={}", grid.at(k));
            }
            assert!(c.qtav[0].abs() < 1e-15);
        }
    }

    #[test]
    fn poisson_qtav_relaxes_to_half() {
        let s = build_system(&p(10.0), Unraveling::Poisson, 10).unwrap();
        let traj = integrate(&s, TimeGrid::covering(0.01, 30.0)).unwrap();
        let c = qtav_from_moments(&s, &traj, &observable_vector(Observable::SigmaZ).unwrap());
        assert!((c.qtav.last().unwrap() - 0.5).abs() < 0.02, "{}", c.qtav.last().unwrap());
    }

    #[test]
    fn truncation_convergence_and_consistency() {
        let pp = p(10.0);
        let grid = TimeGrid::covering(0.01, 6.0);
        let a = observable_vector(Observable::SigmaZ).unwrap();
        for (u, tol) in [(Unraveling::Poisson, 1e-3), (Unraveling::WienerHeterodyne, 1e-2)] {
            let s8 = build_system(&pp, u, 8).unwrap();
            let s10 = build_system(&pp, u, 10).unwrap();
            let t8 = integrate(&s8, grid).unwrap();
            let t10 = integrate(&s10, grid).unwrap();
            let q8 = qtav_from_moments(&s8, &t8, &a).qtav;
            let q10 = qtav_from_moments(&s10, &t10, &a).qtav;
            let dev = q8.iter().zip(&q10).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(dev < tol, "{u}: {dev}");
            assert!(!t10.truncation_suspect);
            for v in 1..=3 {
                let m1 = t10.moment(&s10, unit(v)).unwrap();
                let mut e = unit(v);
                e[v - 1] += 1;
                let m2 = t10.moment(&s10, e).unwrap();
                assert!(m1.iter().zip(&m2).all(|(a, b)| b - a * a >= -1e-6), "{u} x{v}");
            }
        }
    }

    #[test]
    fn degree_one_spectrum() {
        let s = build_system(&p(10.0), Unraveling::Poisson, 2).unwrap();
        let lin: Vec<usize> = (1..=3).map(|v| s.index_of(unit(v)).unwrap()).collect();
        let block = DMatrix::from_fn(3, 3, |r, c| s.generator[(lin[r], lin[c])]);
        let ev = block.complex_eigenvalues();
        assert!(ev.iter().any(|z| (z.re + 0.75).abs() < 1e-9 && z.im.abs() > 1.0));
    }

    #[test]
    fn spectra() {
        let s = build_system(&p(10.0), Unraveling::Poisson, 10).unwrap();
        let ev = spectrum(&s).unwrap();
        assert_eq!(ev.len(), s.dim());
        assert!(ev.iter().all(|z| z.re <= 1e-9));
        let mut worst = Vec::new();
        for y in [10.0, 30.0] {
            let pp = p(y);
            let s = build_system(&pp, Unraveling::WienerHeterodyne, 10).unwrap();
            let ev = spectrum(&s).unwrap();
            assert!(ev.iter().all(|z| z.re <= 1e-9));
            worst.push(max_band_offset(&ev, pp.omega, -10.0 * pp.gamma) / pp.gamma);
        }
        // slowly decaying modes sit in bands at 2kΩ, tighter at larger Y
        assert!(worst[1] < 1.0 && worst[1] < worst[0], "{worst:?}");
    }

    #[test]
    fn invalid_inputs() {
        assert!(build_system(&p(10.0), Unraveling::Poisson, 1).is_err());
        let mut q = p(10.0);
        q.efficiency = 0.5;
        assert!(build_system(&q, Unraveling::Poisson, 4).is_err());
        assert_eq!("wiener-heterodyne".parse::<Unraveling>().unwrap(), Unraveling::WienerHeterodyne);
        assert!("x".parse::<Unraveling>().is_err());
    }
}
