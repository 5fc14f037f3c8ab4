//! Sparse polynomials in the three Bloch coordinates `x1, x2, x3` with
//! complex coefficients.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

pub type Exponent = [u8; 3];

pub fn degree(e: &Exponent) -> usize {
    e.iter().map(|&k| k as usize).sum()
}

pub fn unit(v: usize) -> Exponent {
    let mut e = [0u8; 3];
    e[v - 1] = 1;
    e
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Poly {
    pub terms: BTreeMap<Exponent, Complex64>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Poly::zero().plus_term([0, 0, 0], c)
    }

    /// The coordinate `x_v`, `v ∈ {1, 2, 3}`.
    pub fn var(v: usize) -> Self {
        Poly::zero().plus_term(unit(v), Complex64::new(1.0, 0.0))
    }

    pub fn monomial(e: Exponent) -> Self {
        Poly::zero().plus_term(e, Complex64::new(1.0, 0.0))
    }

    /// `c0 + Σ_v c_v x_v`.
    pub fn linear(c0: Complex64, c: [Complex64; 3]) -> Self {
        let mut p = Poly::constant(c0);
        for v in 0..3 {
            p = p.plus_term(unit(v + 1), c[v]);
        }
        p
    }

    fn plus_term(mut self, e: Exponent, c: Complex64) -> Self {
        self.add_term(e, c);
        self
    }

    pub fn add_term(&mut self, e: Exponent, c: Complex64) {
        if c == Complex64::new(0.0, 0.0) {
            return;
        }
        *self.terms.entry(e).or_default() += c;
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Poly { terms: self.terms.iter().map(|(e, v)| (*e, v * c)).collect() }
    }

    pub fn conj(&self) -> Self {
        Poly { terms: self.terms.iter().map(|(e, v)| (*e, v.conj())).collect() }
    }

    pub fn pow(&self, n: usize) -> Self {
        (0..n).fold(Poly::constant(Complex64::new(1.0, 0.0)), |acc, _| &acc * self)
    }

    pub fn max_degree(&self) -> usize {
        self.terms.keys().map(degree).max().unwrap_or(0)
    }

    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `∂/∂x_v`.
    pub fn derivative(&self, v: usize) -> Self {
        let mut out = Poly::zero();
        for (e, c) in &self.terms {
            if e[v - 1] > 0 {
                let mut d = *e;
                d[v - 1] -= 1;
                out.add_term(d, c * e[v - 1] as f64);
            }
        }
        out
    }

    pub fn eval(&self, x: [f64; 3]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| c * (0..3).map(|v| x[v].powi(e[v] as i32)).product::<f64>())
            .sum()
    }

    /// Divides by `a + b·x3`, returning quotient and remainder. The remainder
    /// does not depend on `x3`.
    pub fn div_linear_x3(&self, a: f64, b: f64) -> (Poly, Poly) {
        let mut groups: BTreeMap<(u8, u8), Vec<Complex64>> = BTreeMap::new();
        for (e, c) in &self.terms {
            let g = groups.entry((e[0], e[1])).or_default();
            if g.len() <= e[2] as usize {
                g.resize(e[2] as usize + 1, Complex64::new(0.0, 0.0));
            }
            g[e[2] as usize] += c;
        }
        let mut q = Poly::zero();
        let mut r = Poly::zero();
        for ((e0, e1), mut c) in groups {
            for k in (1..c.len()).rev() {
                let s = c[k] / b;
                q.add_term([e0, e1, (k - 1) as u8], s);
                c[k - 1] -= s * a;
            }
            r.add_term([e0, e1, 0], c[0]);
        }
        (q, r)
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, o: &Poly) -> Poly {
        let mut out = self.clone();
        for (e, c) in &o.terms {
            out.add_term(*e, *c);
        }
        out
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, o: &Poly) -> Poly {
        self + &o.scale(Complex64::new(-1.0, 0.0))
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, o: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (e1, c1) in &self.terms {
            for (e2, c2) in &o.terms {
                out.add_term([e1[0] + e2[0], e1[1] + e2[1], e1[2] + e2[2]], c1 * c2);
            }
        }
        out
    }
}
