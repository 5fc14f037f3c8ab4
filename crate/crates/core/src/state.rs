//! Two-level states, Pauli operators and expectation values.
//!
//! Basis ordering is `(|↓⟩, |↑⟩)`. The lowering operator is `σ− = |↓⟩⟨↑|`,
//! `σx = σ+ + σ−`, `σy = i(σ+ − σ−)` and `σz = |↑⟩⟨↑| − |↓⟩⟨↓|`. With this
//! choice `(|↓⟩ + i|↑⟩)/√2` has `⟨σy⟩ = +1`.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type Op = Matrix2<C64>;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

pub fn identity() -> Op {
    Op::identity()
}

pub fn sigma_minus() -> Op {
    Op::new(ZERO, ONE, ZERO, ZERO)
}

pub fn sigma_plus() -> Op {
    Op::new(ZERO, ZERO, ONE, ZERO)
}

pub fn sigma_x() -> Op {
    Op::new(ZERO, ONE, ONE, ZERO)
}

pub fn sigma_y() -> Op {
    Op::new(ZERO, -I, I, ZERO)
}

pub fn sigma_z() -> Op {
    Op::new(-ONE, ZERO, ZERO, ONE)
}

/// `σ+σ− = |↑⟩⟨↑|`.
pub fn excited_projector() -> Op {
    Op::new(ZERO, ZERO, ZERO, ONE)
}

/// Observables with a named closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    SigmaX,
    SigmaY,
    SigmaZ,
    /// `σ+σ−`
    Excited,
    /// `σ−`, the only non-Hermitian entry.
    Lowering,
}

impl Observable {
    pub fn matrix(self) -> Op {
        match self {
            Observable::SigmaX => sigma_x(),
            Observable::SigmaY => sigma_y(),
            Observable::SigmaZ => sigma_z(),
            Observable::Excited => excited_projector(),
            Observable::Lowering => sigma_minus(),
        }
    }

    pub fn is_hermitian(self) -> bool {
        !matches!(self, Observable::Lowering)
    }

    /// Real expectation from a Bloch vector (Hermitian observables only;
    /// `Lowering` returns its real part).
    pub fn from_bloch(self, b: &BlochVector) -> f64 {
        match self {
            Observable::SigmaX => b.x,
            Observable::SigmaY => b.y,
            Observable::SigmaZ => b.z,
            Observable::Excited => 0.5 * (1.0 + b.z),
            Observable::Lowering => 0.5 * b.x,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Observable::SigmaX => "sigma_x",
            Observable::SigmaY => "sigma_y",
            Observable::SigmaZ => "sigma_z",
            Observable::Excited => "excited",
            Observable::Lowering => "sigma_minus",
        }
    }
}

impl std::str::FromStr for Observable {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigma_x" | "sx" | "x" => Ok(Observable::SigmaX),
            "sigma_y" | "sy" | "y" => Ok(Observable::SigmaY),
            "sigma_z" | "sz" | "z" => Ok(Observable::SigmaZ),
            "excited" | "sigma_plus_sigma_minus" => Ok(Observable::Excited),
            "sigma_minus" | "lowering" => Ok(Observable::Lowering),
            other => Err(Error::Parse(format!("unknown observable `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BlochVector {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochVector {
    pub const GROUND: BlochVector = BlochVector { x: 0.0, y: 0.0, z: -1.0 };

    pub fn new(x: f64, y: f64, z: f64) -> Self {
        BlochVector { x, y, z }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    /// `Tr ρ² = (1 + |r|²)/2`.
    pub fn purity(&self) -> f64 {
        0.5 * (1.0 + self.norm_sqr())
    }

    pub fn component(&self, k: usize) -> f64 {
        match k {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("Bloch component {k} out of range"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PureState {
    pub amp_down: C64,
    pub amp_up: C64,
}

impl PureState {
    pub fn ground() -> Self {
        PureState { amp_down: ONE, amp_up: ZERO }
    }

    pub fn excited() -> Self {
        PureState { amp_down: ZERO, amp_up: ONE }
    }

    /// Normalized state from arbitrary amplitudes.
    pub fn new(amp_down: C64, amp_up: C64) -> Result<Self> {
        let mut s = PureState { amp_down, amp_up };
        let n = s.norm_sqr().sqrt();
        if !(n > 1e-300) || !n.is_finite() {
            return Err(Error::InvalidState(format!("amplitudes have norm {n}")));
        }
        s.scale(1.0 / n);
        Ok(s)
    }

    pub fn from_vector(v: Vector2<C64>) -> Self {
        PureState { amp_down: v[0], amp_up: v[1] }
    }

    pub fn to_vector(&self) -> Vector2<C64> {
        Vector2::new(self.amp_down, self.amp_up)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp_down.norm_sqr() + self.amp_up.norm_sqr()
    }

    fn scale(&mut self, s: f64) {
        self.amp_down *= s;
        self.amp_up *= s;
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm_sqr().sqrt();
        if !(n >= 1e-12) || !n.is_finite() {
            return Err(Error::NormCollapse { norm: n });
        }
        self.scale(1.0 / n);
        Ok(n)
    }

    pub fn apply(&self, op: &Op) -> PureState {
        PureState::from_vector(op * self.to_vector())
    }

    /// `⟨ψ|O|ψ⟩` without assuming unit norm.
    pub fn expect_op(&self, op: &Op) -> C64 {
        self.to_vector().dotc(&(op * self.to_vector()))
    }

    /// `⟨σ−⟩ = conj(a↓)·a↑`, from which `x` and `y` follow.
    pub fn coherence(&self) -> C64 {
        self.amp_down.conj() * self.amp_up
    }

    pub fn bloch(&self) -> BlochVector {
        let c = self.coherence();
        BlochVector {
            x: 2.0 * c.re,
            y: 2.0 * c.im,
            z: self.amp_up.norm_sqr() - self.amp_down.norm_sqr(),
        }
    }

    pub fn to_mixed(&self) -> MixedState {
        let v = self.to_vector();
        MixedState { rho: v * v.adjoint() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixedState {
    pub rho: Op,
}

impl MixedState {
    pub fn ground() -> Self {
        PureState::ground().to_mixed()
    }

    pub fn maximally_mixed() -> Self {
        MixedState { rho: identity() * C64::new(0.5, 0.0) }
    }

    /// `ρ = (I + x σx + y σy + z σz)/2`.
    pub fn from_bloch(b: BlochVector) -> Self {
        Self::from_components(1.0, b)
    }

    /// Unnormalized state `(r0 I + x σx + y σy + z σz)/2` with trace `r0`.
    pub fn from_components(r0: f64, b: BlochVector) -> Self {
        let h = 0.5;
        MixedState {
            rho: Op::new(
                C64::new(h * (r0 - b.z), 0.0),
                C64::new(h * b.x, -h * b.y),
                C64::new(h * b.x, h * b.y),
                C64::new(h * (r0 + b.z), 0.0),
            ),
        }
    }

    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(rho: Op) -> Result<Self> {
        let s = MixedState { rho };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rho;
        if r.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidState("non-finite density matrix".into()));
        }
        let herm = (r - r.adjoint()).iter().map(|c| c.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::InvalidState(format!("not Hermitian (deviation {herm:e})")));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let lo = self.min_eigenvalue();
        if lo < -1e-10 {
            return Err(Error::InvalidState(format!("negative eigenvalue {lo:e}")));
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        (self.rho[(0, 0)] + self.rho[(1, 1)]).re
    }

    /// Smaller eigenvalue of the Hermitian part, `(tr − √(tr² − 4 det))/2`
    /// written through the Bloch radius.
    pub fn min_eigenvalue(&self) -> f64 {
        let tr = self.trace();
        let b = self.bloch_unnormalized();
        0.5 * (tr - b.norm_sqr().sqrt())
    }

    pub fn purity(&self) -> f64 {
        let tr = self.trace();
        (self.rho * self.rho).trace().re / (tr * tr)
    }

    fn bloch_unnormalized(&self) -> BlochVector {
        let c = self.rho[(1, 0)];
        BlochVector {
            x: 2.0 * c.re,
            y: 2.0 * c.im,
            z: (self.rho[(1, 1)] - self.rho[(0, 0)]).re,
        }
    }

    /// Bloch vector of the normalized state.
    pub fn bloch(&self) -> BlochVector {
        let tr = self.trace();
        let b = self.bloch_unnormalized();
        BlochVector { x: b.x / tr, y: b.y / tr, z: b.z / tr }
    }

    pub fn expect_op(&self, op: &Op) -> C64 {
        (op * self.rho).trace() / self.trace()
    }
}

/// Either kind of state, for `expectation`.
pub trait QuantumState {
    fn expect_op(&self, op: &Op) -> C64;
}

impl QuantumState for PureState {
    fn expect_op(&self, op: &Op) -> C64 {
        PureState::expect_op(self, op) / self.norm_sqr()
    }
}

impl QuantumState for MixedState {
    fn expect_op(&self, op: &Op) -> C64 {
        MixedState::expect_op(self, op)
    }
}

/// `Tr(Oρ)` or `⟨ψ|O|ψ⟩`, normalized by the state norm.
pub fn expectation<S: QuantumState>(state: &S, obs: Observable) -> C64 {
    state.expect_op(&obs.matrix())
}

/// Real expectation of a Hermitian observable; the imaginary residue is
/// dropped.
pub fn expectation_real<S: QuantumState>(state: &S, obs: Observable) -> f64 {
    let v = expectation(state, obs);
    debug_assert!(!obs.is_hermitian() || v.im.abs() < 1e-12);
    v.re
}
