//! Quantum trajectories of a coherently driven two-level emitter.
//!
//! The same master equation is unraveled by direct photodetection (quantum
//! jumps), homodyne detection and heterodyne detection. Linear ensemble
//! averages coincide across unravelings; nonlinear ones such as the
//! trajectory-averaged variance of `⟨σz⟩` do not. Three independent engines
//! cross-check the Monte Carlo results: the master equation itself, a
//! renewal-equation summation of the jump expansion, and a truncated moment
//! hierarchy.
//!
//! Units: the decay rate `γ` is normally 1 and every time is `γt`.

pub mod diffusive;
pub mod dyson;
pub mod ensemble;
pub mod error;
pub mod jump;
pub mod me;
pub mod moments;
pub mod params;
pub mod photocount;
pub mod record;
pub mod rng;
pub mod state;
pub mod steering;

pub use error::{Error, Result};
pub use params::{SystemParams, TimeGrid};
pub use state::{expectation, BlochVector, MixedState, Observable, PureState};
