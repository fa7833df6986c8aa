//! Deterministic phasor computing on the unit circle.
//!
//! States are vectors of complex numbers, one per thread. Gates transform
//! them, circuits sequence gates, and the variational models built on top
//! are trained by exact reverse-mode gradients.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod circuit;
pub mod error;
pub mod gates;
pub mod models;
pub mod neuro;
pub mod optim;
pub mod state;

pub use circuit::{Circuit, CircuitJson, ExecutionResult, Snapshot};
pub use error::{PhasorError, Result};
pub use gates::{EncodeMode, Gate, GateInstruction, GateKind, GateRegistry, GridShape};
pub use state::{coherence, from_phases, l2_norm, phases_of, Complex, PhaseVector, PhasorState};
