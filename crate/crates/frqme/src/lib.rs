//! Simulator for a resonantly driven two-qubit system coupled to a
//! fluctuating environment, built around a second-order master equation whose
//! memory kernel decays as e^{−|τ|/τc}. The drive enters the dissipative
//! order too, so pulses damp the very coherences they create; this crate
//! propagates pulse programs in Liouville space, scores the conditional
//! sign-flip step by fidelity, purity and map efficiency, and sweeps the
//! dimensionless drive amplitude and kernel time to locate the optimal drive.
//!
//! Module map:
//! - [`linalg`] — dense complex matrices, Kronecker/vectorization helpers,
//!   the matrix exponential and superoperators.
//! - [`model`] — physical parameters, Pauli embeddings, Hamiltonians and the
//!   system–environment coupling channels.
//! - [`seqdsl`] — the pulse-program text format and the built-in sign-flip
//!   sequence.
//! - [`engine`] — per-segment Liouvillian assembly and propagation.
//! - [`grover`] — input/target states, metrics, and closed-form reference
//!   curves for the drive-only dissipation channel.
//! - [`sweep`] — grid sweeps, the optimum-drive finder, CSV/JSON emitters.
//! - [`config`] — `key = value` config files for the CLI.

pub mod config;
pub mod engine;
pub mod grover;
pub mod linalg;
pub mod model;
pub mod seqdsl;
pub mod sweep;

pub use engine::{DensityMatrix, Mode};
pub use linalg::{ComplexMatrix, Superoperator};
pub use model::{BasisLabel, PhysicalParams};
pub use seqdsl::PulseSequence;
pub use sweep::{SweepGrid, SweepRecord};
