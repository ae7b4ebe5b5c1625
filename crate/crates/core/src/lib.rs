//! Steady-state toolkit for the coherently driven, dissipative Jaynes-Cummings
//! oscillator.
//!
//! The crate assembles the Lindblad generator of one cavity mode coupled to a
//! qubit on a truncated Fock space, solves for its unique steady state, and
//! extracts observables from it: cavity amplitude and photon number, qubit
//! polarization, qubit-cavity entanglement entropy, zero-delay photon
//! correlations and Q / Wigner quasi-distributions on a phase-space grid.
//! Alongside the exact solution it provides the mean-field branch solvers
//! and the closed-form Wigner function of the dressed Duffing approximation,
//! so the two descriptions can be compared point by point.
//!
//! Module map:
//!
//! - [`hilbert`]: truncated cavity ⊗ qubit space, ladder and Pauli operators,
//!   coherent states, density matrices.
//! - [`lindblad`]: model parameters, Liouvillian assembly, steady-state solve.
//! - [`observables`]: expectation values, partial traces, entropy, g²(0).
//! - [`quasiprob`]: Q and Wigner functions on a grid, peak detection.
//! - [`dispersive`]: hypergeometric series and the analytic Duffing Wigner function.
//! - [`semiclassical`]: mean-field and neoclassical branch solvers.
//! - [`cli`]: sweep configuration, the sweep runner and result serialization.
//!
//! Rates are dimensionless numbers in a single unit system (conventionally
//! the qubit decay rate γ = 1).

pub mod cli;
pub mod dispersive;
pub mod hilbert;
pub mod lindblad;
mod numfmt;
pub mod observables;
pub mod quasiprob;
pub mod semiclassical;

pub use num_complex::Complex64 as C64;

pub use hilbert::{DensityMatrix, HilbertDims, Operator, Space, StateVector};
pub use lindblad::{Liouvillian, ModelParams, SteadyState};
pub use quasiprob::{PhaseSpaceGrid, QuasiDistField, QuasiKind};
pub use semiclassical::BranchSet;
