#![cfg_attr(all(not(feature = "std"), not(test)), no_std)]
//! Finite element solver for natural convection with variable density.
//!
//! The density is carried through its square root `sigma`, so `rho = sigma^2`.
//! Each time step solves, in order, a transport problem for `sigma` driven by a
//! divergence-free Raviart–Thomas projection of the previous velocity, a
//! density-weighted mini-element saddle-point problem for velocity and
//! pressure, and an advection–diffusion problem for temperature.
//!
//! The crate is `no_std` with `alloc`. The `std` feature only switches the
//! error types over to `std::error::Error`; `parallel` adds rayon-backed
//! element loops.

extern crate alloc;

pub mod diagnostics;
pub mod fem;
pub mod linalg;
pub mod manufactured;
pub(crate) mod math;
pub mod mesh;
pub mod projection;
pub mod scheme;

pub use diagnostics::{eoc, ErrorRecord, EnergyReport, StepEnergy};
pub use fem::{FeSpace, QuadRule, SpaceKind};
pub use linalg::{CsrMatrix, LinearSystem, SolveError, Solver, SolverKind};
pub use mesh::{Diagonal, Mesh, MeshError};
pub use projection::{DivFreeProjector, ProjectedVelocity, ProjectionMode, RtOrder};
pub use scheme::{
    BcMode, FieldState, Problem, RunOutput, SimulationConfig, Simulation, SourceMode,
};
