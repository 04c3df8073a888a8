//! Floquet-engineered GHZ-like states in power-law Ising lattices.
//!
//! The engines share one lattice model: [`exact`] evolves full state vectors and
//! the collective Dicke subspace, [`dtwa`] samples semiclassical trajectories,
//! [`spinwave`] gives the linearized analytics, [`open`] adds dephasing, and
//! [`harness`] ties them into sweeps, fits and figure tables.

pub mod dtwa;
pub mod error;
pub mod exact;
pub mod harness;
pub mod lattice;
pub mod linalg;
pub mod open;
pub mod spin;
pub mod spinwave;

pub use error::{Error, Result};
pub use lattice::{build_coupling_matrix, Boundary, CouplingMatrix, LatticeSpec, ModelParams};
pub use spin::Axis;
