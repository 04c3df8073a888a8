//! Discrete truncated Wigner sampling of the Floquet dynamics.
//!
//! Each Ising segment conserves the segment-axis component of every classical
//! spin, so the local fields are frozen and a segment is an exact rotation.

mod checkpoint;
pub mod ensemble;
pub mod estimate;

pub use ensemble::{trajectory_rng, TrajectoryEnsemble};
pub use estimate::{estimate_observables, estimate_samples, pairwise_sum, run_series, DtwaEstimate, DtwaSeries, EnsembleMoments};

/// Trajectory count used when none is given.
pub const DEFAULT_TRAJECTORIES: usize = 1000;
