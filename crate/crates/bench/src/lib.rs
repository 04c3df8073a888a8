//! Fixtures shared by the kernel benchmarks.

use ghzsim::exact::PureState;
use ghzsim::open::DensityMatrix;
use ghzsim::{build_coupling_matrix, Boundary, CouplingMatrix, LatticeSpec, ModelParams};

pub fn chain(l: usize, alpha: f64) -> CouplingMatrix {
    let spec = LatticeSpec::chain(l, Boundary::Periodic).expect("valid chain");
    build_coupling_matrix(&spec, &ModelParams::unit(alpha).expect("valid alpha")).expect("couplings")
}

pub fn square(l: usize, alpha: f64) -> CouplingMatrix {
    let spec = LatticeSpec::square(l, l, Boundary::Periodic).expect("valid square");
    build_coupling_matrix(&spec, &ModelParams::unit(alpha).expect("valid alpha")).expect("couplings")
}

/// A generic product state, so no kernel sees a special symmetric input.
pub fn tilted_state(n: usize) -> PureState {
    PureState::product(n, 0.7, 0.3).expect("state")
}

pub fn tilted_density(n: usize) -> DensityMatrix {
    DensityMatrix::from_pure(&tilted_state(n)).expect("density matrix")
}
