//! Exact stroboscopic dynamics: full state vectors, the symmetric subspace,
//! dense verification operators and pure-state observables.

pub mod dense;
pub mod dicke;
pub mod floquet;
pub mod observables;
pub mod state;

pub use dicke::{project_to_dicke, zm_evolve, zm_hamiltonian, DickeState, ZmPropagator};
pub use floquet::{evolve, floquet_period, segment_evolve, FloquetSchedule, IsingEnergies, PeriodForm};
pub use observables::{
    nfm_estimate, parity_expectation, qfi_matrix_optimal, qfi_pure, sx_distribution, ObservableRecord,
    ObservableSeries, OptimalQfi, SpinMoments,
};
pub use state::PureState;
