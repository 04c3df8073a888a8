//! Lindblad dynamics of the pulsed sequence under dephasing and mixed-state QFI.

pub mod density;
pub mod integrator;
pub mod lindblad;

pub use density::{DensityMatrix, NoiseKind, NoiseSpec, PhysicalUnits, MAX_SPINS};
pub use integrator::{Dopri5, StepControl, StepStats};
pub use lindblad::{
    lindblad_segment, parity_contrast, parity_expectation_mixed, parity_scan, physical_couplings, pulsed_period_open,
    qfi_mixed, run_open, write_parity_csv, write_rate_csv, NoiseFrame, OpenEvolution, OpenRun, OpenRunConfig, RateRow,
    SegmentGenerator,
};
