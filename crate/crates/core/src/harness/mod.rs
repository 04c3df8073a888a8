//! Parameter sweeps, threshold searches, exponent fits and figure data.

pub mod config;
pub mod figure;
pub mod fit;
pub mod peak;
pub mod reference;
pub mod sweep;
pub mod threshold;

pub use config::{log_tau_grid, Engine, SweepConfig};
pub use figure::{reproduce_figure, FigureBundle, FigureName, FigureOptions, Panel};
pub use fit::{exclude_smallest, fit_power_law, FitModel, FitPoint, FitResult};
pub use peak::{first_prominent_peak, locate_peak, Peak};
pub use reference::{zm_reference, zm_series, ZmReference};
pub use sweep::{evaluate_point, run_sweep, write_records_csv, RecordStore, SweepPoint, SweepRecord};
pub use threshold::{find_tau_s, fit_exponents, search_threshold, ExponentFit, TauS, TauSOutcome, ThresholdSearch};
