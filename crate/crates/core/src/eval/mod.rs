//! Positioning metrics and experiment sweeps.

mod metrics;
mod report;
mod sweep;

pub use metrics::{cdf_at, de_cdf, distance_errors, mda, mde, median};
pub use report::{evaluate, noisy_dataset, EvalMeta, EvalReport, CDF_POINTS};
pub use sweep::{
    antenna_sweep, antenna_sweep_on, cell_seed, run_cells, run_replicates, sample_distance_sweep, sample_distance_sweep_on,
    train_and_evaluate, CellResult, PreparedData, SweepSpec, SweepTable,
};
