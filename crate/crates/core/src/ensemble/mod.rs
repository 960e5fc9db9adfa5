//! Replica ensembles over (width, sigma) grids and the studies built on them.

mod correlation;
mod grid;
mod level;
mod scaling;
mod vmc_sweep;

pub use correlation::{run_correlation_study, CorrelationRow, CorrelationStudy};
pub use grid::{aggregate, run_entropy_grid, Aggregate, Estimator, GridCell, GridResult, Manifest, ReplicaValue, SweepGrid, MIN_SUCCESS_FRACTION};
pub use level::{run_level_stats, LevelStatsResult, LevelStatsRow, ReferenceCurve};
pub use scaling::{run_scaling_study, ScalingPoint, ScalingResult, ScalingRow, MAX_RELATIVE_PURITY_ERROR};
pub use vmc_sweep::{
    compare_initializations, run_vmc_sweep, write_comparison_csv, InitComparison, InitScheme, VmcCell, VmcRun,
    VmcSweepResult, MIN_CONVERGED_FRACTION,
};
