//! Sweeps, configuration files, CSV emission and the analytic report.

pub mod analytic;
pub mod config;
pub mod csvio;
pub mod sweep;

pub use crate::metrics::{gini, mean_std, norm_ratio};
pub use analytic::{analytic_report, AnalyticRow};
pub use config::FileConfig;
pub use csvio::{
    read_analytic, read_sweep, read_trajectory, sweep_rows, write_analytic, write_sweep,
    write_trajectory, SweepRow, TrajectoryRow,
};
pub use sweep::{
    aggregate, run_direct, run_sweep, set_param, Axis, CellResult, MetricStat, SimKind, SweepGrid,
    SweepSpec,
};
