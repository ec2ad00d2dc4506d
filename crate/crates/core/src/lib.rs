//! Staking-derivative risk model.
//!
//! Pricing curves for staking derivatives, the slashing urn and its closed
//! forms, the two- and three-asset simulations, and a deterministic parallel
//! sweep harness that writes CSV.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod metrics;
pub mod monetary;
pub mod portfolio;
pub mod pricing;
pub mod rng;
pub mod sim2;
pub mod sim3;
pub mod state;
pub mod urn;

pub use error::{Error, Result};
pub use harness::{
    analytic_report, run_direct, run_sweep, Axis, FileConfig, SimKind, SweepGrid, SweepSpec,
    TrajectoryRow,
};
pub use metrics::{gini, mean_std, norm_ratio};
pub use monetary::{MonetaryPolicy, PolicyKind};
pub use portfolio::{
    solve_markowitz, solve_markowitz_long_only, CirParams, MarkowitzSolution, ReturnsModel,
};
pub use pricing::{
    aggregate_prices, calibrate_affine, validator_price, AggregationRule, BoundJoin, Price,
    PricingCurve, ValidatorPricing,
};
pub use sim2::{run_trajectory2, Sim2Config, Trajectory2Record};
pub use sim3::{
    run_trajectory3, Components, DurationMode, LendingParams, Sim3Config, Trajectory3Record,
};
pub use state::StakeState;
pub use urn::{ruin_probability, SlashParams, TerminalLaw};
