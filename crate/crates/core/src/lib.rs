//! Population OD demand estimation for highway networks by uniform upscaling.
//!
//! A subsample origin-destination matrix is multiplied by one scalar factor
//! `x`. The factor is chosen so that ramp-to-ramp path travel times predicted
//! by an analytical macroscopic network model match observed travel times in
//! the least-squares sense. The model is differentiable in `x`, so the
//! optimizer works with exact first derivatives.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the synthetic
//! scenario generator and the CLI live in the `odscale` companion crate.
//!
//! Module map:
//!
//! - [`network`]: segments, paths, OD pairs, the assignment matrix and the
//!   validated [`NetworkSnapshot`].
//! - [`flow`]: network loading, the fundamental diagram, path travel times
//!   and their derivatives.
//! - [`estimator`]: the weighted squared-error objective, the bounded scalar
//!   optimizer and the grid-search benchmark.
//! - [`metrics`]: nRMSE, percentage improvement and percentage gap.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod estimator;
pub mod flow;
pub mod metrics;
pub mod network;
mod scalar;

pub use estimator::{
    apply_scaling, argmin_curve, estimate, grid_search_benchmark, objective, EstimateError,
    EstimateOptions, EstimationResult, GridBenchmark, GridResolution, GridSpec, GroundTruth,
    IterateRecord, Objective, StopReason,
};
pub use flow::{
    load_network, segment_counts, travel_time_derivative, FlowState, ModelError, ModelParams,
};
pub use metrics::{
    nrmse, nrmse_scoped, pct_gap, pct_improvement, round_report, MetricsError, ObservationKind,
    PairedObservations, Scope,
};
pub use network::{
    build_snapshot, segment_demand_coefficients, AssignmentMatrix, DemandCoefficients,
    NetworkError, NetworkSnapshot, OdPair, Path, Segment,
};

/// Seconds per hour; travel times are held in hours and reported in seconds.
pub const SECONDS_PER_HOUR: f64 = 3600.0;
