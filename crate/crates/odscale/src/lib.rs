//! File formats, synthetic scenarios, the multi-hour batch runner and the
//! `odscale` command line around [`odscale_core`].
//!
//! A scenario bundle is a directory of CSV files plus a `key = value` config
//! (see [`formats`]). [`scenario::parse_scenario`] turns a bundle into
//! validated model inputs, [`batch::run_batch`] runs estimation, grid search
//! or the baseline/benchmark/proposed comparison over many hours, and
//! [`validation`] checks an estimate against segment counts it never saw.

pub mod batch;
pub mod error;
pub mod formats;
pub mod scenario;
pub mod synthetic;
pub mod validation;

pub use batch::{run_batch, BatchOptions, BatchReport, Mode, Outcome};
pub use error::{Error, Result};
pub use scenario::{discover_bundles, parse_scenario, Scenario, ScenarioBundle};
pub use synthetic::{build_synthetic, generate_synthetic, SyntheticScenario, SyntheticSpec};
pub use validation::{export_counts_validation, CountsValidation};
