//! The robustness analyses built on top of the shock constructors.
//!
//! Everything here that loops over nodes, links or trials runs on the rayon
//! pool of the caller. Results are collected in index order and reduced
//! sequentially, so output does not depend on the number of threads.

mod extinction;
mod links;
mod null;
mod perturbation;

use thiserror::Error;

use crate::model::ModelError;
use crate::shocks::ShockError;

pub use extinction::{mea, node_power, robustness_timeseries, MeaResult, DEFAULT_STOP_FRACTION};
pub use links::{link_impact, link_scan, LinkImpact};
pub use null::{
    null_band, null_model, null_model_with_mode, trial_seed, NullBand, NullModelMode, DEFAULT_NULL_TRIALS,
};
pub use perturbation::{max_vulnerability, perturbation_scan, PerturbationTable, DEFAULT_DROP_THRESHOLD};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExperimentError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Shock(#[from] ShockError),
    #[error("baseline income sums to {0}; relative measures are undefined")]
    DegenerateBaseline(f64),
    #[error("all nodes deleted but remaining income fraction {fraction} never fell below {stop_fraction}")]
    Exhausted { fraction: f64, stop_fraction: f64 },
    #[error("stop fraction must lie in (0, 1], got {0}")]
    StopFraction(f64),
    #[error("table has no nodes")]
    EmptyTable,
    #[error("a null band needs at least 2 trials, got {0}")]
    TooFewTrials(usize),
    #[error("every null-model trial failed; first failure: {0}")]
    AllTrialsFailed(String),
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax_lowest(values: impl IntoIterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}
