use std::fmt::Display;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::ingest::ImportMatrix;

pub const DEFAULT_NULL_TRIALS: usize = 50;

/// Which entries of a row the null model shuffles.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModelMode {
    /// Every off-diagonal slot, zeros included.
    #[default]
    WholeRow,
    /// Only the positive entries, among their own positions. Keeps the
    /// sparsity pattern.
    NonzeroOnly,
}

/// Seed of trial `t` of a band seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng.next_u64()
}

/// Randomises the exporters of each importer's flows. Every row sum is
/// preserved exactly and the diagonal stays zero.
pub fn null_model(matrix: &ImportMatrix, seed: u64) -> ImportMatrix {
    null_model_with_mode(matrix, seed, NullModelMode::WholeRow)
}

pub fn null_model_with_mode(matrix: &ImportMatrix, seed: u64, mode: NullModelMode) -> ImportMatrix {
    let n = matrix.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = matrix.values().clone();
    for i in 0..n {
        let slots: Vec<usize> = (0..n)
            .filter(|&j| j != i)
            .filter(|&j| mode == NullModelMode::WholeRow || values[(i, j)] > 0.0)
            .collect();
        let mut entries: Vec<f64> = slots.iter().map(|&j| values[(i, j)]).collect();
        entries.shuffle(&mut rng);
        for (&j, v) in slots.iter().zip(entries) {
            values[(i, j)] = v;
        }
    }
    matrix.with_values(values)
}

/// Distribution of a statistic over null models of one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullBand {
    pub statistic: String,
    pub trials: usize,
    pub successes: usize,
    pub failures: Vec<(usize, String)>,
    pub seed: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    /// Nearest-rank 5% quantile: the `ceil(0.05 * successes)`-th smallest.
    pub q05: f64,
    /// Nearest-rank 95% quantile.
    pub q95: f64,
}

impl NullBand {
    /// True when `observed` lies strictly outside `[q05, q95]`.
    pub fn is_significant(&self, observed: f64) -> bool {
        observed < self.q05 || observed > self.q95
    }
}

fn nearest_rank(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Evaluates `statistic` on `trials` null models of `matrix`, trial `t`
/// seeded with [`trial_seed`]`(seed, t)`. Failing trials are recorded and
/// left out of the band.
pub fn null_band<F, E>(
    matrix: &ImportMatrix,
    name: &str,
    statistic: F,
    trials: usize,
    seed: u64,
) -> Result<NullBand, ExperimentError>
where
    F: Fn(&ImportMatrix) -> Result<f64, E> + Sync,
    E: Display,
{
    if trials < 2 {
        return Err(ExperimentError::TooFewTrials(trials));
    }
    let outcomes: Vec<Result<f64, String>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let null = null_model(matrix, trial_seed(seed, t as u64));
            statistic(&null).map_err(|e| e.to_string())
        })
        .collect();

    let mut values = Vec::with_capacity(trials);
    let mut failures = Vec::new();
    for (t, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(v) => failures.push((t, format!("non-finite statistic {v}"))),
            Err(e) => failures.push((t, e)),
        }
    }
    if values.is_empty() {
        let first = failures.first().map(|(_, e)| e.clone()).unwrap_or_default();
        return Err(ExperimentError::AllTrialsFailed(first));
    }

    let mut sorted = values.clone();
    sorted.sort_by(f64::total_cmp);
    // shifted by the minimum so identical trials give an exact mean
    let shift = sorted[0];
    let mean = shift + values.iter().map(|v| v - shift).sum::<f64>() / values.len() as f64;
    Ok(NullBand {
        statistic: name.to_string(),
        trials,
        successes: values.len(),
        failures,
        seed,
        mean,
        min: sorted[0],
        max: sorted[sorted.len() - 1],
        q05: nearest_rank(&sorted, 0.05),
        q95: nearest_rank(&sorted, 0.95),
    })
}
