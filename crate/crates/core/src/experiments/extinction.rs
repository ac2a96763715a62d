use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax_lowest, ExperimentError};
use crate::ingest::ImportMatrix;
use crate::model::{derive_model, final_income, income, iterate, IncomeModel};
use crate::shocks::delete_node;

/// Remaining-income fraction below which the extinction analysis stops.
pub const DEFAULT_STOP_FRACTION: f64 = 0.5;

/// Outcome of a maximal extinction analysis on one network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeaResult {
    pub year: i32,
    /// Labels of the deleted countries, in deletion order.
    pub deletion_order: Vec<String>,
    pub deleted_indices: Vec<usize>,
    /// The winning power in each round, measured against that round's
    /// starting income.
    pub pow_at_step: Vec<f64>,
    /// Total income after each round over the original total income.
    pub income_fraction_trace: Vec<f64>,
    /// Original-income share of the deleted countries.
    pub robustness: f64,
}

impl MeaResult {
    pub fn final_fraction(&self) -> f64 {
        *self.income_fraction_trace.last().expect("at least one round")
    }

    /// Fraction before the last deletion; 1 when a single round sufficed.
    pub fn penultimate_fraction(&self) -> f64 {
        let t = &self.income_fraction_trace;
        if t.len() >= 2 {
            t[t.len() - 2]
        } else {
            1.0
        }
    }
}

fn positive_total(total: f64) -> Result<f64, ExperimentError> {
    if total > 0.0 && total.is_finite() {
        Ok(total)
    } else {
        Err(ExperimentError::DegenerateBaseline(total))
    }
}

fn power_against(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    baseline_total: f64,
    i: usize,
    k: usize,
) -> Result<f64, ExperimentError> {
    let shocked = delete_node(matrix, model, i)?;
    let after = final_income(&shocked.matrix, &shocked.model, k)?;
    Ok(1.0 - after.sum() / baseline_total)
}

/// Total power of node `i`: the fraction of world income gone `k` steps
/// after disconnecting it. Negative when the deletion raises total income.
pub fn node_power(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    i: usize,
    k: usize,
) -> Result<f64, ExperimentError> {
    let baseline = positive_total(income(matrix, model)?.sum())?;
    power_against(matrix, model, baseline, i, k)
}

/// Maximal extinction analysis.
///
/// Each round deletes the live node of maximum power from the current
/// working state, then continues from the shocked state after `k` steps.
/// The adjusted model carries every deletion so far. Stops once total
/// income drops below `stop_fraction` of the original.
pub fn mea(matrix: &ImportMatrix, k: usize, stop_fraction: f64) -> Result<MeaResult, ExperimentError> {
    if !(stop_fraction > 0.0 && stop_fraction <= 1.0) {
        return Err(ExperimentError::StopFraction(stop_fraction));
    }
    let n = matrix.n();
    let model = derive_model(matrix);
    let original = income(matrix, &model)?;
    let total = positive_total(original.sum())?;

    let mut work_matrix = matrix.clone();
    let mut work_model = model;
    let mut work_total = total;
    let mut live = vec![true; n];

    let mut deleted_indices = Vec::new();
    let mut pow_at_step = Vec::new();
    let mut income_fraction_trace = Vec::new();

    loop {
        let candidates: Vec<usize> = (0..n).filter(|&i| live[i]).collect();
        if candidates.is_empty() {
            return Err(ExperimentError::Exhausted {
                fraction: income_fraction_trace.last().copied().unwrap_or(1.0),
                stop_fraction,
            });
        }
        let powers = candidates
            .par_iter()
            .map(|&i| power_against(&work_matrix, &work_model, work_total, i, k))
            .collect::<Result<Vec<_>, _>>()?;
        let (pos, pow) = argmax_lowest(powers.iter().copied()).expect("nonempty candidates");
        let chosen = candidates[pos];

        let shocked = delete_node(&work_matrix, &work_model, chosen)?;
        let trace = iterate(&shocked.matrix, &shocked.model, k)?;
        let remaining = trace.final_income().sum();
        let fraction = remaining / total;

        live[chosen] = false;
        deleted_indices.push(chosen);
        pow_at_step.push(pow);
        income_fraction_trace.push(fraction);

        if fraction < stop_fraction {
            break;
        }
        work_matrix = trace.final_matrix().clone();
        work_model = shocked.model;
        work_total = remaining;
    }

    let removed: f64 = deleted_indices.iter().map(|&j| original[j]).sum();
    Ok(MeaResult {
        year: matrix.year(),
        deletion_order: deleted_indices.iter().map(|&j| matrix.label(j).to_string()).collect(),
        deleted_indices,
        pow_at_step,
        income_fraction_trace,
        robustness: removed / total,
    })
}

/// Runs [`mea`] on every matrix. A failing year does not stop the others.
pub fn robustness_timeseries(
    series: &[ImportMatrix],
    k: usize,
    stop_fraction: f64,
) -> Vec<(i32, Result<MeaResult, ExperimentError>)> {
    series.par_iter().map(|m| (m.year(), mea(m, k, stop_fraction))).collect()
}
