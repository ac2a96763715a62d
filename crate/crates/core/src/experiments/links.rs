use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::ingest::ImportMatrix;
use crate::model::{final_income, income, IncomeModel};
use crate::shocks::delete_link;

/// Effect of dissolving one bilateral relationship.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkImpact {
    pub i: usize,
    pub j: usize,
    pub label_i: String,
    pub label_j: String,
    /// Signed percent change of total income; negative is a loss.
    pub impact: f64,
    /// Fraction of total income removed per fraction of total trade carried
    /// by the link, `(-impact / 100) / ((M[i,j] + M[j,i]) / sum(M))`.
    pub weighted_impact: f64,
}

fn impact_against(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    baseline_total: f64,
    i: usize,
    j: usize,
    k: usize,
) -> Result<f64, ExperimentError> {
    let shocked = delete_link(matrix, model, i, j)?;
    let after = final_income(&shocked.matrix, &shocked.model, k)?;
    Ok(100.0 * (after.sum() - baseline_total) / baseline_total)
}

fn baseline_total(matrix: &ImportMatrix, model: &IncomeModel) -> Result<f64, ExperimentError> {
    let total = income(matrix, model)?.sum();
    if total > 0.0 && total.is_finite() {
        Ok(total)
    } else {
        Err(ExperimentError::DegenerateBaseline(total))
    }
}

/// Percent change of total income `k` steps after deleting link `i`-`j`.
pub fn link_impact(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    i: usize,
    j: usize,
    k: usize,
) -> Result<f64, ExperimentError> {
    let base = baseline_total(matrix, model)?;
    impact_against(matrix, model, base, i, j, k)
}

/// Deletes every existing bilateral link in turn.
///
/// Returns the links whose impact is at most `-100 * report_threshold`
/// percent (so `0.005` keeps losses of half a percent or more), sorted by
/// impact, most damaging first, ties in `(i, j)` order. Pass
/// `f64::NEG_INFINITY` to keep every link.
pub fn link_scan(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    k: usize,
    report_threshold: f64,
) -> Result<Vec<LinkImpact>, ExperimentError> {
    let n = matrix.n();
    let base = baseline_total(matrix, model)?;
    let weight_total = matrix.total();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| matrix.get(i, j) + matrix.get(j, i) > 0.0)
        .collect();

    let impacts = pairs
        .par_iter()
        .map(|&(i, j)| impact_against(matrix, model, base, i, j, k))
        .collect::<Result<Vec<_>, _>>()?;

    let cutoff = -100.0 * report_threshold;
    let mut rows: Vec<LinkImpact> = pairs
        .into_iter()
        .zip(impacts)
        .filter(|(_, impact)| *impact <= cutoff)
        .map(|((i, j), impact)| {
            let share = (matrix.get(i, j) + matrix.get(j, i)) / weight_total;
            LinkImpact {
                i,
                j,
                label_i: matrix.label(i).to_string(),
                label_j: matrix.label(j).to_string(),
                impact,
                weighted_impact: -impact / 100.0 / share,
            }
        })
        .collect();
    // stable sort keeps (i, j) order among equal impacts
    rows.sort_by(|a, b| a.impact.total_cmp(&b.impact));
    Ok(rows)
}
