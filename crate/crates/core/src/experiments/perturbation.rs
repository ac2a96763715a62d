use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::ingest::ImportMatrix;
use crate::model::{final_income, income, IncomeModel};
use crate::shocks::perturb_node;

/// Relative income drop that counts as damage.
pub const DEFAULT_DROP_THRESHOLD: f64 = 0.01;

/// Pairwise damage from perturbing each node in turn.
///
/// `dropped[i][j]` is true when perturbing `i` pushed `j`'s income below
/// `(1 - drop_threshold)` of its baseline. Power percentages count along
/// rows, vulnerability percentages along columns; both divide by the full
/// node count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationTable {
    pub year: i32,
    pub labels: Vec<String>,
    pub import_scale: f64,
    pub export_scale: f64,
    pub drop_threshold: f64,
    pub dropped: Vec<Vec<bool>>,
    pub power_percentage: Vec<f64>,
    pub vulnerability_percentage: Vec<f64>,
    /// Per-row shock failures; failed rows count no drops.
    pub row_errors: Vec<Option<String>>,
}

impl PerturbationTable {
    pub fn n(&self) -> usize {
        self.labels.len()
    }
}

pub fn perturbation_scan(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    import_scale: f64,
    export_scale: f64,
    k: usize,
    drop_threshold: f64,
) -> Result<PerturbationTable, ExperimentError> {
    let n = matrix.n();
    let baseline = income(matrix, model)?;
    let cutoff = 1.0 - drop_threshold;

    let rows: Vec<Result<Vec<bool>, ExperimentError>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let shocked = perturb_node(matrix, model, i, import_scale, export_scale)?;
            let after = final_income(&shocked.matrix, &shocked.model, k)?;
            Ok((0..n).map(|j| j != i && baseline[j] > 0.0 && after[j] < cutoff * baseline[j]).collect())
        })
        .collect();

    let mut dropped = Vec::with_capacity(n);
    let mut row_errors = Vec::with_capacity(n);
    for row in rows {
        match row {
            Ok(r) => {
                dropped.push(r);
                row_errors.push(None);
            }
            Err(e) => {
                dropped.push(vec![false; n]);
                row_errors.push(Some(e.to_string()));
            }
        }
    }

    let pct = |count: usize| 100.0 * count as f64 / n as f64;
    let power_percentage = dropped.iter().map(|row| pct(row.iter().filter(|&&d| d).count())).collect();
    let vulnerability_percentage = (0..n).map(|j| pct(dropped.iter().filter(|row| row[j]).count())).collect();

    Ok(PerturbationTable {
        year: matrix.year(),
        labels: matrix.labels().to_vec(),
        import_scale,
        export_scale,
        drop_threshold,
        dropped,
        power_percentage,
        vulnerability_percentage,
        row_errors,
    })
}

/// The most vulnerable country; the lowest index wins ties.
pub fn max_vulnerability(table: &PerturbationTable) -> Result<(String, f64), ExperimentError> {
    let (i, v) = super::argmax_lowest(table.vulnerability_percentage.iter().copied())
        .ok_or(ExperimentError::EmptyTable)?;
    Ok((table.labels[i].clone(), v))
}
