//! Shock constructors.
//!
//! Each constructor takes an unshocked (or previously shocked) matrix and
//! model and returns the shocked matrix together with the adjusted model.
//! Inputs are never mutated. Only rows of `m` whose entries actually change
//! are renormalised; a row emptied by a shock stays all-zero, since the
//! dynamics never create new trading partners.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::ImportMatrix;
use crate::model::IncomeModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShockError {
    #[error("node index {index} out of range for {n} nodes")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("matrix has {matrix} nodes but model has {model}")]
    DimensionMismatch { matrix: usize, model: usize },
    #[error("a link needs two distinct endpoints (got {0} twice)")]
    SelfLink(usize),
    #[error("scale factors must lie in [0, 1] (got a = {a}, b = {b})")]
    ScaleOutOfRange { a: f64, b: f64 },
    #[error("import scale a = 0 with export scale b = {b} > 0 leaves the alpha scaling b/a undefined")]
    UndefinedAlphaScaling { b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shock {
    NodeDelete {
        node: usize,
    },
    NodePerturb {
        node: usize,
        import_scale: f64,
        export_scale: f64,
    },
    /// Endpoints stored with `low < high`.
    LinkDelete {
        low: usize,
        high: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShockedState {
    pub matrix: ImportMatrix,
    pub model: IncomeModel,
    pub shock: Shock,
}

fn check(matrix: &ImportMatrix, model: &IncomeModel, nodes: &[usize]) -> Result<(), ShockError> {
    let n = matrix.n();
    if model.n() != n {
        return Err(ShockError::DimensionMismatch { matrix: n, model: model.n() });
    }
    match nodes.iter().find(|&&i| i >= n) {
        Some(&index) => Err(ShockError::IndexOutOfRange { index, n }),
        None => Ok(()),
    }
}

fn renormalize_rows(m: &mut DMatrix<f64>, rows: impl IntoIterator<Item = usize>) {
    for i in rows {
        let sum: f64 = m.row(i).iter().sum();
        if sum > 0.0 {
            m.row_mut(i).iter_mut().for_each(|x| *x /= sum);
        }
    }
}

/// Disconnects node `i`: its row and column vanish from the matrix and from
/// `m`, the affected rows of `m` are renormalised and `alpha[i] = beta[i] = 0`.
pub fn delete_node(matrix: &ImportMatrix, model: &IncomeModel, i: usize) -> Result<ShockedState, ShockError> {
    check(matrix, model, &[i])?;
    let n = matrix.n();

    let mut values = matrix.values().clone();
    values.row_mut(i).fill(0.0);
    values.column_mut(i).fill(0.0);

    let mut m = model.m.clone();
    let touched: Vec<usize> = (0..n).filter(|&r| r != i && m[(r, i)] != 0.0).collect();
    m.row_mut(i).fill(0.0);
    m.column_mut(i).fill(0.0);
    renormalize_rows(&mut m, touched);

    let mut alpha = model.alpha.clone();
    let mut beta = model.beta.clone();
    alpha[i] = 0.0;
    beta[i] = 0.0;

    Ok(ShockedState {
        matrix: matrix.with_values(values),
        model: IncomeModel { alpha, beta, m, ..model.clone() },
        shock: Shock::NodeDelete { node: i },
    })
}

/// Scales node `i`'s imports by `a` and its exports by `b`.
///
/// Row `i` of the matrix is multiplied by `a` and column `i` by `b`. The
/// same scalings are applied to `m` before renormalising, `alpha[i]` is
/// multiplied by `b / a` (no cap at 1) and `beta` is left alone.
/// `a = b = 0` is a node deletion.
pub fn perturb_node(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    i: usize,
    a: f64,
    b: f64,
) -> Result<ShockedState, ShockError> {
    if !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(ShockError::ScaleOutOfRange { a, b });
    }
    if a == 0.0 {
        return if b == 0.0 {
            delete_node(matrix, model, i)
        } else {
            Err(ShockError::UndefinedAlphaScaling { b })
        };
    }
    check(matrix, model, &[i])?;
    let n = matrix.n();

    let mut values = matrix.values().clone();
    values.row_mut(i).iter_mut().for_each(|x| *x *= a);
    values.column_mut(i).iter_mut().for_each(|x| *x *= b);

    let mut m = model.m.clone();
    let mut touched = Vec::new();
    if a != 1.0 {
        m.row_mut(i).iter_mut().for_each(|x| *x *= a);
        touched.push(i);
    }
    if b != 1.0 {
        for r in 0..n {
            if m[(r, i)] == 0.0 {
                continue;
            }
            m[(r, i)] *= b;
            if r != i {
                touched.push(r);
            }
        }
    }
    touched.sort_unstable();
    touched.dedup();
    renormalize_rows(&mut m, touched);

    let mut alpha = model.alpha.clone();
    alpha[i] *= b / a;

    Ok(ShockedState {
        matrix: matrix.with_values(values),
        model: IncomeModel { alpha, m, ..model.clone() },
        shock: Shock::NodePerturb { node: i, import_scale: a, export_scale: b },
    })
}

/// Dissolves the bilateral relationship between `i` and `j` in both
/// directions. `alpha` and `beta` are unchanged.
pub fn delete_link(
    matrix: &ImportMatrix,
    model: &IncomeModel,
    i: usize,
    j: usize,
) -> Result<ShockedState, ShockError> {
    check(matrix, model, &[i, j])?;
    if i == j {
        return Err(ShockError::SelfLink(i));
    }
    let (low, high) = (i.min(j), i.max(j));

    let mut values = matrix.values().clone();
    values[(low, high)] = 0.0;
    values[(high, low)] = 0.0;

    let mut m = model.m.clone();
    let mut touched = Vec::with_capacity(2);
    for (r, c) in [(low, high), (high, low)] {
        if m[(r, c)] != 0.0 {
            m[(r, c)] = 0.0;
            touched.push(r);
        }
    }
    renormalize_rows(&mut m, touched);

    Ok(ShockedState {
        matrix: matrix.with_values(values),
        model: IncomeModel { m, ..model.clone() },
        shock: Shock::LinkDelete { low, high },
    })
}
