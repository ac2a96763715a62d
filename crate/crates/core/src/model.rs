//! The income model and its rebalancing dynamics.
//!
//! From an import matrix `M` we derive, per country `i`:
//!
//! - `alpha[i]`, the propensity to spend: `O(i) / D(i)` when export income
//!   `D(i)` covers import spending `O(i)`, otherwise 1;
//! - `beta[i]`, internal income: `O(i) - D(i)` when spending exceeds
//!   export income, otherwise 0;
//! - row `i` of `m`, the propensity to import: `M[i, j] / O(i)`.
//!
//! With these, `O = alpha * D + beta` and `M = diag(O) m`, so `M` is a fixed
//! point of the two-step update
//!
//! ```text
//! I_t     = diag(alpha) M_t^T 1 + beta
//! M_{t+1} = diag(I_t) m
//! ```
//!
//! which is what shocks perturb. `alpha`, `beta` and `m` are never
//! re-derived while iterating.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::ingest::ImportMatrix;

/// Number of income updates used by the extinction and scan analyses.
pub const DEFAULT_ITERATIONS: usize = 5;

/// Condition-number bound above which the equilibrium system is treated as
/// singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("income vector has a non-finite or negative entry at {index}")]
    InvalidIncome { index: usize },
    #[error("iteration diverged at step {iteration}")]
    Divergence { iteration: usize },
    #[error("iteration count must be at least 1")]
    ZeroIterations,
    #[error("equilibrium system is singular (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("equilibrium income is not unique: every alpha is 1 and beta is constant")]
    NonUnique,
}

/// Frozen parameters of the dynamics for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct IncomeModel {
    pub year: i32,
    pub labels: Vec<String>,
    pub alpha: DVector<f64>,
    pub beta: DVector<f64>,
    /// Row-stochastic, or all-zero rows for countries that import nothing.
    pub m: DMatrix<f64>,
}

impl IncomeModel {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    fn check_dim(&self, got: usize) -> Result<(), ModelError> {
        if got == self.n() {
            Ok(())
        } else {
            Err(ModelError::DimensionMismatch { expected: self.n(), got })
        }
    }
}

/// `D(i) = sum_j M[j, i]`: what the rest of the world buys from `i`.
pub fn in_degree(matrix: &ImportMatrix) -> DVector<f64> {
    let values = matrix.values();
    DVector::from_iterator(matrix.n(), values.column_iter().map(|col| col.iter().sum::<f64>()))
}

/// `O(i) = sum_j M[i, j]`: what `i` buys from the rest of the world.
pub fn out_degree(matrix: &ImportMatrix) -> DVector<f64> {
    let values = matrix.values();
    DVector::from_iterator(matrix.n(), values.row_iter().map(|row| row.iter().sum::<f64>()))
}

pub fn derive_model(matrix: &ImportMatrix) -> IncomeModel {
    let n = matrix.n();
    let d = in_degree(matrix);
    let o = out_degree(matrix);
    let mut alpha = DVector::zeros(n);
    let mut beta = DVector::zeros(n);
    for i in 0..n {
        if d[i] == 0.0 && o[i] == 0.0 {
            // isolated: inert under the dynamics
            alpha[i] = 1.0;
        } else if d[i] >= o[i] {
            alpha[i] = o[i] / d[i];
        } else {
            alpha[i] = 1.0;
            beta[i] = o[i] - d[i];
        }
    }
    let values = matrix.values();
    let m = DMatrix::from_fn(n, n, |i, j| if o[i] > 0.0 { values[(i, j)] / o[i] } else { 0.0 });
    IncomeModel { year: matrix.year(), labels: matrix.labels().to_vec(), alpha, beta, m }
}

/// `I = alpha * D_M + beta`.
pub fn income(matrix: &ImportMatrix, model: &IncomeModel) -> Result<DVector<f64>, ModelError> {
    model.check_dim(matrix.n())?;
    Ok(income_unchecked(matrix.values(), model))
}

fn income_unchecked(values: &DMatrix<f64>, model: &IncomeModel) -> DVector<f64> {
    DVector::from_iterator(
        model.n(),
        values
            .column_iter()
            .enumerate()
            .map(|(j, col)| model.alpha[j] * col.iter().sum::<f64>() + model.beta[j]),
    )
}

/// Income from the matrix `diag(prev) m` without materialising it. Same
/// arithmetic, in the same order, as [`step`] followed by [`income`].
fn next_income(prev: &DVector<f64>, model: &IncomeModel) -> DVector<f64> {
    DVector::from_iterator(
        model.n(),
        model.m.column_iter().enumerate().map(|(j, col)| {
            let inflow: f64 = col.iter().zip(prev.iter()).map(|(mij, ii)| ii * mij).sum();
            model.alpha[j] * inflow + model.beta[j]
        }),
    )
}

fn check_income(income: &DVector<f64>) -> Result<(), ModelError> {
    match income.iter().position(|v| !v.is_finite() || *v < 0.0) {
        Some(index) => Err(ModelError::InvalidIncome { index }),
        None => Ok(()),
    }
}

/// `M_{t+1} = diag(I_t) m`.
pub fn step(income: &DVector<f64>, model: &IncomeModel) -> Result<ImportMatrix, ModelError> {
    model.check_dim(income.len())?;
    check_income(income)?;
    Ok(step_unchecked(income, model))
}

fn step_unchecked(income: &DVector<f64>, model: &IncomeModel) -> ImportMatrix {
    let n = model.n();
    let values = DMatrix::from_fn(n, n, |i, j| income[i] * model.m[(i, j)]);
    ImportMatrix::from_parts_unchecked(model.year, model.labels.clone(), values)
}

/// `k` rounds of the dynamics starting from a shocked matrix.
///
/// `matrices[0]` is the shocked matrix itself, `incomes[t]` is the income of
/// `matrices[t]`, and `matrices[t + 1] = diag(incomes[t]) m`. Both vectors
/// have length `k`; the last income is the one the analyses compare against
/// the baseline.
#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub matrices: Vec<ImportMatrix>,
    pub incomes: Vec<DVector<f64>>,
}

impl SimulationTrace {
    pub fn k(&self) -> usize {
        self.incomes.len()
    }

    pub fn final_income(&self) -> &DVector<f64> {
        self.incomes.last().expect("trace has at least one step")
    }

    pub fn final_matrix(&self) -> &ImportMatrix {
        self.matrices.last().expect("trace has at least one step")
    }
}

pub fn iterate(shocked: &ImportMatrix, model: &IncomeModel, k: usize) -> Result<SimulationTrace, ModelError> {
    if k == 0 {
        return Err(ModelError::ZeroIterations);
    }
    model.check_dim(shocked.n())?;
    let mut matrices = Vec::with_capacity(k);
    let mut incomes = Vec::with_capacity(k);
    matrices.push(shocked.clone());
    for t in 0..k {
        let current = income_unchecked(matrices[t].values(), model);
        if current.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Divergence { iteration: t });
        }
        if t + 1 < k {
            matrices.push(step_unchecked(&current, model));
        }
        incomes.push(current);
    }
    Ok(SimulationTrace { matrices, incomes })
}

/// The last income of [`iterate`] without keeping the intermediate
/// matrices. Bit-identical to `iterate(..)?.final_income()`.
pub fn final_income(
    shocked: &ImportMatrix,
    model: &IncomeModel,
    k: usize,
) -> Result<DVector<f64>, ModelError> {
    if k == 0 {
        return Err(ModelError::ZeroIterations);
    }
    model.check_dim(shocked.n())?;
    let mut current = income_unchecked(shocked.values(), model);
    for t in 0..k {
        if current.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::Divergence { iteration: t });
        }
        if t + 1 < k {
            current = next_income(&current, model);
        }
    }
    Ok(current)
}

/// Solves `(diag(alpha) m^T - 1) I = -beta`.
///
/// The system is rejected as singular when its 2-norm condition number
/// exceeds [`SINGULAR_CONDITION`]. If every `alpha` is 1 the matrix is
/// `m^T - 1`, which is singular whenever `m` is stochastic; a constant
/// `beta` (zero included) is then reported as [`ModelError::NonUnique`],
/// otherwise a least-squares solution is accepted if it satisfies the
/// system.
pub fn equilibrium_income(model: &IncomeModel) -> Result<DVector<f64>, ModelError> {
    let n = model.n();
    let mut system = DMatrix::from_fn(n, n, |i, j| model.alpha[i] * model.m[(j, i)]);
    for i in 0..n {
        system[(i, i)] -= 1.0;
    }
    let rhs = -&model.beta;

    let singular_values = system.clone().singular_values();
    let smax = singular_values.max();
    let smin = singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };

    if condition <= SINGULAR_CONDITION {
        if let Some(x) = system.clone().lu().solve(&rhs) {
            return Ok(x);
        }
    }

    if model.alpha.iter().all(|&a| a == 1.0) {
        let b0 = model.beta[0];
        let scale = model.beta.amax().max(1.0);
        if model.beta.iter().all(|b| (b - b0).abs() <= 1e-12 * scale) {
            return Err(ModelError::NonUnique);
        }
        let svd = system.clone().svd(true, true);
        if let Ok(x) = svd.solve(&rhs, 1e-12 * smax) {
            let residual = (&system * &x - &rhs).norm();
            if residual <= 1e-9 * rhs.norm().max(1.0) {
                return Ok(x);
            }
        }
    }
    Err(ModelError::Singular { condition })
}
