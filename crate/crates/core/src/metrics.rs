//! Network summary statistics and least-squares fits.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, StudentsT};
use thiserror::Error;

use crate::ingest::ImportMatrix;
use crate::model::{in_degree, out_degree};

/// Positive off-diagonal entries over `n^2`. The diagonal stays in the
/// denominator.
pub fn connectance(matrix: &ImportMatrix) -> f64 {
    let n = matrix.n();
    let edges = matrix.values().iter().filter(|&&v| v > 0.0).count();
    edges as f64 / (n * n) as f64
}

fn max_labeled(matrix: &ImportMatrix, values: DVector<f64>) -> (String, f64) {
    let (i, v) = crate::experiments::argmax_lowest(values.iter().copied()).expect("at least one node");
    (matrix.label(i).to_string(), v)
}

/// Largest `D(i) - O(i)` (export income minus import spending) and the
/// country it belongs to.
pub fn max_trade_deficit(matrix: &ImportMatrix) -> (String, f64) {
    max_labeled(matrix, in_degree(matrix) - out_degree(matrix))
}

/// Largest `O(i) - D(i)` and the country it belongs to.
pub fn max_trade_surplus(matrix: &ImportMatrix) -> (String, f64) {
    max_labeled(matrix, out_degree(matrix) - in_degree(matrix))
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("x and y lengths differ ({x} vs {y})")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("regressor is degenerate (design matrix is rank deficient)")]
    DegenerateRegressor,
    #[error("non-finite sample")]
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    /// Intercept first, then ascending powers of x.
    pub coefficients: Vec<f64>,
    pub r_squared: f64,
    pub p_value: f64,
    pub n: usize,
}

fn check_samples(x: &[f64], y: &[f64], needed: usize) -> Result<(), FitError> {
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < needed {
        return Err(FitError::InsufficientData { needed, got: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Ordinary least squares line with a two-sided slope t-test.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<FitResult, FitError> {
    check_samples(x, y, 3)?;
    let n = x.len();
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(FitError::DegenerateRegressor);
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    if ss_tot == 0.0 {
        return Ok(FitResult { coefficients: vec![my, 0.0], r_squared: 0.0, p_value: 1.0, n });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - intercept - slope * xi).powi(2)).sum();
    let r_squared = (1.0 - ss_res / ss_tot).clamp(0.0, 1.0);

    let dof = (n - 2) as f64;
    let se = (ss_res / dof / sxx).sqrt();
    let p_value = if se == 0.0 {
        0.0
    } else {
        let t = (slope / se).abs();
        let dist = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
        (2.0 * dist.sf(t)).clamp(0.0, 1.0)
    };
    Ok(FitResult { coefficients: vec![intercept, slope], r_squared, p_value, n })
}

/// Degree-2 least squares via QR, with the overall F-test against the
/// intercept-only model.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Result<FitResult, FitError> {
    check_samples(x, y, 4)?;
    let n = x.len();
    let design = DMatrix::from_fn(n, 3, |i, p| x[i].powi(p as i32));
    let target = DVector::from_column_slice(y);

    let qr = design.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if rmax == 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-10 * rmax) {
        return Err(FitError::DegenerateRegressor);
    }
    let qty = qr.q().transpose() * &target;
    let coef = r.solve_upper_triangular(&qty).ok_or(FitError::DegenerateRegressor)?;

    let my = mean(y);
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    let fitted = &design * &coef;
    let ss_res: f64 = (&target - fitted).iter().map(|e| e * e).sum();
    let coefficients = coef.iter().copied().collect();
    if ss_tot == 0.0 {
        return Ok(FitResult { coefficients, r_squared: 0.0, p_value: 1.0, n });
    }
    let r_squared = (1.0 - ss_res / ss_tot).clamp(0.0, 1.0);
    let (df_model, df_resid) = (2.0, (n - 3) as f64);
    let p_value = if ss_res <= f64::EPSILON * ss_tot {
        0.0
    } else {
        let f = ((ss_tot - ss_res) / df_model) / (ss_res / df_resid);
        let dist = FisherSnedecor::new(df_model, df_resid).expect("positive degrees of freedom");
        dist.sf(f.max(0.0)).clamp(0.0, 1.0)
    };
    Ok(FitResult { coefficients, r_squared, p_value, n })
}
