//! Inter-joint correlation, precision, and partial-correlation matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::SessionSeries;

/// Largest condition number accepted before falling back to ridge regularization.
pub const MAX_CONDITION: f64 = 1e12;

/// Tolerance on `|ψ| − 1` that is silently clipped; anything larger is an error.
const PARTIAL_CLIP_TOL: f64 = 1e-9;

/// Ridge values tried, in order, when the correlation matrix is numerically singular.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeLadder(pub Vec<f64>);

impl Default for RidgeLadder {
    fn default() -> Self {
        RidgeLadder(vec![1e-10, 1e-8, 1e-6, 1e-4])
    }
}

/// Sample correlation of standardized columns, `Σ_t r_s(t)·r_s'(t) / (q − 1)`.
///
/// The diagonal is set to exactly 1 and off-diagonal entries are clipped to `[−1, 1]`.
pub fn pearson_matrix(series: &SessionSeries) -> DMatrix<f64> {
    let q = series.q();
    let cols = series.n_joints();
    let x = &series.values;
    let mut out = DMatrix::identity(cols, cols);
    for a in 0..cols {
        for b in (a + 1)..cols {
            let dot = x.column(a).dot(&x.column(b));
            let rho = (dot / (q - 1) as f64).clamp(-1.0, 1.0);
            out[(a, b)] = rho;
            out[(b, a)] = rho;
        }
    }
    out
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.max();
    let min = eig.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

fn max_abs_deviation_from_identity(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((m[(i, j)] - target).abs());
        }
    }
    worst
}

fn try_invert(sigma: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if !(condition_number(sigma) <= MAX_CONDITION) {
        return None;
    }
    let inverse = sigma.clone().cholesky()?.inverse();
    // The inverse of a symmetric matrix is symmetric; remove round-off asymmetry.
    let inverse = (&inverse + inverse.transpose()) * 0.5;
    if max_abs_deviation_from_identity(&(&inverse * sigma)) < 1e-6 {
        Some(inverse)
    } else {
        None
    }
}

/// Invert a correlation matrix, escalating through the ridge ladder when it is
/// singular or ill-conditioned. Returns the inverse and the ridge used (0 for a
/// clean inversion).
pub fn precision_matrix(pearson: &DMatrix<f64>, ladder: &RidgeLadder) -> Result<(DMatrix<f64>, f64)> {
    if !pearson.is_square() {
        return Err(Error::Contract(format!(
            "correlation matrix is {}x{}",
            pearson.nrows(),
            pearson.ncols()
        )));
    }
    if pearson.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in correlation matrix".into()));
    }
    let n = pearson.nrows();
    let mut sigma = (pearson + pearson.transpose()) * 0.5;
    sigma.fill_diagonal(1.0);

    if let Some(theta) = try_invert(&sigma) {
        return Ok((theta, 0.0));
    }
    for &lambda in &ladder.0 {
        let ridged = &sigma + DMatrix::<f64>::identity(n, n) * lambda;
        if let Some(theta) = try_invert(&ridged) {
            return Ok((theta, lambda));
        }
    }
    Err(Error::Numerical(format!(
        "correlation matrix not invertible at any ridge in {:?}",
        ladder.0
    )))
}

/// `ψ_ss' = −θ_ss' / sqrt(θ_ss·θ_s's')`, unit diagonal.
pub fn partial_correlation(precision: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = precision.nrows();
    if let Some(bad) = (0..n).find(|&i| !(precision[(i, i)] > 0.0)) {
        return Err(Error::Numerical(format!(
            "precision matrix diagonal entry {bad} is {}",
            precision[(bad, bad)]
        )));
    }
    let mut psi = DMatrix::identity(n, n);
    for a in 0..n {
        for b in (a + 1)..n {
            let theta_ab = 0.5 * (precision[(a, b)] + precision[(b, a)]);
            let mut value = -theta_ab / (precision[(a, a)] * precision[(b, b)]).sqrt();
            if value.abs() > 1.0 {
                if value.abs() - 1.0 > PARTIAL_CLIP_TOL {
                    return Err(Error::Numerical(format!(
                        "partial correlation ({a},{b}) = {value} outside [-1, 1]"
                    )));
                }
                value = value.clamp(-1.0, 1.0);
            }
            psi[(a, b)] = value;
            psi[(b, a)] = value;
        }
    }
    Ok(psi)
}

/// Correlation structure of one session.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationStructure {
    pub pearson: DMatrix<f64>,
    pub precision: DMatrix<f64>,
    pub partial: DMatrix<f64>,
    pub ridge_applied: f64,
}

impl CorrelationStructure {
    pub fn estimate(series: &SessionSeries, ladder: &RidgeLadder) -> Result<Self> {
        Self::from_pearson(pearson_matrix(series), ladder)
    }

    pub fn from_pearson(pearson: DMatrix<f64>, ladder: &RidgeLadder) -> Result<Self> {
        let (precision, ridge_applied) = precision_matrix(&pearson, ladder)?;
        let partial = partial_correlation(&precision)?;
        Ok(CorrelationStructure {
            pearson,
            precision,
            partial,
            ridge_applied,
        })
    }
}
