//! Symmetric scaling of a positive matrix to doubly stochastic form: find
//! `psi > 0` with `sum_i V_ij psi_i psi_j = 1` for every `j`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingOptions {
    /// Target for the maximum row-sum residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingResult {
    pub psi: Vec<f64>,
    pub iterations: usize,
    /// `max_j |psi_j (V psi)_j - 1|` at the returned `psi`.
    pub residual: f64,
}

fn validate(v: &DMatrix<f64>) -> Result<()> {
    let n = v.nrows();
    if n == 0 || v.ncols() != n {
        return Err(Error::InvalidMatrix(format!(
            "expected a nonempty square matrix, got {}x{}",
            n,
            v.ncols()
        )));
    }
    for j in 0..n {
        for i in 0..n {
            let x = v[(i, j)];
            if !(x > 0.0) || !x.is_finite() {
                return Err(Error::NonPositiveEntry {
                    row: i + 1,
                    col: j + 1,
                    value: x,
                });
            }
            if x != v[(j, i)] {
                return Err(Error::InvalidMatrix(format!(
                    "matrix is not symmetric at ({}, {})",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    Ok(())
}

fn residual_of(psi: &DVector<f64>, vpsi: &DVector<f64>) -> f64 {
    psi.iter()
        .zip(vpsi.iter())
        .map(|(p, q)| (p * q - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Scales `v` starting from `psi_i = 1 / sqrt(row sum i)`.
pub fn sinkhorn_symmetric(v: &DMatrix<f64>, opts: &ScalingOptions) -> Result<ScalingResult> {
    validate(v)?;
    let init: Vec<f64> = v.row_iter().map(|r| 1.0 / r.sum().sqrt()).collect();
    iterate(v, DVector::from_vec(init), opts)
}

/// Scales `v` from a caller-supplied positive starting point.
pub fn sinkhorn_symmetric_from(v: &DMatrix<f64>, init: &[f64], opts: &ScalingOptions) -> Result<ScalingResult> {
    validate(v)?;
    if init.len() != v.nrows() || init.iter().any(|x| !(*x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "starting point must be a positive vector of matching length".into(),
        ));
    }
    iterate(v, DVector::from_column_slice(init), opts)
}

/// Damped fixed point `psi <- sqrt(psi / (V psi))`.
fn iterate(v: &DMatrix<f64>, mut psi: DVector<f64>, opts: &ScalingOptions) -> Result<ScalingResult> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let mut vpsi = v * &psi;
    let mut residual = residual_of(&psi, &vpsi);
    let mut iterations = 0;
    while residual > opts.tol {
        if iterations == opts.max_iter {
            return Err(Error::ScalingNotConverged { iterations, residual });
        }
        psi.zip_apply(&vpsi, |p, q| *p = (*p / q).sqrt());
        vpsi = v * &psi;
        residual = residual_of(&psi, &vpsi);
        iterations += 1;
        if !residual.is_finite() {
            return Err(Error::ScalingNotConverged { iterations, residual });
        }
    }
    Ok(ScalingResult {
        psi: psi.as_slice().to_vec(),
        iterations,
        residual,
    })
}

/// `max_j |sum_i V_ij psi_i psi_j - 1|`.
pub fn doubly_stochastic_residual(v: &DMatrix<f64>, psi: &[f64]) -> f64 {
    let p = DVector::from_column_slice(psi);
    residual_of(&p, &(v * &p))
}

/// `Psi^{1/2} A Psi^{1/2}`, i.e. `S_ij = sqrt(psi_i) A_ij sqrt(psi_j)`.
pub fn scaled_matrix(a: &DMatrix<f64>, psi: &[f64]) -> DMatrix<f64> {
    let root: Vec<f64> = psi.iter().map(|p| p.sqrt()).collect();
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| root[i] * a[(i, j)] * root[j])
}

/// Lower and upper bounds every scaling factor of `v` must satisfy:
/// `sqrt(v_min) / (sqrt(n) v_max)` and `sqrt(v_max) / (sqrt(n) v_min)`.
pub fn psi_bounds(v: &DMatrix<f64>) -> (f64, f64) {
    let n = v.nrows() as f64;
    let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = v.iter().copied().fold(0.0, f64::max);
    (vmin.sqrt() / (n.sqrt() * vmax), vmax.sqrt() / (n.sqrt() * vmin))
}
