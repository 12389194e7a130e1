//! Plug-in estimates of the degree-corrected block model given a candidate
//! partition.
//!
//! With `S_kl` the total weight between estimated groups `k` and `l` and
//! `T_k = sum_l S_kl` the total weight incident to group `k`:
//!
//! * `theta_i = sqrt(S_kk) / T_k * d_i`
//! * `B_kl = S_kl / sqrt(S_kk * S_ll)`
//! * `M_ij = S_kl / (T_k * T_l) * d_i * d_j`

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::VarianceFunction;
use crate::network::WeightedAdjacency;
use crate::spectral::Assignment;

/// How the fitted variance profile is kept strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VarianceFloor {
    /// Floor at this multiple of the mean positive entry.
    Relative(f64),
    /// Floor at a fixed value.
    Absolute(f64),
}

impl Default for VarianceFloor {
    fn default() -> Self {
        VarianceFloor::Relative(1e-8)
    }
}

/// `S_kl`, the summed weight between groups `k` and `l`.
pub fn block_sums(a: &WeightedAdjacency, assignment: &Assignment) -> Result<DMatrix<f64>> {
    check_len(a, assignment)?;
    let m = assignment.m();
    let labels = assignment.labels();
    let w = a.weights();
    let mut s = DMatrix::zeros(m, m);
    for j in 0..a.n() {
        let lj = labels[j];
        for (i, &li) in labels.iter().enumerate() {
            s[(li, lj)] += w[(i, j)];
        }
    }
    Ok(s)
}

fn check_len(a: &WeightedAdjacency, assignment: &Assignment) -> Result<()> {
    if assignment.n() != a.n() {
        return Err(Error::InvalidArgument(format!(
            "assignment covers {} nodes but the network has {}",
            assignment.n(),
            a.n()
        )));
    }
    Ok(())
}

/// Block sums with their row totals, rejecting groups without incident
/// weight.
fn totals_checked(a: &WeightedAdjacency, assignment: &Assignment) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let s = block_sums(a, assignment)?;
    let totals: Vec<f64> = (0..s.nrows()).map(|k| s.row(k).sum()).collect();
    if let Some(k) = totals.iter().position(|t| !(*t > 0.0)) {
        return Err(Error::DegenerateFit(format!("group {} has no incident weight", k + 1)));
    }
    Ok((s, totals))
}

fn internal_weight(s: &DMatrix<f64>) -> Result<()> {
    match (0..s.nrows()).find(|&k| !(s[(k, k)] > 0.0)) {
        Some(k) => Err(Error::DegenerateFit(format!("group {} has no internal weight", k + 1))),
        None => Ok(()),
    }
}

/// Block sums with their row totals, rejecting groups without internal or
/// incident weight.
fn checked_sums(a: &WeightedAdjacency, assignment: &Assignment) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (s, totals) = totals_checked(a, assignment)?;
    internal_weight(&s)?;
    Ok((s, totals))
}

pub fn estimate_theta(a: &WeightedAdjacency, assignment: &Assignment) -> Result<Vec<f64>> {
    let (s, totals) = checked_sums(a, assignment)?;
    Ok(theta_from(&s, &totals, &a.degrees(), assignment.labels()))
}

fn theta_from(s: &DMatrix<f64>, totals: &[f64], d: &[f64], labels: &[usize]) -> Vec<f64> {
    labels
        .iter()
        .zip(d)
        .map(|(&k, &di)| s[(k, k)].sqrt() / totals[k] * di)
        .collect()
}

pub fn estimate_connectivity(a: &WeightedAdjacency, assignment: &Assignment) -> Result<DMatrix<f64>> {
    let (s, _) = checked_sums(a, assignment)?;
    Ok(connectivity_from(&s))
}

fn connectivity_from(s: &DMatrix<f64>) -> DMatrix<f64> {
    let m = s.nrows();
    DMatrix::from_fn(m, m, |k, l| {
        if k == l {
            1.0
        } else {
            s[(k, l)] / (s[(k, k)].sqrt() * s[(l, l)].sqrt())
        }
    })
}

/// Needs only positive incident weight per group.
pub fn estimate_mean(a: &WeightedAdjacency, assignment: &Assignment) -> Result<DMatrix<f64>> {
    let (s, totals) = totals_checked(a, assignment)?;
    Ok(mean_from(&s, &totals, &a.degrees(), assignment.labels()))
}

fn mean_from(s: &DMatrix<f64>, totals: &[f64], d: &[f64], labels: &[usize]) -> DMatrix<f64> {
    let n = labels.len();
    let m = s.nrows();
    let rate = DMatrix::from_fn(m, m, |k, l| s[(k, l)] / (totals[k] * totals[l]));
    let mut out = DMatrix::from_fn(n, n, |i, j| rate[(labels[i], labels[j])] * d[i] * d[j]);
    // exact symmetry regardless of rounding in `rate`
    for j in 0..n {
        for i in 0..j {
            out[(j, i)] = out[(i, j)];
        }
    }
    out
}

/// `nu(M)` entrywise, floored to stay strictly positive.
///
/// The Bernoulli variance function is only defined for means in `(0, 1)`; a
/// fitted mean of 1 or more is an error.
pub fn estimate_variance(mean: &DMatrix<f64>, nu: VarianceFunction, floor: VarianceFloor) -> Result<DMatrix<f64>> {
    if let VarianceFunction::Bernoulli = nu {
        let n = mean.nrows();
        for (idx, &mu) in mean.iter().enumerate() {
            if mu >= 1.0 {
                let (i, j) = (idx % n, idx / n);
                return Err(Error::DegenerateFit(format!(
                    "fitted mean {mu} at ({}, {}) is outside the Bernoulli range",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    let raw = mean.map(|mu| nu.apply(mu.max(0.0)));
    let eps = match floor {
        VarianceFloor::Absolute(x) => x,
        VarianceFloor::Relative(c) => {
            let (sum, count) = raw
                .iter()
                .filter(|v| **v > 0.0)
                .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
            if count == 0 {
                return Err(Error::DegenerateFit("variance profile is identically zero".into()));
            }
            c * sum / count as f64
        }
    };
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "variance floor must be positive, got {eps}"
        )));
    }
    Ok(raw.map(|v| v.max(eps)))
}

/// All plug-in estimates for one candidate count `m`.
///
/// The mean only needs every group to carry some weight. The split into
/// `theta` and `connectivity` also needs weight inside every group; when a
/// group has none (a singleton without a self-loop, say) both are `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedStep {
    pub m: usize,
    pub assignment: Assignment,
    pub theta: Option<Vec<f64>>,
    pub connectivity: Option<DMatrix<f64>>,
    pub mean: DMatrix<f64>,
    pub variance: DMatrix<f64>,
}

impl FittedStep {
    pub fn block_sizes(&self) -> Vec<usize> {
        self.assignment.sizes()
    }
}

pub fn fit_step(
    a: &WeightedAdjacency,
    assignment: Assignment,
    nu: VarianceFunction,
    floor: VarianceFloor,
) -> Result<FittedStep> {
    let (s, totals) = totals_checked(a, &assignment)?;
    let d = a.degrees();
    let labels = assignment.labels();
    let factored = internal_weight(&s).is_ok();
    let theta = factored.then(|| theta_from(&s, &totals, &d, labels));
    let connectivity = factored.then(|| connectivity_from(&s));
    let mean = mean_from(&s, &totals, &d, labels);
    let variance = estimate_variance(&mean, nu, floor)?;
    Ok(FittedStep {
        m: assignment.m(),
        assignment,
        theta,
        connectivity,
        mean,
        variance,
    })
}
