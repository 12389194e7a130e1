//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use nalgebra::DMatrix;
use rand::Rng;

use super::Assignment;
use crate::error::{Error, Result};
use crate::par::{map_indexed, Execution};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Lloyd stops once the relative WCSS improvement falls below this.
    pub tol: f64,
    pub execution: Execution,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 50,
            max_iter: 100,
            tol: 1e-9,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignment: Assignment,
    /// Within-cluster sum of squares.
    pub wcss: f64,
    /// Index of the restart that produced the result.
    pub restart: usize,
}

fn sq_dist(rows: &DMatrix<f64>, i: usize, center: &[f64]) -> f64 {
    center
        .iter()
        .enumerate()
        .map(|(c, &x)| {
            let d = rows[(i, c)] - x;
            d * d
        })
        .sum()
}

fn nearest(rows: &DMatrix<f64>, i: usize, centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.iter().enumerate() {
        let d = sq_dist(rows, i, c);
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn row(rows: &DMatrix<f64>, i: usize) -> Vec<f64> {
    rows.row(i).iter().copied().collect()
}

/// k-means++ seeding. `None` when fewer than `m` distinct rows can be reached.
fn plus_plus<R: Rng>(rows: &DMatrix<f64>, m: usize, rng: &mut R) -> Option<Vec<Vec<f64>>> {
    let n = rows.nrows();
    let mut centers = vec![row(rows, rng.random_range(0..n))];
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(rows, i, &centers[0])).collect();
    while centers.len() < m {
        let total: f64 = dist.iter().sum();
        if !(total > 0.0) {
            return None;
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (i, &d) in dist.iter().enumerate() {
            if d > 0.0 {
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
        }
        let c = row(rows, pick?);
        for (i, d) in dist.iter_mut().enumerate() {
            *d = d.min(sq_dist(rows, i, &c));
        }
        centers.push(c);
    }
    Some(centers)
}

/// One seeded Lloyd run. Returns labels and WCSS, or `None` if a cluster
/// emptied out.
fn lloyd<R: Rng>(rows: &DMatrix<f64>, m: usize, opts: &KMeansOptions, rng: &mut R) -> Option<(Vec<usize>, f64)> {
    let (n, p) = rows.shape();
    let mut centers = plus_plus(rows, m, rng)?;
    let mut labels = vec![0usize; n];
    let mut previous = f64::INFINITY;
    for _ in 0..opts.max_iter.max(1) {
        let mut wcss = 0.0;
        for (i, label) in labels.iter_mut().enumerate() {
            let (k, d) = nearest(rows, i, &centers);
            *label = k;
            wcss += d;
        }
        let mut sums = vec![vec![0.0; p]; m];
        let mut counts = vec![0usize; m];
        for (i, &k) in labels.iter().enumerate() {
            counts[k] += 1;
            for (c, s) in sums[k].iter_mut().enumerate() {
                *s += rows[(i, c)];
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for ((center, sum), &count) in centers.iter_mut().zip(sums).zip(&counts) {
            *center = sum.into_iter().map(|s| s / count as f64).collect();
        }
        let improvement = previous - wcss;
        previous = wcss;
        if improvement <= opts.tol * wcss.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    // final assignment against the final centers
    let mut wcss = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let (k, d) = nearest(rows, i, &centers);
        *label = k;
        wcss += d;
    }
    let mut counts = vec![0usize; m];
    labels.iter().for_each(|&k| counts[k] += 1);
    if counts.contains(&0) {
        return None;
    }
    Some((labels, wcss))
}

/// Clusters the rows of `rows` (`n x p`) into `m` groups.
///
/// Restart `r` draws from stream `r` under `seed`; the run with the smallest
/// WCSS wins, ties going to the lowest restart index. Labels are renumbered
/// in order of first appearance.
pub fn kmeans(rows: &DMatrix<f64>, m: usize, seed: u64, opts: &KMeansOptions) -> Result<KMeansResult> {
    let n = rows.nrows();
    if m == 0 || m > n {
        return Err(Error::InvalidArgument(format!(
            "cannot form {m} clusters from {n} points"
        )));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("k-means input has non-finite entries".into()));
    }
    if m == 1 {
        let centroid: Vec<f64> = (0..rows.ncols()).map(|c| rows.column(c).sum() / n as f64).collect();
        let wcss = (0..n).map(|i| sq_dist(rows, i, &centroid)).sum();
        return Ok(KMeansResult {
            assignment: Assignment::single(n),
            wcss,
            restart: 0,
        });
    }
    let runs = map_indexed(opts.execution, opts.restarts.max(1), |r| {
        let mut rng = stream_rng(seed, r as u64);
        lloyd(rows, m, opts, &mut rng)
    });
    let (restart, (labels, wcss)) = runs
        .into_iter()
        .enumerate()
        .filter_map(|(r, run)| run.map(|x| (r, x)))
        .fold(None, |best: Option<(usize, (Vec<usize>, f64))>, cand| match best {
            Some(b) if b.1 .1 <= cand.1 .1 => Some(b),
            _ => Some(cand),
        })
        .ok_or(Error::EmptyCluster { m })?;
    Ok(KMeansResult {
        assignment: Assignment::new(labels, m)?.canonical(),
        wcss,
        restart,
    })
}
