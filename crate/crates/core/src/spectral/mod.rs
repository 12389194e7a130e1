//! Spectral clustering (SCORE and regularized spectral clustering) and the
//! eigen and k-means machinery behind it.

mod eigen;
mod kmeans;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

pub use eigen::{eigenvalues_by_magnitude, leading_eigpairs, EigPairs};
pub use kmeans::{kmeans, KMeansOptions, KMeansResult};

use crate::error::{Error, Result};
use crate::network::WeightedAdjacency;
use crate::rng::derive_seed;

/// A partition of `n` nodes into `m` nonempty groups, labels `0..m`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    labels: Vec<usize>,
    m: usize,
}

impl Assignment {
    pub fn new(labels: Vec<usize>, m: usize) -> Result<Self> {
        let mut counts = vec![0usize; m];
        for &l in &labels {
            if l >= m {
                return Err(Error::InvalidArgument(format!("label {l} out of range for m = {m}")));
            }
            counts[l] += 1;
        }
        if m == 0 || counts.contains(&0) {
            return Err(Error::EmptyCluster { m });
        }
        Ok(Self { labels, m })
    }

    pub fn single(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            m: 1,
        }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.m];
        self.labels.iter().for_each(|&l| sizes[l] += 1);
        sizes
    }

    /// Renumbers groups in order of first appearance.
    pub fn canonical(&self) -> Self {
        let mut map = vec![usize::MAX; self.m];
        let mut next = 0;
        let labels = self
            .labels
            .iter()
            .map(|&l| {
                if map[l] == usize::MAX {
                    map[l] = next;
                    next += 1;
                }
                map[l]
            })
            .collect();
        Self { labels, m: self.m }
    }

    /// True when every group of `finer` lies inside a single group of `self`.
    pub fn is_refined_by(&self, finer: &Assignment) -> bool {
        if finer.n() != self.n() {
            return false;
        }
        let mut host = vec![usize::MAX; finer.m];
        finer.labels.iter().zip(&self.labels).all(|(&f, &c)| {
            if host[f] == usize::MAX {
                host[f] = c;
            }
            host[f] == c
        })
    }
}

/// Adjusted Rand index between two labelings of the same nodes.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |c: u64| (c * c.saturating_sub(1)) as f64 / 2.0;
    let index: f64 = table.iter().flatten().map(|&c| pairs(c)).sum();
    let rows: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let cols: f64 = (0..kb).map(|j| pairs(table.iter().map(|r| r[j]).sum())).sum();
    let total = pairs(n as u64);
    let expected = rows * cols / total;
    let max = 0.5 * (rows + cols);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Which spectral embedding feeds k-means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClusterMethod {
    #[default]
    Score,
    Rsc,
}

impl ClusterMethod {
    pub fn name(&self) -> &'static str {
        match self {
            ClusterMethod::Score => "score",
            ClusterMethod::Rsc => "rsc",
        }
    }
}

impl fmt::Display for ClusterMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ClusterMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "score" => Ok(ClusterMethod::Score),
            "rsc" => Ok(ClusterMethod::Rsc),
            other => Err(Error::InvalidArgument(format!(
                "unknown clusterer `{other}` (score, rsc)"
            ))),
        }
    }
}

/// Clustering configuration shared by every step of a selection run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clusterer {
    pub method: ClusterMethod,
    /// RSC regularization; `None` uses `0.25 * mean_degree / n`.
    pub rsc_reg: Option<f64>,
    pub kmeans: KMeansOptions,
}

impl Default for Clusterer {
    fn default() -> Self {
        Self::new(ClusterMethod::Score)
    }
}

impl Clusterer {
    pub fn new(method: ClusterMethod) -> Self {
        Self {
            method,
            rsc_reg: None,
            kmeans: KMeansOptions::default(),
        }
    }

    /// Computes the spectral embedding once so that every `m` reuses it.
    pub fn prepare(&self, a: &WeightedAdjacency) -> Result<PreparedClusterer> {
        let n = a.n();
        let basis = match self.method {
            ClusterMethod::Score => leading_eigpairs(a.weights(), n)?,
            ClusterMethod::Rsc => {
                let reg = match self.rsc_reg {
                    Some(r) if r >= 0.0 => r,
                    Some(r) => {
                        return Err(Error::InvalidArgument(format!(
                            "RSC regularization must be nonnegative, got {r}"
                        )))
                    }
                    None => default_rsc_reg(a),
                };
                leading_eigpairs(&regularized_laplacian(a, reg)?, n)?
            }
        };
        Ok(PreparedClusterer {
            method: self.method,
            basis,
            kmeans: self.kmeans,
        })
    }
}

/// `0.25 * (mean degree) / n`.
pub fn default_rsc_reg(a: &WeightedAdjacency) -> f64 {
    0.25 * a.degrees().mean() / a.n() as f64
}

/// `D^{-1/2} (A + reg J) D^{-1/2}` with `D` the row sums of `A + reg J`.
/// Isolated rows (zero degree) stay zero.
pub fn regularized_laplacian(a: &WeightedAdjacency, reg: f64) -> Result<DMatrix<f64>> {
    let reg_a = a.regularize(reg)?;
    let d = reg_a.degrees();
    let inv_sqrt: Vec<f64> = d.iter().map(|&x| if x > 0.0 { 1.0 / x.sqrt() } else { 0.0 }).collect();
    let w = reg_a.weights();
    let n = a.n();
    Ok(DMatrix::from_fn(n, n, |i, j| inv_sqrt[i] * w[(i, j)] * inv_sqrt[j]))
}

/// A clusterer bound to one network's spectral decomposition.
#[derive(Debug, Clone)]
pub struct PreparedClusterer {
    method: ClusterMethod,
    basis: EigPairs,
    kmeans: KMeansOptions,
}

impl PreparedClusterer {
    pub fn method(&self) -> ClusterMethod {
        self.method
    }

    /// The k-means input rows for `m` groups.
    pub fn embedding(&self, m: usize) -> Result<DMatrix<f64>> {
        let n = self.basis.vectors.nrows();
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "cannot form {m} clusters from {n} nodes"
            )));
        }
        let lead = self.basis.truncated(m).vectors;
        Ok(match self.method {
            ClusterMethod::Score => score_ratios(&lead),
            ClusterMethod::Rsc => row_normalized(&lead),
        })
    }

    /// Partitions the nodes into `m` groups. The k-means seed is derived from
    /// `(seed, m)`.
    pub fn cluster(&self, m: usize, seed: u64) -> Result<Assignment> {
        let n = self.basis.vectors.nrows();
        if m == 1 {
            return Ok(Assignment::single(n));
        }
        let rows = self.embedding(m)?;
        Ok(kmeans(&rows, m, derive_seed(seed, &[m as u64]), &self.kmeans)?.assignment)
    }
}

/// Entrywise ratios `u_{k+1}(i) / u_1(i)` for `k = 1..m-1`, clamped to
/// `[-ln n, ln n]`. A zero leading entry maps to the clamp bound carrying
/// the numerator's sign (or 0 when the numerator is 0 too).
pub fn score_ratios(lead: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = lead.shape();
    let bound = (n as f64).ln();
    DMatrix::from_fn(n, m.saturating_sub(1), |i, k| {
        let num = lead[(i, k + 1)];
        let den = lead[(i, 0)];
        let r = if den == 0.0 {
            if num == 0.0 {
                0.0
            } else {
                num.signum() * bound
            }
        } else {
            num / den
        };
        r.clamp(-bound, bound)
    })
}

fn row_normalized(lead: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = lead.clone();
    for mut row in out.row_iter_mut() {
        let norm = row.norm();
        if norm > 0.0 {
            row /= norm;
        }
    }
    out
}

/// SCORE: k-means on eigenvector ratios of `A`.
pub fn score_cluster(a: &WeightedAdjacency, m: usize, seed: u64, kmeans: &KMeansOptions) -> Result<Assignment> {
    Clusterer {
        method: ClusterMethod::Score,
        rsc_reg: None,
        kmeans: *kmeans,
    }
    .prepare(a)?
    .cluster(m, seed)
}

/// Regularized spectral clustering: k-means on the row-normalized leading
/// eigenvectors of the regularized normalized adjacency.
pub fn rsc_cluster(a: &WeightedAdjacency, m: usize, reg: f64, seed: u64, kmeans: &KMeansOptions) -> Result<Assignment> {
    Clusterer {
        method: ClusterMethod::Rsc,
        rsc_reg: Some(reg),
        kmeans: *kmeans,
    }
    .prepare(a)?
    .cluster(m, seed)
}
