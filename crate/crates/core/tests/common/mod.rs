//! Independent reference computations shared by the integration tests.
//!
//! Everything here is written from the defining formulas with plain loops
//! and `Vec`s, without calling the library routine being checked.

#![allow(dead_code)]

use commscale::model::{sample_network, simulation_params, DcsbmModel, EdgeDistribution, SampleOptions};
use commscale::network::WeightedAdjacency;
use commscale::rng::{derive_seed, stream_rng};
use nalgebra::DMatrix;
use rand::Rng;

pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Alternating row/column normalization `r = 1/(V c)`, `c = 1/(V r)` run
/// until the row sums of `diag(r) V diag(c)` are within `tol` of one. For a
/// symmetric `V` the symmetric factor is `sqrt(r c)`.
pub fn oracle_sinkhorn(v: &[Vec<f64>], tol: f64) -> Vec<f64> {
    let n = v.len();
    let matvec = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| v[i][j] * x[j]).sum()).collect() };
    let mut c = vec![1.0; n];
    let mut r = vec![1.0; n];
    for _ in 0..1_000_000 {
        r = matvec(&c).iter().map(|x| 1.0 / x).collect();
        c = matvec(&r).iter().map(|x| 1.0 / x).collect();
        let rows = matvec(&c);
        let err = (0..n).map(|i| (r[i] * rows[i] - 1.0).abs()).fold(0.0, f64::max);
        if err < tol {
            break;
        }
    }
    (0..n).map(|i| (r[i] * c[i]).sqrt()).collect()
}

/// Plug-in estimates straight from their definitions with indicator sums.
pub struct PlugIn {
    pub theta: Vec<f64>,
    pub b: Vec<Vec<f64>>,
    pub mean: Vec<Vec<f64>>,
    pub block: Vec<Vec<f64>>,
}

pub fn oracle_plugin(a: &[Vec<f64>], labels: &[usize], m: usize) -> PlugIn {
    let n = a.len();
    let ind = |k: usize| -> Vec<f64> { labels.iter().map(|&l| if l == k { 1.0 } else { 0.0 }).collect() };
    let quad = |x: &[f64], y: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += x[i] * a[i][j] * y[j];
            }
        }
        s
    };
    let ones = vec![1.0; n];
    let block: Vec<Vec<f64>> = (0..m)
        .map(|k| (0..m).map(|l| quad(&ind(k), &ind(l))).collect())
        .collect();
    let total: Vec<f64> = (0..m).map(|k| quad(&ind(k), &ones)).collect();
    let d: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let theta = (0..n)
        .map(|i| block[labels[i]][labels[i]].sqrt() / total[labels[i]] * d[i])
        .collect();
    let b = (0..m)
        .map(|k| {
            (0..m)
                .map(|l| block[k][l] / (block[k][k].sqrt() * block[l][l].sqrt()))
                .collect()
        })
        .collect();
    let mean = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let (k, l) = (labels[i], labels[j]);
                    block[k][l] / (total[k] * total[l]) * d[i] * d[j]
                })
                .collect()
        })
        .collect();
    PlugIn { theta, b, mean, block }
}

/// Within-cluster sum of squares of a labeling.
pub fn wcss(rows: &[Vec<f64>], labels: &[usize], m: usize) -> f64 {
    let p = rows.first().map_or(0, |r| r.len());
    let mut total = 0.0;
    for k in 0..m {
        let members: Vec<&Vec<f64>> = rows
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == k)
            .map(|(r, _)| r)
            .collect();
        if members.is_empty() {
            return f64::INFINITY;
        }
        let centroid: Vec<f64> = (0..p)
            .map(|c| members.iter().map(|r| r[c]).sum::<f64>() / members.len() as f64)
            .collect();
        total += members
            .iter()
            .map(|r| r.iter().zip(&centroid).map(|(x, y)| (x - y).powi(2)).sum::<f64>())
            .sum::<f64>();
    }
    total
}

/// Globally optimal k-means partition by enumerating every labeling, in
/// first-appearance canonical form. Returns `(labels, wcss, runner_up_gap)`.
pub fn exhaustive_kmeans(rows: &[Vec<f64>], m: usize) -> (Vec<usize>, f64, f64) {
    let n = rows.len();
    let mut best = (Vec::new(), f64::INFINITY);
    let mut second = f64::INFINITY;
    let mut labels = vec![0usize; n];
    // restricted growth strings enumerate each partition exactly once
    fn rec(
        i: usize,
        used: usize,
        m: usize,
        labels: &mut Vec<usize>,
        rows: &[Vec<f64>],
        best: &mut (Vec<usize>, f64),
        second: &mut f64,
    ) {
        let n = labels.len();
        if i == n {
            if used == m {
                let w = wcss(rows, labels, m);
                if w < best.1 {
                    *second = best.1;
                    *best = (labels.clone(), w);
                } else if w < *second {
                    *second = w;
                }
            }
            return;
        }
        for l in 0..(used + 1).min(m) {
            labels[i] = l;
            rec(i + 1, used.max(l + 1), m, labels, rows, best, second);
        }
    }
    rec(0, 0, m, &mut labels, rows, &mut best, &mut second);
    (best.0, best.1, second - best.1)
}

/// Relabels by first appearance.
pub fn canonical(labels: &[usize]) -> Vec<usize> {
    let mut map = std::collections::HashMap::new();
    labels
        .iter()
        .map(|l| {
            let next = map.len();
            *map.entry(*l).or_insert(next)
        })
        .collect()
}

/// `ln k!` by summation.
pub fn ln_factorial(k: u64) -> f64 {
    (2..=k).map(|x| (x as f64).ln()).sum()
}

/// `ln C(n, k)` by summation.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    ln_factorial(n) - ln_factorial(k) - ln_factorial(n - k)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

pub fn rel_diff(x: f64, y: f64) -> f64 {
    (x - y).abs() / x.abs().max(y.abs()).max(f64::MIN_POSITIVE)
}

/// The three-block Poisson design used by the statistical checks.
pub fn poisson_replicate(
    base: u64,
    rep: u64,
    k: usize,
    rho: f64,
    r: f64,
    n_all: &[usize],
) -> (DcsbmModel, WeightedAdjacency) {
    let seed = derive_seed(base, &[rep]);
    let mut rng = stream_rng(seed, 0);
    let model = simulation_params(k, rho, r, n_all, &mut rng).unwrap();
    let a = sample_network(
        &model.mean_matrix(),
        EdgeDistribution::Poisson,
        derive_seed(seed, &[1]),
        SampleOptions::default(),
    )
    .unwrap();
    (model, a)
}

/// A random symmetric matrix with entries `exp(U(-s, s))`.
pub fn random_positive<R: Rng>(n: usize, spread: f64, rng: &mut R) -> DMatrix<f64> {
    let mut v = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..=j {
            let x = rng.random_range(-spread..spread).exp();
            v[(i, j)] = x;
            v[(j, i)] = x;
        }
    }
    v
}

/// A random valid model with `k` blocks of random size, random `theta` in
/// `[0.3, 2]` and random connectivity in `[0.05, 1]`.
pub fn random_model<R: Rng>(k: usize, rng: &mut R) -> DcsbmModel {
    let sizes: Vec<usize> = (0..k).map(|_| rng.random_range(3..25)).collect();
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let theta = labels.iter().map(|_| rng.random_range(0.3..2.0)).collect();
    let mut b = DMatrix::from_element(k, k, 1.0);
    for a in 0..k {
        for c in 0..a {
            let x = rng.random_range(0.05..1.0);
            b[(a, c)] = x;
            b[(c, a)] = x;
        }
    }
    DcsbmModel::new(theta, labels, b, Default::default()).unwrap()
}
