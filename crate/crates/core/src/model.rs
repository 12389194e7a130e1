//! Weighted degree-corrected block models: parameters, mean matrix, and the
//! synthetic generators used in the accuracy studies.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric, Poisson};

use crate::error::{Error, Result};
use crate::network::WeightedAdjacency;
use crate::par::{map_indexed, Execution};
use crate::rng::stream_rng;

/// Number of trials for the binomial and negative binomial generators.
pub const TRIALS: u32 = 5;

/// Maps an entry's mean to its variance.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum VarianceFunction {
    /// `nu(mu) = mu`, the Poisson case.
    #[default]
    Identity,
    /// `nu(mu) = mu (1 - mu)`, defined for `mu` in `(0, 1)`.
    Bernoulli,
    /// `nu(mu) = c mu` with `c > 0`.
    ScaledLinear(f64),
}

impl VarianceFunction {
    pub fn apply(&self, mu: f64) -> f64 {
        match *self {
            VarianceFunction::Identity => mu,
            VarianceFunction::Bernoulli => mu * (1.0 - mu),
            VarianceFunction::ScaledLinear(c) => c * mu,
        }
    }
}

impl fmt::Display for VarianceFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarianceFunction::Identity => f.write_str("identity"),
            VarianceFunction::Bernoulli => f.write_str("bernoulli"),
            VarianceFunction::ScaledLinear(c) => write!(f, "linear:{c}"),
        }
    }
}

impl FromStr for VarianceFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "identity" => Ok(VarianceFunction::Identity),
            "bernoulli" => Ok(VarianceFunction::Bernoulli),
            other => {
                let c = other
                    .strip_prefix("linear:")
                    .and_then(|c| c.parse::<f64>().ok())
                    .filter(|c| *c > 0.0 && c.is_finite())
                    .ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "unknown variance function `{other}` (identity, bernoulli, linear:<c>)"
                        ))
                    })?;
                Ok(VarianceFunction::ScaledLinear(c))
            }
        }
    }
}

/// Edge-weight law of the synthetic generators, parameterized by the mean
/// matrix entry `M_ij`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeDistribution {
    /// `Poisson(M_ij)`.
    Poisson,
    /// `Binomial(5, M_ij / 5)`.
    Binomial,
    /// Failures before the 5th success, success probability `1 - M_ij / 5`.
    /// The mean is `M_ij / (1 - M_ij / 5)`, not `M_ij`.
    NegativeBinomial,
}

impl EdgeDistribution {
    pub fn name(&self) -> &'static str {
        match self {
            EdgeDistribution::Poisson => "poisson",
            EdgeDistribution::Binomial => "binomial",
            EdgeDistribution::NegativeBinomial => "negbinom",
        }
    }

    /// Expected weight of an entry with mean parameter `mu`.
    pub fn expected_weight(&self, mu: f64) -> f64 {
        match self {
            EdgeDistribution::Poisson | EdgeDistribution::Binomial => mu,
            EdgeDistribution::NegativeBinomial => mu / (1.0 - mu / TRIALS as f64),
        }
    }

    fn check_mean(&self, mu: f64, row: usize, col: usize) -> Result<()> {
        let cap = TRIALS as f64;
        let ok = mu.is_finite()
            && mu >= 0.0
            && match self {
                EdgeDistribution::Poisson => true,
                EdgeDistribution::Binomial => mu <= cap,
                EdgeDistribution::NegativeBinomial => mu < cap,
            };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "mean {mu} at ({row}, {col}) is invalid for the {} generator",
                self.name()
            )))
        }
    }

    fn sample<R: Rng>(&self, mu: f64, rng: &mut R) -> f64 {
        if mu == 0.0 {
            return 0.0;
        }
        let p = mu / TRIALS as f64;
        match self {
            EdgeDistribution::Poisson => Poisson::new(mu).expect("positive rate").sample(rng),
            EdgeDistribution::Binomial => Binomial::new(TRIALS as u64, p).expect("p in [0, 1]").sample(rng) as f64,
            EdgeDistribution::NegativeBinomial => {
                let geometric = Geometric::new(1.0 - p).expect("p in [0, 1)");
                (0..TRIALS).map(|_| geometric.sample(rng)).sum::<u64>() as f64
            }
        }
    }
}

impl FromStr for EdgeDistribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(EdgeDistribution::Poisson),
            "binomial" => Ok(EdgeDistribution::Binomial),
            "negbinom" | "negative_binomial" => Ok(EdgeDistribution::NegativeBinomial),
            other => Err(Error::InvalidArgument(format!(
                "unknown distribution `{other}` (poisson, binomial, negbinom)"
            ))),
        }
    }
}

/// Parameters of a weighted DCSBM in identifiable form (`B_kk = 1`).
///
/// Community labels are stored zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct DcsbmModel {
    theta: Vec<f64>,
    labels: Vec<usize>,
    connectivity: DMatrix<f64>,
    variance: VarianceFunction,
}

impl DcsbmModel {
    pub fn new(
        theta: Vec<f64>,
        labels: Vec<usize>,
        connectivity: DMatrix<f64>,
        variance: VarianceFunction,
    ) -> Result<Self> {
        let k = connectivity.nrows();
        if connectivity.ncols() != k || k == 0 {
            return Err(Error::InvalidArgument(
                "connectivity must be a nonempty square matrix".into(),
            ));
        }
        if theta.len() != labels.len() {
            return Err(Error::InvalidArgument("theta and labels differ in length".into()));
        }
        if let Some(t) = theta.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "theta entries must be positive, found {t}"
            )));
        }
        for a in 0..k {
            if connectivity[(a, a)] != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "connectivity diagonal must be 1, found {} at {a}",
                    connectivity[(a, a)]
                )));
            }
            for b in 0..k {
                let v = connectivity[(a, b)];
                if v != connectivity[(b, a)] || !(v > 0.0 && v <= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "connectivity must be symmetric with entries in (0, 1], found {v} at ({a}, {b})"
                    )));
                }
            }
        }
        let mut sizes = vec![0usize; k];
        for &l in &labels {
            if l >= k {
                return Err(Error::InvalidArgument(format!("label {l} exceeds K = {k}")));
            }
            sizes[l] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidArgument(format!("community {} is empty", empty + 1)));
        }
        Ok(Self {
            theta,
            labels,
            connectivity,
            variance,
        })
    }

    /// Builds a model from an arbitrary symmetric positive block matrix,
    /// moving its diagonal scale into `theta` so that `B_kk = 1`. The mean
    /// matrix is unchanged by the move.
    pub fn from_raw(
        theta: Vec<f64>,
        labels: Vec<usize>,
        raw: &DMatrix<f64>,
        variance: VarianceFunction,
    ) -> Result<Self> {
        let k = raw.nrows();
        if raw.ncols() != k || (0..k).any(|a| !(raw[(a, a)] > 0.0)) {
            return Err(Error::InvalidArgument(
                "raw block matrix needs a positive diagonal".into(),
            ));
        }
        let scale: Vec<f64> = (0..k).map(|a| raw[(a, a)].sqrt()).collect();
        let connectivity = DMatrix::from_fn(k, k, |a, b| {
            if a == b {
                1.0
            } else {
                raw[(a, b)] / (scale[a] * scale[b])
            }
        });
        let theta = theta
            .iter()
            .zip(&labels)
            .map(|(t, &l)| t * scale.get(l).copied().unwrap_or(1.0))
            .collect();
        Self::new(theta, labels, connectivity, variance)
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn k(&self) -> usize {
        self.connectivity.nrows()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn connectivity(&self) -> &DMatrix<f64> {
        &self.connectivity
    }

    pub fn variance(&self) -> VarianceFunction {
        self.variance
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k()];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// `M_ij = theta_i theta_j B_{phi(i) phi(j)}`.
    pub fn mean_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        DMatrix::from_fn(n, n, |i, j| {
            self.theta[i] * self.theta[j] * self.connectivity[(self.labels[i], self.labels[j])]
        })
    }

    /// `V = nu(M)` entrywise.
    pub fn variance_matrix(&self) -> DMatrix<f64> {
        self.mean_matrix().map(|mu| self.variance.apply(mu))
    }

    /// Largest `c0` for which the balance, connectivity and degree bounds
    /// of the model assumptions hold: smallest relative block size,
    /// `theta_min / theta_max`, smallest connectivity entry, `|lambda_K(B)|`
    /// and `1 / theta_max`.
    pub fn assumption_constant(&self) -> f64 {
        let n = self.n() as f64;
        let min_block = *self.block_sizes().iter().min().unwrap() as f64 / n;
        let t_max = self.theta.iter().cloned().fold(f64::MIN, f64::max);
        let t_min = self.theta.iter().cloned().fold(f64::MAX, f64::min);
        let b_min = self.connectivity.min();
        let eig = self.connectivity.clone().symmetric_eigenvalues();
        let lambda_k = eig.iter().map(|v| v.abs()).fold(f64::MAX, f64::min);
        [min_block, t_min / t_max, b_min, lambda_k, 1.0 / t_max]
            .into_iter()
            .fold(f64::MAX, f64::min)
    }
}

/// First `k` entries of `n_all`, the block sizes of a `k`-community model.
pub fn block_sizes_prefix(k: usize, n_all: &[usize]) -> Result<Vec<usize>> {
    if k == 0 || k > n_all.len() {
        return Err(Error::InvalidArgument(format!(
            "K = {k} needs at least {k} block sizes, {} available",
            n_all.len()
        )));
    }
    Ok(n_all[..k].to_vec())
}

/// Draws one degree-correction parameter from the mixture
/// `0.8 Uniform(0.6, 1.4) + 0.1 delta(0.5) + 0.1 delta(1.5)`.
pub fn draw_theta<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    if u < 0.8 {
        rng.random_range(0.6..1.4)
    } else if u < 0.9 {
        0.5
    } else {
        1.5
    }
}

/// Simulation model with `B_kl = rho (1 + r 1{k = l})`, blocks from the
/// prefix of `n_all`, and i.i.d. mixture degree parameters. Stored in
/// identifiable form: `B` divided by `rho (1 + r)` and `theta` multiplied by
/// its square root.
pub fn simulation_params<R: Rng + ?Sized>(
    k: usize,
    rho: f64,
    r: f64,
    n_all: &[usize],
    rng: &mut R,
) -> Result<DcsbmModel> {
    if !(rho > 0.0 && r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "rho and r must be positive, got rho = {rho}, r = {r}"
        )));
    }
    let sizes = block_sizes_prefix(k, n_all)?;
    let labels: Vec<usize> = sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let theta: Vec<f64> = (0..labels.len()).map(|_| draw_theta(rng)).collect();
    let diag = rho * (1.0 + r);
    let off = 1.0 / (1.0 + r);
    let connectivity = DMatrix::from_fn(k, k, |a, b| if a == b { 1.0 } else { off });
    let root = diag.sqrt();
    let theta = theta.into_iter().map(|t| t * root).collect();
    DcsbmModel::new(theta, labels, connectivity, VarianceFunction::Identity)
}

/// Options for [`sample_network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SampleOptions {
    pub zero_diagonal: bool,
    pub execution: Execution,
}

/// Samples the upper triangle (diagonal included) independently and mirrors
/// it. Row `i` draws from its own stream under `seed`, so the result does not
/// depend on how rows are scheduled.
pub fn sample_network(
    mean: &DMatrix<f64>,
    dist: EdgeDistribution,
    seed: u64,
    opts: SampleOptions,
) -> Result<WeightedAdjacency> {
    let n = mean.nrows();
    if mean.ncols() != n {
        return Err(Error::InvalidArgument("mean matrix must be square".into()));
    }
    for j in 0..n {
        for i in 0..=j {
            dist.check_mean(mean[(i, j)], i, j)?;
            if mean[(i, j)] != mean[(j, i)] {
                return Err(Error::InvalidArgument(format!(
                    "mean matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let rows: Vec<Vec<f64>> = map_indexed(opts.execution, n, |i| {
        let mut rng = stream_rng(seed, i as u64);
        (i..n)
            .map(|j| {
                if i == j && opts.zero_diagonal {
                    0.0
                } else {
                    dist.sample(mean[(i, j)], &mut rng)
                }
            })
            .collect()
    });
    let mut a = DMatrix::zeros(n, n);
    for (i, row) in rows.iter().enumerate() {
        for (off, &w) in row.iter().enumerate() {
            let j = i + off;
            a[(i, j)] = w;
            a[(j, i)] = w;
        }
    }
    WeightedAdjacency::from_matrix(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_matrix_small_cases() {
        let m = DcsbmModel::new(vec![1.0; 3], vec![0; 3], dmatrix![1.0], VarianceFunction::Identity).unwrap();
        assert_eq!(m.mean_matrix(), DMatrix::from_element(3, 3, 1.0));

        let m = DcsbmModel::new(
            vec![2.0, 1.0],
            vec![0, 1],
            dmatrix![1.0, 0.5; 0.5, 1.0],
            VarianceFunction::Identity,
        )
        .unwrap();
        assert_eq!(m.mean_matrix(), dmatrix![4.0, 1.0; 1.0, 1.0]);
    }

    #[test]
    fn simulation_model_is_stored_identifiably() {
        // with theta pinned to 1 the raw recipe gives 0.36 within and 0.12 between
        let raw = dmatrix![0.36, 0.12; 0.12, 0.36];
        let labels: Vec<usize> = (0..150).map(|i| usize::from(i >= 50)).collect();
        let m = DcsbmModel::from_raw(vec![1.0; 150], labels, &raw, VarianceFunction::Identity).unwrap();
        assert_relative_eq!(m.connectivity()[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
        let mean = m.mean_matrix();
        assert_relative_eq!(mean[(0, 1)], 0.36, epsilon = 1e-15);
        assert_relative_eq!(mean[(0, 100)], 0.12, epsilon = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sim = simulation_params(2, 0.12, 2.0, &[50, 100, 150, 50, 100, 150], &mut rng).unwrap();
        assert_eq!(sim.block_sizes(), vec![50, 100]);
        assert_eq!(sim.n(), 150);
        assert_relative_eq!(sim.connectivity()[(0, 1)], 1.0 / 3.0, epsilon = 1e-15);
        let mean = sim.mean_matrix();
        let (t0, t1) = (sim.theta()[0] / 0.6, sim.theta()[60] / 0.6);
        assert_relative_eq!(mean[(0, 60)], t0 * t1 * 0.12, max_relative = 1e-12);
    }

    #[test]
    fn too_few_block_sizes_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(simulation_params(3, 0.1, 2.0, &[10, 10], &mut rng).is_err());
        assert!(simulation_params(2, -0.1, 2.0, &[10, 10], &mut rng).is_err());
    }

    #[test]
    fn appendix_setting_sizes() {
        let n_all = [20, 60, 20, 60, 20, 60, 20, 60, 20, 60];
        assert_eq!(block_sizes_prefix(10, &n_all).unwrap().iter().sum::<usize>(), 400);
    }

    #[test]
    fn theta_mixture_mean_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 1_000_000;
        let mean = (0..draws).map(|_| draw_theta(&mut rng)).sum::<f64>() / draws as f64;
        assert!((mean - 1.0).abs() < 0.01, "mixture mean {mean}");
    }

    #[test]
    fn degenerate_draws() {
        let zeros = DMatrix::zeros(4, 4);
        let a = sample_network(&zeros, EdgeDistribution::Poisson, 5, SampleOptions::default()).unwrap();
        assert_eq!(a.weights(), &zeros);
        let fives = DMatrix::from_element(4, 4, 5.0);
        let a = sample_network(&fives, EdgeDistribution::Binomial, 5, SampleOptions::default()).unwrap();
        assert_eq!(a.weights(), &fives);
    }

    #[test]
    fn generator_domain_errors() {
        let big = DMatrix::from_element(3, 3, 5.5);
        assert!(sample_network(&big, EdgeDistribution::Binomial, 1, SampleOptions::default()).is_err());
        let five = DMatrix::from_element(3, 3, 5.0);
        assert!(sample_network(&five, EdgeDistribution::NegativeBinomial, 1, SampleOptions::default()).is_err());
        let neg = DMatrix::from_element(3, 3, -0.1);
        assert!(sample_network(&neg, EdgeDistribution::Poisson, 1, SampleOptions::default()).is_err());
    }

    #[test]
    fn poisson_entry_mean_matches_rate() {
        // 10^5 draws of one entry: sample mean within 3 standard errors
        let reps = 100_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let total: f64 = (0..reps)
            .map(|_| EdgeDistribution::Poisson.sample(0.36, &mut rng))
            .sum();
        let mean = total / reps as f64;
        assert!((mean - 0.36).abs() <= 3.0 * (0.36 / reps as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn negative_binomial_mean_follows_parameterization() {
        let reps = 200_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = 1.0;
        let total: f64 = (0..reps)
            .map(|_| EdgeDistribution::NegativeBinomial.sample(mu, &mut rng))
            .sum();
        let expected = EdgeDistribution::NegativeBinomial.expected_weight(mu);
        assert_relative_eq!(expected, 1.25);
        // variance N p / (1-p)^2 = 5 * 0.2 / 0.64
        let se = (5.0 * 0.2 / 0.64 / reps as f64).sqrt();
        assert!((total / reps as f64 - expected).abs() <= 4.0 * se);
    }

    #[test]
    fn sampling_is_symmetric_and_seed_deterministic() {
        let mean = DMatrix::from_fn(30, 30, |i, j| 0.2 + 0.01 * ((i + j) % 7) as f64);
        let serial = SampleOptions {
            execution: Execution::Serial,
            ..SampleOptions::default()
        };
        for dist in [
            EdgeDistribution::Poisson,
            EdgeDistribution::Binomial,
            EdgeDistribution::NegativeBinomial,
        ] {
            let a = sample_network(&mean, dist, 17, SampleOptions::default()).unwrap();
            let b = sample_network(&mean, dist, 17, serial).unwrap();
            assert_eq!(a, b);
            let w = a.weights();
            assert_eq!(w, &w.transpose());
        }
        let a = sample_network(&mean, EdgeDistribution::Poisson, 17, SampleOptions::default()).unwrap();
        let c = sample_network(&mean, EdgeDistribution::Poisson, 18, SampleOptions::default()).unwrap();
        assert_ne!(a, c);
        let z = sample_network(
            &mean,
            EdgeDistribution::Poisson,
            17,
            SampleOptions {
                zero_diagonal: true,
                ..SampleOptions::default()
            },
        )
        .unwrap();
        assert!(!z.has_self_loops());
    }

    #[test]
    fn variance_functions() {
        assert_eq!(VarianceFunction::Identity.apply(1.5), 1.5);
        assert_eq!(VarianceFunction::Bernoulli.apply(0.5), 0.25);
        assert_eq!(VarianceFunction::ScaledLinear(2.0).apply(1.5), 3.0);
        assert_eq!(
            "linear:2".parse::<VarianceFunction>().unwrap(),
            VarianceFunction::ScaledLinear(2.0)
        );
        assert!("linear:-1".parse::<VarianceFunction>().is_err());
    }
}
