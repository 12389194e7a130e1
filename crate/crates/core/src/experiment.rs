//! Monte Carlo accuracy studies and the Les Misérables analysis.
//!
//! Experiment configs are plain `key = value` files:
//!
//! ```text
//! # Poisson, rho = 0.12, r = 2
//! distribution = poisson
//! rho = 0.12
//! r = 2
//! k = 2, 3, 4
//! n_all = 50, 100, 150, 50, 100, 150
//! replicates = 100
//! seed = 1
//! methods = svps:score:0.05, cbic:score, icl:score
//! ```
//!
//! A method is `selector:clusterer[:parameter]`, the parameter being epsilon
//! for `svps` (default 0.05) and lambda for `cbic` (default 1).

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::model::{sample_network, simulation_params, EdgeDistribution, SampleOptions, VarianceFunction};
use crate::network::WeightedAdjacency;
use crate::par::{map_indexed, Execution};
use crate::rng::{derive_seed, stream_rng};
use crate::select::{score_select, svps_select, Likelihood, ScoreConfig, SelectionMethod, SvpsConfig};
use crate::spectral::{ClusterMethod, Clusterer};

/// One selector/clusterer pairing to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub selector: SelectionMethod,
    pub cluster: ClusterMethod,
    /// Epsilon for SVPS, lambda for CBIC, unused for ICL.
    pub param: f64,
}

impl MethodSpec {
    pub fn svps(cluster: ClusterMethod, epsilon: f64) -> Self {
        Self {
            selector: SelectionMethod::Svps,
            cluster,
            param: epsilon,
        }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.selector {
            SelectionMethod::Icl => write!(f, "{}:{}", self.selector, self.cluster),
            _ => write!(f, "{}:{}:{}", self.selector, self.cluster, self.param),
        }
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        if parts.len() < 2 || parts.len() > 3 {
            return Err(Error::InvalidArgument(format!(
                "method `{s}` should look like selector:clusterer[:parameter]"
            )));
        }
        let selector: SelectionMethod = parts[0].parse()?;
        let cluster: ClusterMethod = parts[1].parse()?;
        let default = match selector {
            SelectionMethod::Svps => 0.05,
            SelectionMethod::Cbic => 1.0,
            SelectionMethod::Icl => 0.0,
        };
        let param = match parts.get(2) {
            None => default,
            Some(_) if selector == SelectionMethod::Icl => {
                return Err(Error::InvalidArgument("icl takes no parameter".into()))
            }
            Some(p) => p
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad method parameter `{p}`")))?,
        };
        if selector == SelectionMethod::Svps && !(param > 0.0) {
            return Err(Error::InvalidArgument(format!("epsilon must be positive, got {param}")));
        }
        if selector == SelectionMethod::Cbic && !(param >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be nonnegative, got {param}"
            )));
        }
        Ok(Self {
            selector,
            cluster,
            param,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub distribution: EdgeDistribution,
    pub rho: f64,
    pub r: f64,
    pub k_list: Vec<usize>,
    pub n_all: Vec<usize>,
    pub replicates: usize,
    pub seed: u64,
    pub methods: Vec<MethodSpec>,
    /// Use the mean matrix itself as the network.
    pub noiseless: bool,
    pub zero_diagonal: bool,
    /// Largest `m` SVPS examines.
    pub svps_m_max: usize,
    /// CBIC and ICL scan `m = 1..=K + score_extra`.
    pub score_extra: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            distribution: EdgeDistribution::Poisson,
            rho: 0.12,
            r: 2.0,
            k_list: vec![2, 3, 4, 5, 6],
            n_all: vec![50, 100, 150, 50, 100, 150],
            replicates: 100,
            seed: 0,
            methods: vec![MethodSpec::svps(ClusterMethod::Score, 0.05)],
            noiseless: false,
            zero_diagonal: false,
            svps_m_max: 12,
            score_extra: 4,
        }
    }
}

fn parse_list<T: FromStr>(value: &str, line: usize) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|x| {
            x.trim().parse().map_err(|_| Error::Config {
                line,
                message: format!("bad list entry `{}`", x.trim()),
            })
        })
        .collect()
}

fn parse_value<T: FromStr>(value: &str, line: usize) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("bad value `{value}`"),
    })
}

impl ExperimentConfig {
    /// Parses `key = value` lines; keys not given keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: "expected `key = value`".into(),
            })?;
            let value = value.trim();
            match key.trim() {
                "distribution" => {
                    cfg.distribution = value.parse().map_err(|e: Error| Error::Config {
                        line,
                        message: e.to_string(),
                    })?
                }
                "rho" => cfg.rho = parse_value(value, line)?,
                "r" => cfg.r = parse_value(value, line)?,
                "k" => cfg.k_list = parse_list(value, line)?,
                "n_all" => cfg.n_all = parse_list(value, line)?,
                "replicates" => cfg.replicates = parse_value(value, line)?,
                "seed" => cfg.seed = parse_value(value, line)?,
                "methods" => {
                    cfg.methods = value
                        .split(',')
                        .map(|m| {
                            m.parse().map_err(|e: Error| Error::Config {
                                line,
                                message: e.to_string(),
                            })
                        })
                        .collect::<Result<_>>()?
                }
                "noiseless" => cfg.noiseless = parse_value(value, line)?,
                "zero_diagonal" => cfg.zero_diagonal = parse_value(value, line)?,
                "m_max" => cfg.svps_m_max = parse_value(value, line)?,
                "score_extra" => cfg.score_extra = parse_value(value, line)?,
                other => {
                    return Err(Error::Config {
                        line,
                        message: format!("unknown key `{other}`"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Err(Error::Config { line: 0, message });
        if self.replicates == 0 {
            return bad("replicates must be at least 1".into());
        }
        if !(self.rho > 0.0) || !(self.r > 0.0) {
            return bad(format!("rho and r must be positive, got {} and {}", self.rho, self.r));
        }
        if self.k_list.is_empty() || self.methods.is_empty() {
            return bad("k and methods must be nonempty".into());
        }
        if self.svps_m_max == 0 {
            return bad("m_max must be at least 1".into());
        }
        for &k in &self.k_list {
            if k == 0 || k > self.n_all.len() {
                return bad(format!("K = {k} needs {k} block sizes, n_all has {}", self.n_all.len()));
            }
        }
        // the largest mean is theta_max^2 rho (1 + r) with theta_max = 1.4 or 1.5
        let peak = 1.5f64.powi(2) * self.rho * (1.0 + self.r);
        let cap = crate::model::TRIALS as f64;
        match self.distribution {
            EdgeDistribution::Binomial if peak > cap => bad(format!("binomial means can reach {peak}, above {cap}")),
            EdgeDistribution::NegativeBinomial if peak >= cap => {
                bad(format!("negative binomial means can reach {peak}, at least {cap}"))
            }
            _ => Ok(()),
        }
    }

    fn likelihood(&self) -> Likelihood {
        match self.distribution {
            EdgeDistribution::Poisson => Likelihood::Poisson,
            EdgeDistribution::Binomial => Likelihood::Binomial,
            EdgeDistribution::NegativeBinomial => Likelihood::NegativeBinomial,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyRow {
    pub k: usize,
    pub method: String,
    /// Fraction of replicates with `K_hat == K`.
    pub accuracy: f64,
    pub replicates: usize,
    /// Mean estimate over replicates that produced one; NaN if none did.
    pub mean_k_hat: f64,
    pub successes: usize,
    pub misestimates: usize,
    /// Replicates where the method produced no estimate.
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AccuracyTable {
    pub rows: Vec<AccuracyRow>,
}

impl AccuracyTable {
    pub fn row(&self, k: usize, method: &str) -> Option<&AccuracyRow> {
        self.rows.iter().find(|r| r.k == k && r.method == method)
    }

    fn sort(&mut self) {
        self.rows
            .sort_by(|a, b| a.k.cmp(&b.k).then_with(|| a.method.cmp(&b.method)));
    }
}

/// One `K_hat` per method for a single replicate; `None` marks a failure.
fn run_replicate(config: &ExperimentConfig, k: usize, rep: usize, inner: Execution) -> Vec<Option<usize>> {
    let seed = derive_seed(config.seed, &[k as u64, rep as u64]);
    let network = (|| -> Result<WeightedAdjacency> {
        let mut rng = stream_rng(seed, 0);
        let model = simulation_params(k, config.rho, config.r, &config.n_all, &mut rng)?;
        let mean = model.mean_matrix();
        if config.noiseless {
            return WeightedAdjacency::from_matrix(mean);
        }
        sample_network(
            &mean,
            config.distribution,
            derive_seed(seed, &[1]),
            SampleOptions {
                zero_diagonal: config.zero_diagonal,
                execution: inner,
            },
        )
    })();
    let Ok(a) = network else {
        return vec![None; config.methods.len()];
    };
    let cluster_seed = derive_seed(seed, &[2]);
    config
        .methods
        .iter()
        .map(|spec| {
            let mut clusterer = Clusterer::new(spec.cluster);
            clusterer.kmeans.execution = inner;
            let trace = match spec.selector {
                SelectionMethod::Svps => svps_select(
                    &a,
                    &SvpsConfig {
                        variance: VarianceFunction::Identity,
                        epsilon: spec.param,
                        m_max: config.svps_m_max,
                        clusterer,
                        seed: cluster_seed,
                        ..SvpsConfig::default()
                    },
                ),
                selector => score_select(
                    &a,
                    &ScoreConfig {
                        lambda: if selector == SelectionMethod::Cbic {
                            spec.param
                        } else {
                            1.0
                        },
                        m_max: k + config.score_extra,
                        clusterer,
                        seed: cluster_seed,
                        ..ScoreConfig::new(selector, config.likelihood())
                    },
                ),
            };
            trace.ok().and_then(|t| t.k_hat)
        })
        .collect()
}

/// Runs every replicate for every `K` and tallies accuracy per method.
///
/// Replicate seeds depend only on `(seed, K, replicate)`, so the sampled
/// networks do not change when methods are added and the table is the same
/// under serial and parallel execution.
pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<AccuracyTable> {
    config.validate()?;
    let mut table = AccuracyTable::default();
    for &k in &config.k_list {
        let estimates = map_indexed(execution, config.replicates, |rep| {
            run_replicate(config, k, rep, Execution::Serial)
        });
        for (mi, spec) in config.methods.iter().enumerate() {
            let column: Vec<Option<usize>> = estimates.iter().map(|e| e[mi]).collect();
            let found: Vec<usize> = column.iter().flatten().copied().collect();
            let successes = found.iter().filter(|&&x| x == k).count();
            let failures = column.len() - found.len();
            let mean_k_hat = if found.is_empty() {
                f64::NAN
            } else {
                found.iter().sum::<usize>() as f64 / found.len() as f64
            };
            table.rows.push(AccuracyRow {
                k,
                method: spec.to_string(),
                accuracy: successes as f64 / config.replicates as f64,
                replicates: config.replicates,
                mean_k_hat,
                successes,
                misestimates: found.len() - successes,
                failures,
            });
        }
    }
    table.sort();
    Ok(table)
}

/// Writes the table as CSV, rows ordered by `K` then method name.
pub fn emit_csv<W: Write>(table: &AccuracyTable, sink: W) -> Result<()> {
    let mut rows: Vec<&AccuracyRow> = table.rows.iter().collect();
    rows.sort_by(|a, b| a.k.cmp(&b.k).then_with(|| a.method.cmp(&b.method)));
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "k",
        "method",
        "accuracy",
        "replicates",
        "mean_k_hat",
        "successes",
        "misestimates",
        "failures",
    ])?;
    for r in rows {
        w.write_record([
            r.k.to_string(),
            r.method.clone(),
            r.accuracy.to_string(),
            r.replicates.to_string(),
            r.mean_k_hat.to_string(),
            r.successes.to_string(),
            r.misestimates.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Which version of the network a Les Misérables cell was computed on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LesMisNetwork {
    /// `A + tau J`.
    Regularized(f64),
    Weighted,
    Binarized,
}

impl fmt::Display for LesMisNetwork {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LesMisNetwork::Regularized(tau) => write!(f, "tau={tau}"),
            LesMisNetwork::Weighted => f.write_str("weighted"),
            LesMisNetwork::Binarized => f.write_str("binarized"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesMisCell {
    pub cluster: ClusterMethod,
    pub method: SelectionMethod,
    pub network: LesMisNetwork,
    pub k_hat: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LesMisOptions {
    pub taus: Vec<f64>,
    pub epsilon: f64,
    /// Largest `m` for SVPS.
    pub svps_m_max: usize,
    /// CBIC and ICL scan `m = 1..=score_m_max`.
    pub score_m_max: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for LesMisOptions {
    fn default() -> Self {
        Self {
            taus: vec![0.05, 0.1, 0.25, 0.5],
            epsilon: 0.05,
            svps_m_max: 12,
            score_m_max: 10,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

/// SVPS on `A + tau J` for every `tau`, plus CBIC and ICL on the weighted
/// network (Poisson likelihood) and on the binarized network (Bernoulli
/// likelihood), each with SCORE and RSC.
pub fn run_lesmis(a: &WeightedAdjacency, opts: &LesMisOptions) -> Result<Vec<LesMisCell>> {
    if opts.taus.iter().any(|t| !(*t >= 0.0)) {
        return Err(Error::InvalidArgument("tau values must be nonnegative".into()));
    }
    let binary = a.binarize();
    let mut jobs: Vec<(ClusterMethod, SelectionMethod, LesMisNetwork)> = Vec::new();
    for cluster in [ClusterMethod::Score, ClusterMethod::Rsc] {
        for &tau in &opts.taus {
            jobs.push((cluster, SelectionMethod::Svps, LesMisNetwork::Regularized(tau)));
        }
        for network in [LesMisNetwork::Weighted, LesMisNetwork::Binarized] {
            for method in [SelectionMethod::Cbic, SelectionMethod::Icl] {
                jobs.push((cluster, method, network));
            }
        }
    }
    let cells = map_indexed(opts.execution, jobs.len(), |idx| {
        let (cluster, method, network) = jobs[idx];
        let mut clusterer = Clusterer::new(cluster);
        clusterer.kmeans.execution = Execution::Serial;
        let trace = match network {
            LesMisNetwork::Regularized(tau) => a.regularize(tau).and_then(|at| {
                svps_select(
                    &at,
                    &SvpsConfig {
                        epsilon: opts.epsilon,
                        m_max: opts.svps_m_max,
                        clusterer,
                        seed: opts.seed,
                        ..SvpsConfig::default()
                    },
                )
            }),
            LesMisNetwork::Weighted | LesMisNetwork::Binarized => {
                let (net, law) = if network == LesMisNetwork::Weighted {
                    (a, Likelihood::Poisson)
                } else {
                    (&binary, Likelihood::Bernoulli)
                };
                score_select(
                    net,
                    &ScoreConfig {
                        m_max: opts.score_m_max,
                        clusterer,
                        seed: opts.seed,
                        ..ScoreConfig::new(method, law)
                    },
                )
            }
        };
        let (k_hat, error) = match trace {
            Ok(t) => (t.k_hat, None),
            Err(e) => (None, Some(e.to_string())),
        };
        LesMisCell {
            cluster,
            method,
            network,
            k_hat,
            error,
        }
    });
    Ok(cells)
}

/// Writes `cluster,method,network,k_hat` rows; a missing estimate is empty.
pub fn emit_lesmis_csv<W: Write>(cells: &[LesMisCell], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["cluster", "method", "network", "k_hat"])?;
    for c in cells {
        w.write_record([
            c.cluster.to_string(),
            c.method.to_string(),
            c.network.to_string(),
            c.k_hat.map(|k| k.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `(cluster, method) -> [(network, k_hat)]`.
pub type LesMisGrid = BTreeMap<(String, String), Vec<(String, Option<usize>)>>;

/// Groups cells by clusterer and selector for display.
pub fn lesmis_grid(cells: &[LesMisCell]) -> LesMisGrid {
    let mut grid = LesMisGrid::new();
    for c in cells {
        grid.entry((c.cluster.to_string(), c.method.to_string()))
            .or_default()
            .push((c.network.to_string(), c.k_hat));
    }
    grid
}
