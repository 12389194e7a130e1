//! Choosing the number of communities: the SVPS sequential test and the
//! penalized-likelihood scores CBIC and ICL.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::DMatrix;
use statrs::distribution::{Binomial, Discrete, NegativeBinomial, Poisson};

use crate::error::{Error, Result};
use crate::fit::{fit_step, FittedStep, VarianceFloor};
use crate::model::{VarianceFunction, TRIALS};
use crate::network::WeightedAdjacency;
use crate::par::map_indexed;
use crate::scaling::{scaled_matrix, sinkhorn_symmetric, ScalingOptions};
use crate::spectral::{eigenvalues_by_magnitude, Assignment, ClusterMethod, Clusterer};

const PROB_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SelectionMethod {
    Svps,
    Cbic,
    Icl,
}

impl SelectionMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionMethod::Svps => "svps",
            SelectionMethod::Cbic => "cbic",
            SelectionMethod::Icl => "icl",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svps" => Ok(SelectionMethod::Svps),
            "cbic" => Ok(SelectionMethod::Cbic),
            "icl" => Ok(SelectionMethod::Icl),
            other => Err(Error::InvalidArgument(format!(
                "unknown selection method `{other}` (svps, cbic, icl)"
            ))),
        }
    }
}

/// One candidate `m` of a selection run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub m: usize,
    /// The SVPS statistic or the CBIC/ICL score. Failed steps carry `+inf`
    /// for SVPS and `-inf` for scores.
    pub value: f64,
    /// Why the step failed, if it did.
    pub failure: Option<String>,
}

impl StepRecord {
    pub fn is_failed(&self) -> bool {
        self.failure.is_some()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionTrace {
    pub method: SelectionMethod,
    pub clusterer: ClusterMethod,
    pub steps: Vec<StepRecord>,
    /// `2 + epsilon`; SVPS only.
    pub threshold: Option<f64>,
    pub k_hat: Option<usize>,
    /// SVPS: the statistic fell below the threshold within the scanned range.
    pub stopped: bool,
}

impl SelectionTrace {
    pub fn step(&self, m: usize) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.m == m)
    }

    /// Writes `method,cluster,m,value,status` rows.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["method", "cluster", "m", "value", "status"])?;
        for s in &self.steps {
            let status = match &s.failure {
                None => "ok".to_string(),
                Some(why) => format!("failed: {why}"),
            };
            w.write_record([
                self.method.name().to_string(),
                self.clusterer.name().to_string(),
                s.m.to_string(),
                s.value.to_string(),
                status,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|lambda_{m+1}|` of `Psi^{1/2} A Psi^{1/2}`, where `psi` scales the fitted
/// variance profile to doubly stochastic form.
pub fn svps_statistic(a: &WeightedAdjacency, fitted: &FittedStep, opts: &ScalingOptions) -> Result<f64> {
    let n = a.n();
    if fitted.m + 1 > n {
        return Err(Error::InvalidArgument(format!(
            "statistic for m = {} needs more than {n} nodes",
            fitted.m
        )));
    }
    let scaling = sinkhorn_symmetric(&fitted.variance, opts)?;
    let s = scaled_matrix(a.weights(), &scaling.psi);
    let values = eigenvalues_by_magnitude(&s)?;
    Ok(values[fitted.m].abs())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvpsConfig {
    pub variance: VarianceFunction,
    /// The test stops once the statistic drops below `2 + epsilon`.
    pub epsilon: f64,
    pub m_max: usize,
    pub clusterer: Clusterer,
    pub seed: u64,
    pub scaling: ScalingOptions,
    pub floor: VarianceFloor,
}

impl Default for SvpsConfig {
    fn default() -> Self {
        Self {
            variance: VarianceFunction::Identity,
            epsilon: 0.05,
            m_max: 12,
            clusterer: Clusterer::default(),
            seed: 0,
            scaling: ScalingOptions::default(),
            floor: VarianceFloor::default(),
        }
    }
}

impl SvpsConfig {
    pub fn threshold(&self) -> f64 {
        2.0 + self.epsilon
    }

    fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.m_max == 0 {
            return Err(Error::InvalidArgument("m_max must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fits at a given partition and returns the SVPS statistic.
pub fn svps_step(a: &WeightedAdjacency, assignment: Assignment, config: &SvpsConfig) -> Result<f64> {
    let fitted = fit_step(a, assignment, config.variance, config.floor)?;
    svps_statistic(a, &fitted, &config.scaling)
}

/// Runs `m = 1, 2, ...` until the statistic falls below the threshold or
/// `m_max` (capped at `n - 1`) is reached. Failed steps are recorded with
/// statistic `+inf` and never stop the scan.
pub fn svps_select(a: &WeightedAdjacency, config: &SvpsConfig) -> Result<SelectionTrace> {
    config.validate()?;
    let prepared = config.clusterer.prepare(a)?;
    let threshold = config.threshold();
    let mut steps = Vec::new();
    let mut k_hat = None;
    for m in 1..=config.m_max.min(a.n() - 1) {
        let outcome = prepared.cluster(m, config.seed).and_then(|z| svps_step(a, z, config));
        let record = match outcome {
            Ok(t) => StepRecord {
                m,
                value: t,
                failure: None,
            },
            Err(e) => StepRecord {
                m,
                value: f64::INFINITY,
                failure: Some(e.to_string()),
            },
        };
        let stop = record.value < threshold;
        steps.push(record);
        if stop {
            k_hat = Some(m);
            break;
        }
    }
    Ok(SelectionTrace {
        method: SelectionMethod::Svps,
        clusterer: config.clusterer.method,
        steps,
        threshold: Some(threshold),
        stopped: k_hat.is_some(),
        k_hat,
    })
}

/// Law used to evaluate the likelihood of the observed weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Likelihood {
    Poisson,
    /// `Binomial(5, M/5)`.
    Binomial,
    /// Failures before the 5th success, success probability `1 - M/5`.
    NegativeBinomial,
    Bernoulli,
}

impl Likelihood {
    pub fn name(&self) -> &'static str {
        match self {
            Likelihood::Poisson => "poisson",
            Likelihood::Binomial => "binomial",
            Likelihood::NegativeBinomial => "negbinom",
            Likelihood::Bernoulli => "bernoulli",
        }
    }

    fn ln_mass(&self, x: f64, mu: f64, row: usize, col: usize) -> Result<f64> {
        let outside = || Error::OutsideSupport {
            law: self.name(),
            row: row + 1,
            col: col + 1,
            value: x,
        };
        if x < 0.0 || x.fract() != 0.0 || !x.is_finite() {
            return Err(outside());
        }
        let k = x as u64;
        let trials = TRIALS as f64;
        let clamp = |p: f64| p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
        Ok(match self {
            Likelihood::Poisson => Poisson::new(mu.max(PROB_FLOOR)).expect("positive rate").ln_pmf(k),
            Likelihood::Binomial => {
                if k > TRIALS as u64 {
                    return Err(outside());
                }
                Binomial::new(clamp(mu / trials), TRIALS as u64)
                    .expect("p in (0, 1)")
                    .ln_pmf(k)
            }
            Likelihood::NegativeBinomial => NegativeBinomial::new(trials, 1.0 - clamp(mu / trials))
                .expect("valid parameters")
                .ln_pmf(k),
            Likelihood::Bernoulli => {
                let q = clamp(mu);
                match k {
                    0 => (1.0 - q).ln(),
                    1 => q.ln(),
                    _ => return Err(outside()),
                }
            }
        })
    }
}

impl fmt::Display for Likelihood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Likelihood {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(Likelihood::Poisson),
            "binomial" => Ok(Likelihood::Binomial),
            "negbinom" => Ok(Likelihood::NegativeBinomial),
            "bernoulli" => Ok(Likelihood::Bernoulli),
            other => Err(Error::InvalidArgument(format!(
                "unknown likelihood `{other}` (poisson, binomial, negbinom, bernoulli)"
            ))),
        }
    }
}

/// Whether diagonal entries enter the likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DiagonalPolicy {
    /// Include the diagonal only when the network has self-loops.
    #[default]
    Auto,
    Include,
    Exclude,
}

impl FromStr for DiagonalPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(DiagonalPolicy::Auto),
            "include" => Ok(DiagonalPolicy::Include),
            "exclude" => Ok(DiagonalPolicy::Exclude),
            other => Err(Error::InvalidArgument(format!(
                "unknown diagonal policy `{other}` (auto, include, exclude)"
            ))),
        }
    }
}

/// Log-likelihood of `a` under independent entries with means `mean`,
/// summed over the upper triangle.
pub fn log_likelihood(
    a: &WeightedAdjacency,
    mean: &DMatrix<f64>,
    law: Likelihood,
    diagonal: DiagonalPolicy,
) -> Result<f64> {
    let n = a.n();
    if mean.shape() != (n, n) {
        return Err(Error::InvalidArgument(
            "mean matrix shape does not match the network".into(),
        ));
    }
    let with_diagonal = match diagonal {
        DiagonalPolicy::Auto => a.has_self_loops(),
        DiagonalPolicy::Include => true,
        DiagonalPolicy::Exclude => false,
    };
    let w = a.weights();
    let mut total = 0.0;
    for j in 0..n {
        let last = if with_diagonal { j + 1 } else { j };
        for i in 0..last {
            total += law.ln_mass(w[(i, j)], mean[(i, j)], i, j)?;
        }
    }
    Ok(total)
}

/// `lambda n ln m + m(m+1)/2 ln n`.
pub fn cbic_penalty(n: usize, m: usize, lambda: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    lambda * n * m.ln() + m * (m + 1.0) / 2.0 * n.ln()
}

/// `sum_k n_k ln(n / n_k) + m(m+2)/2 ln n`.
pub fn icl_penalty(sizes: &[usize]) -> f64 {
    let n: usize = sizes.iter().sum();
    let nf = n as f64;
    let m = sizes.len() as f64;
    let entropy: f64 = sizes
        .iter()
        .map(|&k| {
            let k = k as f64;
            k * (nf / k).ln()
        })
        .sum();
    entropy + m * (m + 2.0) / 2.0 * nf.ln()
}

pub fn cbic_score(
    a: &WeightedAdjacency,
    fitted: &FittedStep,
    lambda: f64,
    law: Likelihood,
    diagonal: DiagonalPolicy,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    Ok(log_likelihood(a, &fitted.mean, law, diagonal)? - cbic_penalty(a.n(), fitted.m, lambda))
}

pub fn icl_score(a: &WeightedAdjacency, fitted: &FittedStep, law: Likelihood, diagonal: DiagonalPolicy) -> Result<f64> {
    let sizes = fitted.block_sizes();
    if sizes.contains(&0) {
        return Err(Error::EmptyCluster { m: fitted.m });
    }
    Ok(log_likelihood(a, &fitted.mean, law, diagonal)? - icl_penalty(&sizes))
}

/// The `m` with the largest score, ties going to the smallest `m`. NaN and
/// `-inf` scores never win.
pub fn select_by_score(scores: &[(usize, f64)]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for &(m, s) in scores {
        if s.is_nan() || s == f64::NEG_INFINITY {
            continue;
        }
        best = match best {
            Some((bm, bs)) if bs > s || (bs == s && bm <= m) => Some((bm, bs)),
            _ => Some((m, s)),
        };
    }
    best.map(|(m, _)| m)
        .ok_or_else(|| Error::DegenerateFit("no candidate produced a score".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreConfig {
    /// `Cbic` or `Icl`.
    pub method: SelectionMethod,
    pub likelihood: Likelihood,
    /// CBIC penalty weight.
    pub lambda: f64,
    pub m_max: usize,
    pub clusterer: Clusterer,
    pub seed: u64,
    pub diagonal: DiagonalPolicy,
    pub floor: VarianceFloor,
}

impl ScoreConfig {
    pub fn new(method: SelectionMethod, likelihood: Likelihood) -> Self {
        Self {
            method,
            likelihood,
            lambda: 1.0,
            m_max: 10,
            clusterer: Clusterer::default(),
            seed: 0,
            diagonal: DiagonalPolicy::Auto,
            floor: VarianceFloor::default(),
        }
    }
}

/// Scores every `m = 1..=m_max` (capped at `n`) and picks the best. Failed
/// fits are recorded and excluded.
pub fn score_select(a: &WeightedAdjacency, config: &ScoreConfig) -> Result<SelectionTrace> {
    if config.method == SelectionMethod::Svps {
        return Err(Error::InvalidArgument("score selection needs cbic or icl".into()));
    }
    if config.m_max == 0 {
        return Err(Error::InvalidArgument("m_max must be at least 1".into()));
    }
    let prepared = config.clusterer.prepare(a)?;
    let m_max = config.m_max.min(a.n());
    let steps = map_indexed(config.clusterer.kmeans.execution, m_max, |idx| {
        let m = idx + 1;
        let outcome = prepared.cluster(m, config.seed).and_then(|z| {
            let fitted = fit_step(a, z, VarianceFunction::Identity, config.floor)?;
            match config.method {
                SelectionMethod::Cbic => cbic_score(a, &fitted, config.lambda, config.likelihood, config.diagonal),
                _ => icl_score(a, &fitted, config.likelihood, config.diagonal),
            }
        });
        match outcome {
            Ok(value) => StepRecord {
                m,
                value,
                failure: None,
            },
            Err(e) => StepRecord {
                m,
                value: f64::NEG_INFINITY,
                failure: Some(e.to_string()),
            },
        }
    });
    let scored: Vec<(usize, f64)> = steps
        .iter()
        .filter(|s| !s.is_failed())
        .map(|s| (s.m, s.value))
        .collect();
    let k_hat = select_by_score(&scored).ok();
    Ok(SelectionTrace {
        method: config.method,
        clusterer: config.clusterer.method,
        steps,
        threshold: None,
        k_hat,
        stopped: false,
    })
}
