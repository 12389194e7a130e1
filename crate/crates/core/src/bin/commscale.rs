#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commscale::experiment::{
    emit_csv, emit_lesmis_csv, lesmis_grid, run_experiment, run_lesmis, ExperimentConfig, LesMisOptions,
};
use commscale::fit::{block_sums, fit_step, VarianceFloor};
use commscale::model::{sample_network, simulation_params, EdgeDistribution, SampleOptions, VarianceFunction};
use commscale::network::{
    load_edge_list, read_matrix_csv, write_edge_list, EdgeListFormat, Indexing, LoadedNetwork, WeightedAdjacency,
};
use commscale::par::with_jobs;
use commscale::rng::{stream_rng, SEED_ENV};
use commscale::scaling::{sinkhorn_symmetric, ScalingOptions};
use commscale::select::{
    score_select, svps_select, DiagonalPolicy, Likelihood, ScoreConfig, SelectionMethod, SvpsConfig,
};
use commscale::spectral::{ClusterMethod, Clusterer};
use commscale::{Error, Execution};

/// Estimate the number of communities in a weighted network.
#[derive(Debug, Parser)]
#[command(name = "commscale", version)]
struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = SEED_ENV, default_value_t = 0)]
    seed: u64,

    /// Suppress the summary on standard output.
    #[arg(long, global = true)]
    quiet: bool,

    /// Write the machine-readable result (CSV or edge list) here.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate K by SVPS, CBIC or ICL.
    Select(SelectArgs),
    /// Fit the block model for a given number of communities.
    Fit(FitArgs),
    /// Scale a positive symmetric matrix (CSV) to doubly stochastic form.
    Scale(ScaleArgs),
    /// Draw one network from the simulation design.
    Simulate(SimulateArgs),
    /// Accuracy studies and the Les Misérables analysis.
    #[command(subcommand)]
    Bench(BenchCommand),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IndexingArg {
    #[value(name = "0")]
    Zero,
    #[value(name = "1")]
    One,
    Labels,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Edge list with one `u v w` record per line.
    #[arg(long)]
    input: PathBuf,

    /// How node identifiers are written.
    #[arg(long, value_enum, default_value = "0")]
    indexing: IndexingArg,

    /// Number of nodes, if larger than the largest identifier.
    #[arg(long)]
    nodes: Option<usize>,

    /// Fail on repeated node pairs instead of summing their weights.
    #[arg(long)]
    reject_duplicates: bool,

    /// Add this constant to every entry before analysis.
    #[arg(long, default_value_t = 0.0)]
    tau: f64,

    /// Set self-loop weights to zero after loading.
    #[arg(long)]
    zero_diagonal: bool,

    /// Replace every positive weight by 1 after loading.
    #[arg(long)]
    binarize: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Svps,
    Cbic,
    Icl,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClusterArg {
    Score,
    Rsc,
}

impl From<ClusterArg> for ClusterMethod {
    fn from(c: ClusterArg) -> Self {
        match c {
            ClusterArg::Score => ClusterMethod::Score,
            ClusterArg::Rsc => ClusterMethod::Rsc,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LikelihoodArg {
    Poisson,
    Binomial,
    Negbinom,
    Bernoulli,
}

impl From<LikelihoodArg> for Likelihood {
    fn from(l: LikelihoodArg) -> Self {
        match l {
            LikelihoodArg::Poisson => Likelihood::Poisson,
            LikelihoodArg::Binomial => Likelihood::Binomial,
            LikelihoodArg::Negbinom => Likelihood::NegativeBinomial,
            LikelihoodArg::Bernoulli => Likelihood::Bernoulli,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DiagonalArg {
    Auto,
    Include,
    Exclude,
}

impl From<DiagonalArg> for DiagonalPolicy {
    fn from(d: DiagonalArg) -> Self {
        match d {
            DiagonalArg::Auto => DiagonalPolicy::Auto,
            DiagonalArg::Include => DiagonalPolicy::Include,
            DiagonalArg::Exclude => DiagonalPolicy::Exclude,
        }
    }
}

#[derive(Debug, Args)]
struct ClusterOpts {
    /// Spectral clustering method.
    #[arg(long = "cluster", value_enum, default_value = "score")]
    cluster: ClusterArg,

    /// k-means restarts per clustering.
    #[arg(long, default_value_t = 50)]
    kmeans_restarts: usize,

    /// RSC regularization (default: a quarter of mean degree over n).
    #[arg(long)]
    rsc_reg: Option<f64>,
}

impl ClusterOpts {
    fn clusterer(&self) -> Result<Clusterer, Error> {
        if self.kmeans_restarts == 0 {
            return Err(Error::InvalidArgument("--kmeans-restarts must be at least 1".into()));
        }
        let mut c = Clusterer::new(self.cluster.into());
        c.kmeans.restarts = self.kmeans_restarts;
        c.rsc_reg = self.rsc_reg;
        Ok(c)
    }
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    input: InputArgs,

    #[arg(long, value_enum, default_value = "svps")]
    method: MethodArg,

    /// SVPS stops at the first statistic below 2 + epsilon.
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,

    /// Largest number of communities examined (default: 12 for svps, 10 otherwise).
    #[arg(long)]
    kmax: Option<usize>,

    #[command(flatten)]
    cluster: ClusterOpts,

    /// Variance function: identity, bernoulli or linear:<c>.
    #[arg(long, default_value = "identity")]
    variance: String,

    /// Likelihood for cbic and icl (required for those methods).
    #[arg(long, value_enum)]
    likelihood: Option<LikelihoodArg>,

    /// CBIC penalty weight.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,

    /// Whether diagonal entries enter the likelihood.
    #[arg(long, value_enum, default_value = "auto")]
    diagonal: DiagonalArg,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    input: InputArgs,

    /// Number of communities to fit.
    #[arg(long)]
    m: usize,

    #[command(flatten)]
    cluster: ClusterOpts,

    /// Variance function: identity, bernoulli or linear:<c>.
    #[arg(long, default_value = "identity")]
    variance: String,

    /// Write the block table (sizes, block sums, connectivity) here.
    #[arg(long)]
    blocks_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScaleArgs {
    /// Headerless CSV matrix.
    #[arg(long)]
    input: PathBuf,

    #[arg(long, default_value_t = 1e-10)]
    tol: f64,

    #[arg(long, default_value_t = 10_000)]
    max_iter: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DistributionArg {
    Poisson,
    Binomial,
    Negbinom,
}

impl From<DistributionArg> for EdgeDistribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Poisson => EdgeDistribution::Poisson,
            DistributionArg::Binomial => EdgeDistribution::Binomial,
            DistributionArg::Negbinom => EdgeDistribution::NegativeBinomial,
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "poisson")]
    distribution: DistributionArg,

    #[arg(long, default_value_t = 0.12)]
    rho: f64,

    #[arg(long, default_value_t = 2.0)]
    r: f64,

    /// Number of communities.
    #[arg(long, default_value_t = 3)]
    k: usize,

    /// Block sizes; the first K are used.
    #[arg(long, value_delimiter = ',', default_value = "50,100,150,50,100,150")]
    n_all: Vec<usize>,

    /// Set self-loops to zero instead of sampling them.
    #[arg(long)]
    zero_diagonal: bool,

    /// Write the true community of each node here.
    #[arg(long)]
    labels_out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum BenchCommand {
    /// Run a Monte Carlo accuracy study from a config file.
    Run(BenchRunArgs),
    /// Estimate K on the Les Misérables network under every setting.
    Lesmis(BenchLesmisArgs),
}

#[derive(Debug, Args)]
struct BenchRunArgs {
    #[arg(long)]
    config: PathBuf,

    /// Override the replicate count of the config.
    #[arg(long)]
    replicates: Option<usize>,

    /// Run replicates one after another.
    #[arg(long)]
    serial: bool,
}

#[derive(Debug, Args)]
struct BenchLesmisArgs {
    /// Edge list of the co-occurrence network.
    #[arg(long)]
    input: PathBuf,

    #[arg(long, value_enum, default_value = "0")]
    indexing: IndexingArg,

    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.25,0.5")]
    tau: Vec<f64>,

    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,

    /// Keep self-loops instead of zeroing the diagonal.
    #[arg(long)]
    keep_diagonal: bool,
}

fn open_output(path: &Path) -> Result<BufWriter<File>, Error> {
    Ok(BufWriter::new(File::create(path)?))
}

fn format_for(indexing: IndexingArg, nodes: Option<usize>, reject: bool) -> EdgeListFormat {
    let mut f = match indexing {
        IndexingArg::Zero => EdgeListFormat::zero_based(),
        IndexingArg::One => EdgeListFormat::one_based(),
        IndexingArg::Labels => EdgeListFormat {
            indexing: Indexing::Labels,
            ..EdgeListFormat::default()
        },
    };
    if let Some(n) = nodes {
        f = f.with_nodes(n);
    }
    if reject {
        f = f.rejecting_duplicates();
    }
    f
}

fn load(args: &InputArgs) -> Result<LoadedNetwork, Error> {
    let file = File::open(&args.input)?;
    let format = format_for(args.indexing, args.nodes, args.reject_duplicates);
    let mut net = load_edge_list(BufReader::new(file), &format)?;
    let mut a = net.adjacency;
    if args.zero_diagonal {
        a = a.without_self_loops();
    }
    if args.binarize {
        a = a.binarize();
    }
    net.adjacency = a.regularize(args.tau)?;
    Ok(net)
}

fn parse_variance(s: &str) -> Result<VarianceFunction, Error> {
    s.parse()
}

struct Ctx {
    seed: u64,
    quiet: bool,
    out: Option<PathBuf>,
}

impl Ctx {
    fn say(&self, line: &str) -> Result<(), Error> {
        if !self.quiet {
            writeln!(io::stdout().lock(), "{line}")?;
        }
        Ok(())
    }
}

fn cmd_select(ctx: &Ctx, args: &SelectArgs) -> Result<(), Error> {
    let clusterer = args.cluster.clusterer()?;
    let variance = parse_variance(&args.variance)?;
    if args.kmax == Some(0) {
        return Err(Error::InvalidArgument("--kmax must be at least 1".into()));
    }
    let likelihood = match args.method {
        MethodArg::Svps => None,
        MethodArg::Cbic | MethodArg::Icl => Some(
            args.likelihood
                .ok_or_else(|| Error::InvalidArgument("--likelihood is required for cbic and icl".into()))?,
        ),
    };
    if matches!(args.method, MethodArg::Svps) && !(args.epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "--epsilon must be positive, got {}",
            args.epsilon
        )));
    }
    let a = load(&args.input)?.adjacency;
    let trace = match (args.method, likelihood) {
        (MethodArg::Svps, _) => svps_select(
            &a,
            &SvpsConfig {
                variance,
                epsilon: args.epsilon,
                m_max: args.kmax.unwrap_or(12),
                clusterer,
                seed: ctx.seed,
                ..SvpsConfig::default()
            },
        )?,
        (method, Some(law)) => {
            let selector = if matches!(method, MethodArg::Cbic) {
                SelectionMethod::Cbic
            } else {
                SelectionMethod::Icl
            };
            score_select(
                &a,
                &ScoreConfig {
                    lambda: args.lambda,
                    m_max: args.kmax.unwrap_or(10),
                    clusterer,
                    seed: ctx.seed,
                    diagonal: args.diagonal.into(),
                    ..ScoreConfig::new(selector, law.into())
                },
            )?
        }
        (_, None) => unreachable!("likelihood checked above"),
    };
    if let Some(path) = &ctx.out {
        trace.write_csv(open_output(path)?)?;
    }
    match trace.k_hat {
        Some(k) => ctx.say(&format!("K_hat={k}")),
        None => ctx.say(&format!("K_hat=NA (no estimate within m <= {})", trace.steps.len())),
    }
}

fn cmd_fit(ctx: &Ctx, args: &FitArgs) -> Result<(), Error> {
    let clusterer = args.cluster.clusterer()?;
    let variance = parse_variance(&args.variance)?;
    let net = load(&args.input)?;
    let a = &net.adjacency;
    let assignment = clusterer.prepare(a)?.cluster(args.m, ctx.seed)?;
    let fitted = fit_step(a, assignment, variance, VarianceFloor::default())?;
    let sums = block_sums(a, &fitted.assignment)?;
    let degrees = a.degrees();
    if let Some(path) = &ctx.out {
        let mut w = csv::Writer::from_writer(open_output(path)?);
        w.write_record(["node", "label", "community", "degree", "theta"])?;
        for i in 0..a.n() {
            w.write_record([
                i.to_string(),
                net.labels[i].clone(),
                (fitted.assignment.labels()[i] + 1).to_string(),
                degrees[i].to_string(),
                fitted.theta.as_ref().map_or(String::new(), |t| t[i].to_string()),
            ])?;
        }
        w.flush()?;
    }
    if let Some(path) = &args.blocks_out {
        let mut w = csv::Writer::from_writer(open_output(path)?);
        w.write_record(["k", "l", "size_k", "size_l", "block_sum", "connectivity"])?;
        let sizes = fitted.block_sizes();
        for k in 0..fitted.m {
            for l in 0..fitted.m {
                w.write_record([
                    (k + 1).to_string(),
                    (l + 1).to_string(),
                    sizes[k].to_string(),
                    sizes[l].to_string(),
                    sums[(k, l)].to_string(),
                    fitted
                        .connectivity
                        .as_ref()
                        .map_or(String::new(), |b| b[(k, l)].to_string()),
                ])?;
            }
        }
        w.flush()?;
    }
    let sizes: Vec<String> = fitted.block_sizes().iter().map(|s| s.to_string()).collect();
    ctx.say(&format!("m={} sizes={}", fitted.m, sizes.join(",")))
}

fn cmd_scale(ctx: &Ctx, args: &ScaleArgs) -> Result<(), Error> {
    let v = read_matrix_csv(File::open(&args.input)?)?;
    let res = sinkhorn_symmetric(
        &v,
        &ScalingOptions {
            tol: args.tol,
            max_iter: args.max_iter,
        },
    )?;
    if let Some(path) = &ctx.out {
        let mut w = csv::Writer::from_writer(open_output(path)?);
        w.write_record(["index", "psi"])?;
        for (i, p) in res.psi.iter().enumerate() {
            w.write_record([(i + 1).to_string(), p.to_string()])?;
        }
        w.flush()?;
    }
    let psi: Vec<String> = res.psi.iter().map(|p| format!("{p:.10}")).collect();
    ctx.say(&format!(
        "psi={} residual={:e} iterations={}",
        psi.join(","),
        res.residual,
        res.iterations
    ))
}

fn cmd_simulate(ctx: &Ctx, args: &SimulateArgs) -> Result<(), Error> {
    let mut rng = stream_rng(ctx.seed, 0);
    let model = simulation_params(args.k, args.rho, args.r, &args.n_all, &mut rng)?;
    let a = sample_network(
        &model.mean_matrix(),
        args.distribution.into(),
        commscale::rng::derive_seed(ctx.seed, &[1]),
        SampleOptions {
            zero_diagonal: args.zero_diagonal,
            execution: Execution::Parallel,
        },
    )?;
    if let Some(path) = &ctx.out {
        let mut w = open_output(path)?;
        write_edge_list(&a, Indexing::ZeroBased, &mut w)?;
        w.flush()?;
    }
    if let Some(path) = &args.labels_out {
        let mut w = csv::Writer::from_writer(open_output(path)?);
        w.write_record(["node", "community", "theta"])?;
        for i in 0..model.n() {
            w.write_record([
                i.to_string(),
                (model.labels()[i] + 1).to_string(),
                model.theta()[i].to_string(),
            ])?;
        }
        w.flush()?;
    }
    ctx.say(&format!("n={} K={} edges={}", a.n(), model.k(), a.edge_count()))
}

fn cmd_bench_run(ctx: &Ctx, args: &BenchRunArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.config)?;
    let mut config = ExperimentConfig::parse(&text)?;
    if let Some(r) = args.replicates {
        config.replicates = r;
    }
    let execution = if args.serial {
        Execution::Serial
    } else {
        Execution::Parallel
    };
    let table = run_experiment(&config, execution)?;
    if let Some(path) = &ctx.out {
        emit_csv(&table, open_output(path)?)?;
    }
    for row in &table.rows {
        ctx.say(&format!(
            "K={} {} accuracy={} mean_K_hat={:.2} failures={}",
            row.k, row.method, row.accuracy, row.mean_k_hat, row.failures
        ))?;
    }
    Ok(())
}

fn cmd_bench_lesmis(ctx: &Ctx, args: &BenchLesmisArgs) -> Result<(), Error> {
    let file = File::open(&args.input)?;
    let mut a: WeightedAdjacency =
        load_edge_list(BufReader::new(file), &format_for(args.indexing, None, false))?.adjacency;
    if !args.keep_diagonal {
        a = a.without_self_loops();
    }
    let cells = run_lesmis(
        &a,
        &LesMisOptions {
            taus: args.tau.clone(),
            epsilon: args.epsilon,
            seed: ctx.seed,
            ..LesMisOptions::default()
        },
    )?;
    if let Some(path) = &ctx.out {
        emit_lesmis_csv(&cells, open_output(path)?)?;
    }
    for ((cluster, method), entries) in lesmis_grid(&cells) {
        let parts: Vec<String> = entries
            .iter()
            .map(|(net, k)| format!("{net}:{}", k.map_or("NA".to_string(), |k| k.to_string())))
            .collect();
        ctx.say(&format!("{cluster} {method} {}", parts.join(" ")))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let ctx = Ctx {
        seed: cli.seed,
        quiet: cli.quiet,
        out: cli.out,
    };
    if cli.jobs == Some(0) {
        return Err(Error::InvalidArgument("--jobs must be at least 1".into()));
    }
    with_jobs(cli.jobs, || match &cli.command {
        Command::Select(args) => cmd_select(&ctx, args),
        Command::Fit(args) => cmd_fit(&ctx, args),
        Command::Scale(args) => cmd_scale(&ctx, args),
        Command::Simulate(args) => cmd_simulate(&ctx, args),
        Command::Bench(BenchCommand::Run(args)) => cmd_bench_run(&ctx, args),
        Command::Bench(BenchCommand::Lesmis(args)) => cmd_bench_lesmis(&ctx, args),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}
