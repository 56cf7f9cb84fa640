use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use fastppr::bench::{
    accuracy_experiment, balance_diagnostics, ppr_ccdf, run_timing, sample_pairs, write_balance, write_ccdf,
    write_records, TargetDist,
};
use fastppr::estimators::{
    detect_high, estimate, Algorithm, Decision, QueryParams, DEFAULT_ALPHA, DEFAULT_BETA, DEFAULT_C, DEFAULT_C_MC,
};
use fastppr::graph::load_edge_list_cached;
use fastppr::oracle::{
    exact_inverse_ppr, global_pagerank, power_iteration_ppr, precompute_frontiers, query_with_store, FrontierStore,
};
use fastppr::synthetic;
use fastppr::{load_edge_list_file, Error, Graph, NodeId};

#[derive(Parser, Debug)]
#[command(name = "fastppr", version, about = "Single-pair personalized PageRank estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate pi_s(t) for one pair and print a single result line.
    Estimate(EstimateArgs),
    /// Time a set of algorithms on sampled pairs and write the benchmark CSV.
    Benchmark(BenchmarkArgs),
    /// Compare FAST-PPR against ground truth on binned pairs.
    Accuracy(AccuracyArgs),
    /// Distribution of estimated PPR values over random pairs.
    Ccdf(CcdfArgs),
    /// Forward and reverse time of both bidirectional variants by target PageRank.
    Balance(BalanceArgs),
    /// Exact PPR, inverse PPR or global PageRank vectors.
    Groundtruth(GroundtruthArgs),
    /// Precompute the frontier of every target into a store file.
    Precompute(PrecomputeArgs),
    /// Write a synthetic edge list.
    Gen(GenArgs),
}

#[derive(Args, Debug)]
struct GraphArgs {
    /// Edge-list file, one "u v" pair per line, '#' starts a comment.
    #[arg(long)]
    graph: PathBuf,
    /// Read each line as an edge in both directions.
    #[arg(long)]
    undirected: bool,
    /// Keep a binary copy of the parsed graph here and reuse it on later runs.
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Accuracy threshold, a probability or "K/n".
    #[arg(long, default_value = "4/n")]
    delta: DeltaSpec,
    /// Reverse threshold: a probability, "auto" for sqrt(d * delta) or "sqrt-delta".
    #[arg(long, default_value = "auto")]
    eps_r: EpsSpec,
    /// Walk multiplier of the bidirectional estimators.
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// Walk multiplier of Monte-Carlo.
    #[arg(long, default_value_t = DEFAULT_C_MC)]
    c_mc: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    /// Source node, by its id in the edge list.
    #[arg(long)]
    source: u64,
    /// Target node, by its id in the edge list.
    #[arg(long)]
    target: u64,
    #[arg(long, default_value = "fastppr")]
    algo: Algorithm,
    /// Answer from a precomputed frontier store (fastppr only).
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value_t = 50)]
    pairs: usize,
    #[arg(long, value_enum, default_value_t = Dist::Uniform)]
    targets: Dist,
    #[arg(long, value_delimiter = ',', default_value = "fastppr,balanced,montecarlo")]
    algos: Vec<Algorithm>,
    /// Graph name written to each row; defaults to the file stem.
    #[arg(long)]
    name: Option<String>,
    /// CSV output path; stdout if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct AccuracyArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value_t = 25)]
    targets: usize,
    #[arg(long, default_value_t = 50)]
    per_bin: usize,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CcdfArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    #[arg(long, default_value_t = 1000)]
    pairs: usize,
    /// Estimation accuracy for the sampled pairs; defaults to 1/(10n).
    #[arg(long)]
    floor: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BalanceArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    /// Target PageRank percentiles, 0 = lowest.
    #[arg(long, value_delimiter = ',')]
    percentiles: Option<Vec<f64>>,
    /// Sources averaged per target.
    #[arg(long, default_value_t = 5)]
    sources: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(id = "vector", required = true, multiple = false, args = ["source", "target", "global"])]
struct GroundtruthArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    /// Forward vector pi_s(.) from this source.
    #[arg(long)]
    source: Option<u64>,
    /// Inverse vector pi_.(t) into this target.
    #[arg(long)]
    target: Option<u64>,
    /// Global PageRank.
    #[arg(long)]
    global: bool,
    /// Additive tolerance; defaults to delta/100.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrecomputeArgs {
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    query: QueryArgs,
    /// Output store file.
    #[arg(long)]
    store: PathBuf,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    /// Average degree of the power-law model.
    #[arg(long, default_value_t = 10.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 2.5)]
    exponent: f64,
    /// Edge count of the uniform model.
    #[arg(long)]
    edges: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Dist {
    Uniform,
    Pagerank,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum GenKind {
    PowerLaw,
    Random,
    TwoCycle,
    Cycle,
    Star,
}

#[derive(Debug, Clone, Copy)]
enum DeltaSpec {
    Value(f64),
    PerNode(f64),
}

impl FromStr for DeltaSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("bad delta {s:?}: {e}"));
        match s.strip_suffix("/n") {
            Some(k) => Ok(DeltaSpec::PerNode(parse(k)?)),
            None => Ok(DeltaSpec::Value(parse(s)?)),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum EpsSpec {
    Auto,
    SqrtDelta,
    Value(f64),
}

impl FromStr for EpsSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "auto" => return Ok(EpsSpec::Auto),
            "sqrt-delta" => return Ok(EpsSpec::SqrtDelta),
            _ => {}
        }
        s.parse()
            .map(EpsSpec::Value)
            .map_err(|e| format!("bad eps_r {s:?}: {e}"))
    }
}

impl QueryArgs {
    fn resolve(&self, g: &Graph) -> Result<QueryParams, Failure> {
        let delta = match self.delta {
            DeltaSpec::Value(d) => d,
            DeltaSpec::PerNode(k) => k / g.node_count() as f64,
        };
        let p = QueryParams {
            alpha: self.alpha,
            delta,
            eps_r: match self.eps_r {
                EpsSpec::Auto => None,
                EpsSpec::SqrtDelta => Some(delta.sqrt()),
                EpsSpec::Value(e) => Some(e),
            },
            c: self.c,
            beta: self.beta,
            c_mc: self.c_mc,
            seed: self.seed,
        };
        p.validate().map_err(Failure::usage)?;
        Ok(p)
    }
}

/// Error carrying its exit code: 2 for usage problems, 1 otherwise.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(e: impl ToString) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) | Error::NodeOutOfRange { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Error::from(e).into()
    }
}

fn load(args: &GraphArgs) -> Result<Graph, Failure> {
    if !args.graph.is_file() {
        return Err(Failure::usage(format!("graph file {} not found", args.graph.display())));
    }
    let g = match &args.cache_dir {
        Some(dir) => load_edge_list_cached(&args.graph, args.undirected, dir)?,
        None => load_edge_list_file(&args.graph, args.undirected)?,
    };
    Ok(g)
}

fn node(g: &Graph, label: u64) -> Result<NodeId, Failure> {
    g.node_by_label(label)
        .ok_or_else(|| Failure::usage(format!("node {label} does not appear in the graph")))
}

fn graph_name(args: &GraphArgs, name: &Option<String>) -> String {
    name.clone().unwrap_or_else(|| {
        args.graph
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "graph".into())
    })
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Estimate(a) => run_estimate(a),
        Command::Benchmark(a) => run_benchmark(a),
        Command::Accuracy(a) => run_accuracy(a),
        Command::Ccdf(a) => run_ccdf(a),
        Command::Balance(a) => run_balance(a),
        Command::Groundtruth(a) => run_groundtruth(a),
        Command::Precompute(a) => run_precompute(a),
        Command::Gen(a) => run_gen(a),
    }
}

fn run_estimate(a: EstimateArgs) -> Result<(), Failure> {
    let g = load(&a.graph)?;
    let p = a.query.resolve(&g)?;
    let (s, t) = (node(&g, a.source)?, node(&g, a.target)?);
    let e = match &a.store {
        Some(path) => {
            if a.algo != Algorithm::FastPpr {
                return Err(Failure::usage("--store only answers fastppr queries"));
            }
            let store = FrontierStore::load(path, &g)?;
            query_with_store(&store, &g, s, t, &p)?
        }
        None => estimate(&g, a.algo, s, t, &p)?,
    };
    let decision = match detect_high(&e, p.delta) {
        Decision::Accept => "accept",
        Decision::Reject => "reject",
    };
    println!(
        "estimate={} algorithm={} source={} target={} delta={} eps_r={} walks={} pushes={} shortcut={} \
         decision={decision} forward_ms={:.3} reverse_ms={:.3}",
        e.value,
        e.algorithm,
        a.source,
        a.target,
        p.delta,
        e.eps_r.map_or_else(|| "-".to_string(), |x| x.to_string()),
        e.walks_used,
        e.frontier_pushes,
        e.shortcut,
        e.forward_time.as_secs_f64() * 1e3,
        e.reverse_time.as_secs_f64() * 1e3,
    );
    Ok(())
}

fn run_benchmark(a: BenchmarkArgs) -> Result<(), Failure> {
    if a.pairs == 0 {
        return Err(Failure::usage("--pairs must be positive"));
    }
    let g = load(&a.graph)?;
    let p = a.query.resolve(&g)?;
    let dist = match a.targets {
        Dist::Uniform => TargetDist::Uniform,
        Dist::Pagerank => TargetDist::PageRank,
    };
    let pairs = sample_pairs(&g, a.pairs, dist, p.alpha, p.seed)?;
    let records = run_timing(&g, &graph_name(&a.graph, &a.name), &pairs, &a.algos, &p);
    write_records(output(&a.out)?, &records)?;
    for alg in &a.algos {
        let times: Vec<f64> = records
            .iter()
            .filter(|r| r.algorithm == alg.as_str() && r.estimate.is_some())
            .map(|r| r.total_ms)
            .collect();
        let failed = records.iter().filter(|r| r.algorithm == alg.as_str()).count() - times.len();
        let mean = times.iter().sum::<f64>() / times.len().max(1) as f64;
        eprintln!("{alg}: mean {mean:.3} ms over {} queries, {failed} failed", times.len());
    }
    Ok(())
}

fn run_accuracy(a: AccuracyArgs) -> Result<(), Failure> {
    let g = load(&a.graph)?;
    let p = a.query.resolve(&g)?;
    let report = accuracy_experiment(&g, &graph_name(&a.graph, &a.name), a.targets, a.per_bin, &p)?;
    write_records(output(&a.out)?, &report.records)?;
    if !report.resampled.is_empty() {
        eprintln!("resampled {} targets with an empty bin", report.resampled.len());
    }
    for (label, value) in report.summary.table(p.delta) {
        eprintln!("{label}: {value:.6}");
    }
    Ok(())
}

fn run_ccdf(a: CcdfArgs) -> Result<(), Failure> {
    let g = load(&a.graph)?;
    let p = a.query.resolve(&g)?;
    let floor = a.floor.unwrap_or(1.0 / (10.0 * g.node_count() as f64));
    let table = ppr_ccdf(&g, a.pairs, floor, &p)?;
    write_ccdf(output(&a.out)?, &table.rows)?;
    Ok(())
}

fn run_balance(a: BalanceArgs) -> Result<(), Failure> {
    let g = load(&a.graph)?;
    let p = a.query.resolve(&g)?;
    let percentiles = a
        .percentiles
        .unwrap_or_else(|| (0..20).map(|i| f64::from(i) * 5.0).chain([99.0, 99.9]).collect());
    let rows = balance_diagnostics(&g, &percentiles, a.sources, &p)?;
    write_balance(output(&a.out)?, &rows)?;
    Ok(())
}

fn run_groundtruth(a: GroundtruthArgs) -> Result<(), Failure> {
    let g = load(&a.graph)?;
    // delta only matters when the tolerance is derived from it
    let tol = match a.tol {
        Some(tol) => tol,
        None => a.query.resolve(&g)?.delta / 100.0,
    };
    let alpha = a.query.alpha;
    let values = if let Some(s) = a.source {
        power_iteration_ppr(&g, node(&g, s)?, alpha, tol)?.values
    } else if let Some(t) = a.target {
        exact_inverse_ppr(&g, node(&g, t)?, alpha, tol)?.values
    } else {
        global_pagerank(&g, alpha, tol)?
    };
    let mut w = csv::Writer::from_writer(output(&a.out)?);
    w.write_record(["node", "value"]).map_err(Error::from)?;
    for (u, v) in values.iter().enumerate() {
        w.serialize((g.label(u as NodeId), v)).map_err(Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn run_precompute(a: PrecomputeArgs) -> Result<(), Failure> {
    let g = load(&a.graph)?;
    // delta only matters when eps_r is derived from it
    let eps_r = match a.query.eps_r {
        EpsSpec::Value(e) => e,
        _ => a.query.resolve(&g)?.resolved_eps_r(&g),
    };
    let p = a.query;
    let store = precompute_frontiers(&g, eps_r, p.beta, p.alpha, Some(&a.store))?;
    println!(
        "targets={} entries={} frontier_entries={} bound={} eps_r={eps_r}",
        store.records.len(),
        store.total_entries(),
        store.frontier_entries(),
        g.edge_count() as f64 / eps_r,
    );
    Ok(())
}

fn run_gen(a: GenArgs) -> Result<(), Failure> {
    let n = a.nodes;
    let g = match a.kind {
        GenKind::PowerLaw => synthetic::power_law_digraph(n, a.avg_degree, a.exponent, a.seed)?,
        GenKind::Random => synthetic::random_digraph(n, a.edges.unwrap_or(5 * n), a.seed)?,
        GenKind::TwoCycle => synthetic::two_cycle(),
        GenKind::Cycle => synthetic::directed_cycle(n.max(1)),
        GenKind::Star => synthetic::in_star(n.saturating_sub(1).max(1)),
    };
    let mut w = output(&a.out)?;
    w.write_all(g.to_edge_list_text().as_bytes())?;
    w.flush()?;
    Ok(())
}

fn configure_threads() -> Result<(), Failure> {
    let Ok(raw) = std::env::var("FASTPPR_THREADS") else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| Failure::usage(format!("FASTPPR_THREADS must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure {
            code: 1,
            message: e.to_string(),
        })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match configure_threads().and_then(|()| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
