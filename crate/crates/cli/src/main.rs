//! `scev` command-line driver.

mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use scev::clusterers::run_algorithm;
use scev::consensus::ScevOutput;
use scev::io::{
    load_dataset, load_partitions, load_supervision, load_weights, make_gaussians, render_consensus,
    render_partitions, render_weights, save_dataset, save_partitions, write_atomic, PartitionTable,
    RunConfig,
};
use scev::{
    canonicalize, generate_ensemble, metric_report, vote_ensemble, Algorithm, ClustererConfig,
    ConsensusResult, Dataset, EmptyClusterPolicy, Ensemble, MetricReport, Parallelism, Partition,
    Provenance, ReferencePolicy, TiePolicy, ValidatedSupervision,
};

use report::{consensus_report, Metrics};

#[derive(Parser)]
#[command(name = "scev", version, about = "Semi-supervised clustering ensembles by weighted voting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one base clusterer and write its partition.
    Cluster(ClusterArgs),
    /// Generate the base partitions described by a run configuration.
    Ensemble(EnsembleArgs),
    /// Align a partitions file to its reference and vote.
    Consensus(ConsensusArgs),
    /// Compare a partition against a reference labeling.
    Eval(EvalArgs),
    /// Ensemble, consensus and report from one run configuration.
    Pipeline(PipelineArgs),
    /// Write synthetic Gaussian blobs and their generating labels.
    Synth(SynthArgs),
}

#[derive(Args)]
struct SupervisionArgs {
    /// `object_id,class` lines.
    #[arg(long)]
    seeds: Option<PathBuf>,
    /// `object_id,object_id,ML|CL` lines.
    #[arg(long)]
    constraints: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Algorithm,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "reseed-farthest", value_parser = parse_empty_policy)]
    empty_cluster_policy: EmptyClusterPolicy,
    #[command(flatten)]
    supervision: SupervisionArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to `<output_dir>/partitions.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Defaults to `<output_dir>/weights.csv`.
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args)]
struct ConsensusArgs {
    #[arg(long)]
    partitions: PathBuf,
    /// `partition_index,alpha,beta` lines; unlisted partitions get 1,1.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Reference partition: an index, or `random:<seed>`.
    #[arg(long, default_value = "0", value_parser = parse_reference)]
    reference: ReferencePolicy,
    #[arg(long, default_value = "unresolved", value_parser = parse_tie)]
    tie_policy: TiePolicy,
    /// Rescale ω so the weights sum to the number of partitions.
    #[arg(long)]
    normalize: bool,
    /// Truth partition file; adds metrics to the report.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Dataset, needed to resolve `--constraints` for violation counts.
    #[arg(long, requires = "constraints")]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    constraints: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    partition: PathBuf,
    #[arg(long)]
    truth: PathBuf,
    /// Partition column to evaluate (0-based, after the id column).
    #[arg(long, default_value_t = 0)]
    column: usize,
    #[arg(long, default_value_t = 0)]
    truth_column: usize,
    #[arg(long, requires = "constraints")]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    constraints: Option<PathBuf>,
    /// Also write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 50)]
    n_per_cluster: usize,
    /// Semicolon-separated centers, e.g. `0,0;10,0;0,10`.
    #[arg(long, value_parser = parse_centers)]
    centers: Centers,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Clone)]
struct Centers(Vec<Vec<f64>>);

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: scev::Error| e.to_string())
}

fn parse_empty_policy(s: &str) -> Result<EmptyClusterPolicy, String> {
    s.parse().map_err(|e: scev::Error| e.to_string())
}

fn parse_tie(s: &str) -> Result<TiePolicy, String> {
    s.parse().map_err(|e: scev::Error| e.to_string())
}

fn parse_reference(s: &str) -> Result<ReferencePolicy, String> {
    if let Some(seed) = s.strip_prefix("random:") {
        let seed = seed.parse().map_err(|_| format!("bad seed in `{s}`"))?;
        return Ok(ReferencePolicy::Random { seed });
    }
    s.parse()
        .map(|index| ReferencePolicy::UserIndex { index })
        .map_err(|_| format!("expected an index or `random:<seed>`, got `{s}`"))
}

fn parse_centers(s: &str) -> Result<Centers, String> {
    let centers: Vec<Vec<f64>> = s
        .split(';')
        .map(|c| {
            c.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| format!("bad coordinate `{x}`")))
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let d = centers[0].len();
    if centers.iter().any(|c| c.len() != d) {
        return Err("centers must share one dimension".into());
    }
    Ok(Centers(centers))
}

fn supervision(data: &Dataset, seeds: Option<&Path>, constraints: Option<&Path>) -> Result<ValidatedSupervision> {
    load_supervision(seeds, constraints, data).context("supervision")
}

fn cluster(args: ClusterArgs) -> Result<()> {
    let data = load_dataset(&args.data).context("loading dataset")?;
    let sup = supervision(&data, args.supervision.seeds.as_deref(), args.supervision.constraints.as_deref())?;
    let cfg = ClustererConfig {
        k: args.k,
        max_iters: args.max_iters,
        tol: args.tol,
        rng_seed: args.seed,
        empty_cluster_policy: args.empty_cluster_policy,
    };
    let fit = run_algorithm(&data, args.algorithm, &cfg, &sup, Parallelism::default())
        .with_context(|| format!("clustering ({})", args.algorithm))?;
    let part = canonicalize(&fit.partition);
    save_partitions(&args.out, data.object_ids(), &[args.algorithm.to_string()], &[part])?;
    eprintln!("{} iterations, objective {:?}", fit.iterations, fit.objective.last());
    Ok(())
}

struct Generated {
    data: Dataset,
    supervision: ValidatedSupervision,
    ensemble: Ensemble,
    names: Vec<String>,
}

fn generate(cfg: &RunConfig) -> Result<Generated> {
    let data = load_dataset(&cfg.dataset).context("loading dataset")?;
    let sup = supervision(&data, cfg.seeds.as_deref(), cfg.constraints.as_deref())?;
    let spec = cfg.ensemble_spec().context("ensemble configuration")?;
    let ensemble = generate_ensemble(&data, &spec, &sup).context("ensemble stage")?;
    let names = spec
        .entries
        .iter()
        .enumerate()
        .map(|(j, e)| format!("{}{j}", e.algorithm))
        .collect();
    Ok(Generated {
        data,
        supervision: sup,
        ensemble,
        names,
    })
}

fn write_ensemble(g: &Generated, partitions: &Path, weights: &Path) -> Result<()> {
    let text = render_partitions(g.data.object_ids(), &g.names, g.ensemble.partitions())?;
    write_atomic(partitions, text.as_bytes())?;
    write_atomic(weights, render_weights(g.ensemble.weights()).as_bytes())?;
    Ok(())
}

fn ensemble(args: EnsembleArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let g = generate(&cfg)?;
    let out = args.out.unwrap_or_else(|| cfg.output_dir.join("partitions.csv"));
    let weights = args.weights.unwrap_or_else(|| cfg.output_dir.join("weights.csv"));
    write_ensemble(&g, &out, &weights)?;
    println!("reference_index={}", g.ensemble.reference_index());
    Ok(())
}

fn consensus_partition(result: &ConsensusResult) -> Option<Partition> {
    let k = result.labels.iter().flatten().max()? + 1;
    Partition::new(result.labels.clone(), k, Provenance::new("consensus", "", None)).ok()
}

fn metrics_for(
    ids: &[String],
    out: &ScevOutput,
    truth: &Path,
    constraints: Option<&ValidatedSupervision>,
) -> Result<Metrics> {
    let truth = load_partitions(truth)
        .context("loading truth")?
        .reorder_to(ids)
        .context("truth ids")?
        .partitions
        .into_iter()
        .next()
        .expect("partition tables have a column");
    let score = |p: &Partition| metric_report(p, &truth, constraints).ok();
    Ok(Metrics {
        consensus: consensus_partition(&out.result).as_ref().and_then(score),
        base_partitions: out.ensemble.partitions().iter().map(score).collect(),
    })
}

fn write_consensus(
    ids: &[String],
    names: &[String],
    out: &ScevOutput,
    labels_path: &Path,
    report_path: Option<&Path>,
    metrics: Option<Metrics>,
) -> Result<()> {
    let text = render_consensus(ids, &out.result, out.ensemble.reference());
    write_atomic(labels_path, text.as_bytes())?;
    if let Some(path) = report_path {
        let report = consensus_report(ids, names, &out.ensemble, &out.audit, metrics);
        let mut json = serde_json::to_string_pretty(&report)?;
        json.push('\n');
        write_atomic(path, json.as_bytes())?;
    }
    Ok(())
}

fn consensus(args: ConsensusArgs) -> Result<()> {
    let table = load_partitions(&args.partitions).context("loading partitions")?;
    let m = table.partitions.len();
    let weights = match &args.weights {
        Some(p) => load_weights(p, m).context("loading weights")?,
        None => vec![Default::default(); m],
    };
    let reference = scev::select_reference(m, &args.reference).context("reference stage")?;
    let ensemble = Ensemble::new(table.partitions.clone(), weights, reference)?;
    let out = vote_ensemble(ensemble, args.tie_policy, args.normalize, Parallelism::default())?;
    let constraints = match (&args.data, &args.constraints) {
        (Some(d), Some(c)) => {
            let data = load_dataset(d).context("loading dataset")?;
            let ordered = table.reorder_to(data.object_ids()).context("partition ids vs dataset")?;
            if ordered != table {
                bail!("partitions file rows must follow the dataset's object order");
            }
            Some(supervision(&data, None, Some(c))?)
        }
        _ => None,
    };
    let metrics = match &args.truth {
        Some(t) => Some(metrics_for(&table.ids, &out, t, constraints.as_ref())?),
        None => None,
    };
    write_consensus(&table.ids, &table.names, &out, &args.out, args.report.as_deref(), metrics)?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let table = load_partitions(&args.partition).context("loading partition")?;
    let truth = load_partitions(&args.truth)
        .context("loading truth")?
        .reorder_to(&table.ids)
        .context("truth ids")?;
    let pick = |t: &PartitionTable, j: usize| -> Result<Partition> {
        t.partitions
            .get(j)
            .cloned()
            .ok_or_else(|| anyhow!("column {j} out of range ({} columns)", t.partitions.len()))
    };
    let p = pick(&table, args.column)?;
    let q = pick(&truth, args.truth_column)?;
    let constraints = match (&args.data, &args.constraints) {
        (Some(d), Some(c)) => {
            let data = load_dataset(d).context("loading dataset")?;
            if data.object_ids() != table.ids.as_slice() {
                bail!("partition rows must follow the dataset's object order");
            }
            Some(supervision(&data, None, Some(c))?)
        }
        _ => None,
    };
    let report: MetricReport = metric_report(&p, &q, constraints.as_ref()).context("metrics")?;
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    print!("{json}");
    if let Some(path) = &args.report {
        write_atomic(path, json.as_bytes())?;
    }
    Ok(())
}

fn pipeline(args: PipelineArgs) -> Result<()> {
    let cfg = RunConfig::load(&args.config)?;
    let g = generate(&cfg)?;
    let dir = &cfg.output_dir;
    write_ensemble(&g, &dir.join("partitions.csv"), &dir.join("weights.csv"))?;
    let ids = g.data.object_ids().to_vec();
    let out = vote_ensemble(g.ensemble, cfg.tie_policy, cfg.normalize, Parallelism::default())?;
    let constraints = cfg.constraints.is_some().then_some(&g.supervision);
    let metrics = match &cfg.truth {
        Some(t) => Some(metrics_for(&ids, &out, t, constraints)?),
        None => None,
    };
    write_consensus(
        &ids,
        &g.names,
        &out,
        &dir.join("consensus.csv"),
        Some(&dir.join("report.json")),
        metrics,
    )?;
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let (data, truth) = make_gaussians(args.n_per_cluster, &args.centers.0, args.sigma, args.seed)?;
    save_dataset(&args.out, &data)?;
    if let Some(path) = &args.truth {
        save_partitions(path, data.object_ids(), &["truth".to_string()], &[truth])?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Cluster(a) => cluster(a),
        Command::Ensemble(a) => ensemble(a),
        Command::Consensus(a) => consensus(a),
        Command::Eval(a) => eval(a),
        Command::Pipeline(a) => pipeline(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
