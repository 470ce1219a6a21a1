use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use hypnet::netbuild::{read_network, NodeId};
use hypnet::pipeline::{self, PipelineConfig, SEED_ENV};
use hypnet::query::{self, QueryParams};
use hypnet::topics::{self, LdaParams, TopicModel};

/// Exit status when the two query nodes are not connected.
const NO_PATH: u8 = 2;

#[derive(Parser)]
#[command(name = "hypnet", version, about = "Build a literature knowledge network and generate hypotheses from it")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run (or resume) the network construction pipeline.
    Build(BuildArgs),
    /// Shortest path between two nodes and the abstract cloud around it.
    Query(QueryArgs),
    /// Topic models over query bundles.
    #[command(subcommand)]
    Topics(TopicsCommand),
    /// Structural profile of a network file.
    Stats(StatsArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed (and MOLIERE_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the config cutoff date (YYYY-MM-DD).
    #[arg(long)]
    cutoff: Option<String>,
}

#[derive(Args)]
struct QueryArgs {
    #[arg(long)]
    network: PathBuf,
    /// `k:<keyword_id>` or `a:<doc_id>`; a bare id is taken as a keyword.
    #[arg(long)]
    source: String,
    #[arg(long)]
    target: String,
    #[arg(long, default_value_t = QueryParams::default().cloud_size)]
    cloud_size: usize,
    #[arg(long, default_value_t = QueryParams::default().pair_cap)]
    pair_cap: usize,
    /// Bundle directory to create.
    #[arg(long)]
    out: PathBuf,
    /// Phrase-merged documents; defaults to docs.jsonl beside the network.
    #[arg(long)]
    docs: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TopicsCommand {
    /// Fit LDA to a query bundle's documents.
    Fit(FitArgs),
    /// Per-topic distribution of terms containing a pattern.
    Report(ReportArgs),
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    bundle: PathBuf,
    #[arg(long, default_value_t = LdaParams::default().num_topics)]
    topics: usize,
    #[arg(long, default_value_t = LdaParams::default().iterations)]
    iters: usize,
    /// Defaults to MOLIERE_SEED, then 1.
    #[arg(long)]
    seed: Option<u64>,
    /// Model file; defaults to model.json inside the bundle.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Top words printed per topic.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    pattern: String,
    /// Second model to compare against.
    #[arg(long)]
    against: Option<PathBuf>,
    /// Also write the TSV table here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct StatsArgs {
    #[arg(long)]
    network: PathBuf,
    #[arg(long)]
    json: bool,
}

fn parse_node(s: &str) -> Result<NodeId> {
    if s.contains(':') {
        s.parse().map_err(anyhow::Error::msg)
    } else {
        Ok(NodeId::keyword(s))
    }
}

fn load_network(path: &Path) -> Result<hypnet::netbuild::KnowledgeNetwork> {
    read_network(path).with_context(|| format!("cannot read network {}", path.display()))
}

fn build(args: BuildArgs) -> Result<ExitCode> {
    let mut cfg = PipelineConfig::load(&args.config)
        .with_context(|| format!("cannot load config {}", args.config.display()))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.paths.out_dir = o;
    }
    if args.cutoff.is_some() {
        cfg.cutoff = args.cutoff;
    }
    let report = pipeline::build(&cfg)?;
    print!("{}", report.to_tsv());
    println!("network\t{}", report.network_path.display());
    println!("config_hash\t{}", report.config_hash);
    Ok(ExitCode::SUCCESS)
}

fn run_query(args: QueryArgs) -> Result<ExitCode> {
    let net = load_network(&args.network)?;
    let docs_path = args
        .docs
        .unwrap_or_else(|| args.network.with_file_name(pipeline::DOCS_FILE));
    let docs = query::read_docs_jsonl(&docs_path)
        .with_context(|| format!("cannot read documents {}", docs_path.display()))?;
    let (source, target) = (parse_node(&args.source)?, parse_node(&args.target)?);
    let params = QueryParams {
        cloud_size: args.cloud_size,
        pair_cap: args.pair_cap,
    };
    let bundle = query::run_query(&net, &docs, &source, &target, &params)?;
    query::write_bundle(&args.out, &bundle)?;
    match &bundle.path {
        Some(p) => {
            let nodes: Vec<String> = p.nodes.iter().map(ToString::to_string).collect();
            println!("path\t{}", nodes.join(" -> "));
            println!("weight\t{}", p.total_weight);
            println!("cloud\t{} abstracts", bundle.cloud.union.len());
            if bundle.cloud.direct_keyword_link {
                println!("note\tpath runs through keywords only");
            }
            Ok(ExitCode::SUCCESS)
        }
        None => {
            eprintln!("no path between {source} and {target}; wrote empty bundle to {}", args.out.display());
            Ok(ExitCode::from(NO_PATH))
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .with_context(|| format!("{SEED_ENV}={v:?} is not an unsigned integer")),
        Err(_) => Ok(None),
    }
}

fn fit(args: FitArgs) -> Result<ExitCode> {
    let bundle = query::read_bundle(&args.bundle)
        .with_context(|| format!("cannot read bundle {}", args.bundle.display()))?;
    if bundle.docs.is_empty() {
        bail!("bundle {} has no documents to model", args.bundle.display());
    }
    let params = LdaParams {
        num_topics: args.topics,
        iterations: args.iters,
        seed: match args.seed {
            Some(s) => s,
            None => env_seed()?.unwrap_or(1),
        },
        ..LdaParams::default()
    };
    let mut model = topics::fit_lda(&bundle.docs, &params)?;
    model.meta = bundle.meta.clone();
    model.meta.insert("lda_seed".into(), params.seed.to_string());
    model.meta.insert("query".into(), format!("{}->{}", bundle.source, bundle.target));
    let out = args.out.unwrap_or_else(|| args.bundle.join("model.json"));
    model.save(&out)?;
    for t in 0..model.num_topics() {
        let words: Vec<String> = topics::top_words(&model, t, args.top)?
            .into_iter()
            .map(|(w, _)| w)
            .collect();
        println!("topic {t}\t{}", words.join(" "));
    }
    println!("model\t{}", out.display());
    Ok(ExitCode::SUCCESS)
}

fn load_model(path: &Path) -> Result<TopicModel> {
    TopicModel::load(path).with_context(|| format!("cannot read model {}", path.display()))
}

fn report(args: ReportArgs) -> Result<ExitCode> {
    let a = topics::term_distribution(&load_model(&args.model)?, &args.pattern)?;
    let table = match &args.against {
        Some(other) => {
            let b = topics::term_distribution(&load_model(other)?, &args.pattern)?;
            let cmp = topics::compare_queries(&a, &b)?;
            println!("{}", a.summary());
            println!("{}", b.summary());
            cmp.to_tsv()
        }
        None => {
            println!("{}", a.summary());
            a.to_tsv()
        }
    };
    print!("{table}");
    if let Some(out) = &args.out {
        std::fs::write(out, &table).with_context(|| format!("cannot write {}", out.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn stats(args: StatsArgs) -> Result<ExitCode> {
    let s = load_network(&args.network)?.stats();
    if args.json {
        println!("{}", serde_json::to_string_pretty(&s)?);
    } else {
        println!("nodes\t{} ({} abstracts, {} keywords)", s.nodes, s.abstracts, s.keywords);
        println!("edges\t{} ({} AA, {} KK, {} AK)", s.edges, s.aa_edges, s.kk_edges, s.ak_edges);
        println!("average_degree\t{:.4}", s.average_degree);
        println!("clustering_coefficient\t{:.4}", s.clustering_coefficient);
        println!("components\t{} (largest {})", s.components, s.largest_component);
        let sizes: Vec<String> = s.component_sizes.iter().map(ToString::to_string).collect();
        println!("component_sizes\t{}", sizes.join(" "));
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Build(a) => build(a),
        Command::Query(a) => run_query(a),
        Command::Topics(TopicsCommand::Fit(a)) => fit(a),
        Command::Topics(TopicsCommand::Report(a)) => report(a),
        Command::Stats(a) => stats(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
