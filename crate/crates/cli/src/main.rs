//! Batch front door for domain latent class models: dataset simulation,
//! model fitting, diagnostics, and multi-replicate studies.
//!
//! Exit codes: 0 ok, 2 usage or configuration error, 3 invalid dataset,
//! 4 runtime failure.

mod replicate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dlcm::diagnostics::{fit_summary, structure_mode};
use dlcm::model::Dataset;
use dlcm::priors::PriorKind;
use dlcm::record::ChainRecord;
use dlcm::sampler::{run_chains, ModelKind, SamplerConfig, SeedStyle};
use dlcm::simgen::{generate_scenario, write_truth_json, GeneratorSpec, Scenario};

#[derive(Parser)]
#[command(name = "dlcm", version, about = "Domain latent class models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Bound on worker threads for chains and replicates.
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Generate a synthetic dataset from one of the study scenarios.
    Simulate(SimulateArgs),
    /// Fit a model to a CSV dataset and write chain records plus a summary.
    Fit(FitArgs),
    /// Recompute diagnostics from a fit directory.
    Diagnose(DiagnoseArgs),
    /// Run a multi-replicate study from a plan file.
    Replicate(ReplicateArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// One of: traditional, homogeneous, homogeneous_bad, heterogeneous.
    #[arg(long)]
    scenario: String,
    /// Sample size.
    #[arg(long)]
    n: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for data.csv and truth.json.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    /// Input dataset (CSV with a header row of item names).
    #[arg(long)]
    data: PathBuf,
    /// Output directory for chain records and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// JSON configuration file; explicit flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    classes: Option<u32>,
    /// One of: traditional, homogeneous, heterogeneous, partial.
    #[arg(long)]
    model: Option<String>,
    /// One of: uniform, bucket, pattern_adjusted.
    #[arg(long)]
    prior: Option<String>,
    #[arg(long)]
    chains: Option<u32>,
    #[arg(long)]
    warmup: Option<u32>,
    #[arg(long)]
    main: Option<u32>,
    #[arg(long)]
    seed: Option<u64>,
    /// default | random starting conditions.
    #[arg(long)]
    seed_style: Option<String>,
    /// Class-group labels for partial mode, e.g. 0,0,1.
    #[arg(long, visible_alias = "E", value_name = "LABELS")]
    equivalence: Option<String>,
    /// Collapse theta and pi in the class update.
    #[arg(long)]
    collapsed: bool,
    #[arg(long)]
    n_homo_iters: Option<u32>,
    #[arg(long)]
    n_domain_iters: Option<u32>,
    #[arg(long)]
    slots: Option<u32>,
    #[arg(long)]
    max_items: Option<u32>,
    #[arg(long)]
    p_empty: Option<f64>,
    /// Set D to the smallest slot count giving singletons this prior-odds
    /// ratio over one pair (ignored when --slots is given).
    #[arg(long)]
    prior_q: Option<f64>,
    #[arg(long)]
    alpha_theta: Option<f64>,
    /// Skip per-iteration theta/pi in the records to save space.
    #[arg(long)]
    no_params: bool,
}

#[derive(Args)]
struct DiagnoseArgs {
    /// A fit output directory containing chain_* subdirectories.
    #[arg(long)]
    fit: PathBuf,
    /// Where to write summary.json and structures_top.csv (default: in place).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Study plan JSON.
    #[arg(long)]
    plan: PathBuf,
}

/// Error category driving the process exit code.
enum Failure {
    Usage(String),
    Data(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Data(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }
    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::Runtime(m) => m,
        }
    }
}

fn classify(err: dlcm::Error) -> Failure {
    use dlcm::Error as E;
    match &err {
        E::NonRectangular { .. }
        | E::NegativeCode { .. }
        | E::CodeOutOfRange { .. }
        | E::InvalidCell { .. }
        | E::TooFewDistinctRows { .. } => Failure::Data(err.to_string()),
        E::ConfigInvalid(_)
        | E::DimensionMismatch(_)
        | E::StructureInvalid(_)
        | E::TooManyDomains { .. }
        | E::SizesDontSumToJ { .. } => Failure::Usage(err.to_string()),
        _ => Failure::Runtime(err.to_string()),
    }
}

fn root_seed(flag: Option<u64>) -> Result<u64, Failure> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    match std::env::var("DLCM_SEED") {
        Ok(raw) => raw
            .parse()
            .map_err(|_| Failure::Usage(format!("DLCM_SEED {raw:?} is not a u64"))),
        Err(_) => Ok(0),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Replicate(args) => replicate::cmd_replicate(args.plan),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message());
            ExitCode::from(failure.code())
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<(), Failure> {
    let scenario: Scenario = args
        .scenario
        .parse()
        .map_err(|e: dlcm::Error| Failure::Usage(e.to_string()))?;
    let seed = root_seed(args.seed)?;
    let spec = GeneratorSpec {
        scenario,
        n: args.n,
        seed,
    };
    let (truth, data, labels) =
        generate_scenario(&spec).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", args.out.display())))?;
    data.write_csv(args.out.join("data.csv"))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    write_truth_json(&truth, &labels, args.out.join("truth.json"))
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    println!(
        "wrote {} subjects x {} items to {}",
        data.n_subjects(),
        data.n_items(),
        args.out.display()
    );
    Ok(())
}

fn build_config(args: &FitArgs) -> Result<SamplerConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("reading {}: {e}", path.display())))?;
            serde_json::from_str::<SamplerConfig>(&raw)
                .map_err(|e| Failure::Usage(format!("parsing {}: {e}", path.display())))?
        }
        None => {
            let classes = args
                .classes
                .ok_or_else(|| Failure::Usage("--classes is required without --config".into()))?;
            SamplerConfig::new(classes)
        }
    };
    if let Some(classes) = args.classes {
        config.classes = classes;
    }
    if let Some(model) = &args.model {
        config.model = model
            .parse::<ModelKind>()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(prior) = &args.prior {
        config.hyper.prior_kind = prior
            .parse::<PriorKind>()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(chains) = args.chains {
        config.chains = chains;
    }
    if let Some(warmup) = args.warmup {
        config.warmup = warmup;
    }
    if let Some(main) = args.main {
        config.main = main;
    }
    if let Some(style) = &args.seed_style {
        config.seed_style = style
            .parse::<SeedStyle>()
            .map_err(|e| Failure::Usage(e.to_string()))?;
    }
    if let Some(raw) = &args.equivalence {
        let labels: Result<Vec<u32>, _> = raw.split(',').map(|s| s.trim().parse()).collect();
        config.equivalence =
            Some(labels.map_err(|_| Failure::Usage(format!("bad equivalence labels {raw:?}")))?);
    }
    if args.collapsed {
        config.collapsed_class_update = true;
    }
    if let Some(v) = args.n_homo_iters {
        config.hyper.n_homo_iters = Some(v);
    }
    if let Some(v) = args.n_domain_iters {
        config.hyper.n_domain_iters = Some(v);
    }
    if let Some(v) = args.slots {
        config.hyper.slots = Some(v);
    }
    if let Some(v) = args.max_items {
        config.hyper.max_items = v;
    }
    if let Some(v) = args.p_empty {
        config.hyper.p_empty = v;
    }
    if let Some(v) = args.prior_q {
        config.hyper.prior_q = Some(v);
    }
    if let Some(v) = args.alpha_theta {
        config.hyper.alpha_theta = v;
    }
    if args.no_params {
        config.record_params = false;
    }
    config.seed = root_seed(args.seed)?;
    Ok(config)
}

fn cmd_fit(args: FitArgs) -> Result<(), Failure> {
    let config = build_config(&args)?;
    // Anything wrong with the dataset itself, including an unreadable file,
    // is a data failure.
    let (data, warnings) = Dataset::read_csv(&args.data, None).map_err(|e| match classify(e) {
        Failure::Runtime(m) => Failure::Data(m),
        other => other,
    })?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }
    let records = run_chains(&data, &config).map_err(classify)?;
    std::fs::create_dir_all(&args.out)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", args.out.display())))?;
    for record in &records {
        record
            .save_dir(
                args.out
                    .join(format!("chain_{:03}", record.meta.chain_index)),
            )
            .map_err(|e| Failure::Runtime(e.to_string()))?;
    }
    let summary = fit_summary(&records).map_err(|e| Failure::Runtime(e.to_string()))?;
    std::fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.to_string()))?,
    )
    .map_err(|e| Failure::Runtime(e.to_string()))?;
    println!(
        "fit {} chains x {} iterations: waic {:.1}, mode share {:.3}{}",
        records.len(),
        records[0].total_iterations(),
        summary.waic,
        summary.mode_share.unwrap_or(0.0),
        summary
            .psrf
            .map(|r| format!(", psrf {r:.3}"))
            .unwrap_or_default()
    );
    Ok(())
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<(), Failure> {
    let mut chain_dirs: Vec<PathBuf> = std::fs::read_dir(&args.fit)
        .map_err(|e| Failure::Usage(format!("reading {}: {e}", args.fit.display())))?
        .filter_map(|entry| entry.ok())
        .map(|entry| entry.path())
        .filter(|path| {
            path.is_dir()
                && path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("chain_"))
                    .unwrap_or(false)
        })
        .collect();
    chain_dirs.sort();
    if chain_dirs.is_empty() {
        return Err(Failure::Usage(format!(
            "no chain_* directories under {}",
            args.fit.display()
        )));
    }
    let records: Result<Vec<ChainRecord>, _> =
        chain_dirs.iter().map(ChainRecord::load_dir).collect();
    let records = records.map_err(|e| Failure::Runtime(e.to_string()))?;
    let summary = fit_summary(&records).map_err(|e| Failure::Runtime(e.to_string()))?;
    let out = args.out.unwrap_or_else(|| args.fit.clone());
    std::fs::create_dir_all(&out)
        .map_err(|e| Failure::Runtime(format!("creating {}: {e}", out.display())))?;
    std::fs::write(
        out.join("summary.json"),
        serde_json::to_string_pretty(&summary).map_err(|e| Failure::Runtime(e.to_string()))?,
    )
    .map_err(|e| Failure::Runtime(e.to_string()))?;

    let warmup = records[0].meta.warmup as usize;
    let shares = structure_mode(&records, warmup);
    let mut csv = String::from("rank,share,visits,structure\n");
    for (rank, share) in shares.iter().take(20).enumerate() {
        csv.push_str(&format!(
            "{},{:.6},{},\"{}\"\n",
            rank + 1,
            share.share,
            share.visits,
            share
                .structure
                .to_report_json()
                .to_string()
                .replace('"', "\"\"")
        ));
    }
    std::fs::write(out.join("structures_top.csv"), csv)
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    println!(
        "diagnose: {} chains, lppd {:.1}, waic {:.1}{}",
        records.len(),
        summary.lppd,
        summary.waic,
        summary
            .psrf
            .map(|r| format!(", psrf {r:.3}"))
            .unwrap_or_default()
    );
    Ok(())
}
