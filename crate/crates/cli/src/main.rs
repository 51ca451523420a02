//! `stss`: estimate sufficient training set sizes from the command line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stss_core::analysis::{self, CorpusRow};
use stss_core::classifiers::MethodId;
use stss_core::pipeline::{self, DatasetEntry, FitStatus, PlanManifest, RunConfig};
use stss_core::Error;

#[derive(Parser, Debug)]
#[command(name = "stss", version, about = "Sufficient training set size estimation")]
struct Cli {
    /// Base seed for every random choice in the experiment.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads for `run`.
    #[arg(long, global = true, env = "STSS_WORKERS")]
    workers: Option<usize>,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the characteristics of one dataset.
    Characterize(DataArgs),
    /// Run the subsampling experiment and store one record per training subset.
    Run(RunArgs),
    /// Fit learning curves to stored records and compute the sufficient size.
    Fit(FitArgs),
    /// Stepwise regression and size groups over a corpus.
    Analyze(AnalyzeArgs),
    /// Look up the recommended training set size.
    Recommend(RecommendArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    /// Dataset id; defaults to the data file stem.
    #[arg(long)]
    id: Option<String>,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Single dataset to run instead of the config's dataset list.
    #[arg(long, requires = "schema")]
    data: Option<PathBuf>,
    #[arg(long, requires = "data")]
    schema: Option<PathBuf>,
    #[arg(long)]
    id: Option<String>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    /// Comma-separated subset of LOGISTIC, NAIVE_BAYES, MLP, RANDOM_FOREST, SVM.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<MethodId>>,
    /// Fit curves after the run completes.
    #[arg(long)]
    fit: bool,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Datasets to fit; defaults to the config's datasets, else every run
    /// found in the output directory.
    #[arg(long = "id")]
    ids: Vec<String>,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Corpus CSV (id,N_P,N_F,N_CAT,N_CONT,R_CAT,N_C,C_MIN,I_C,STSS).
    #[arg(long, conflicts_with = "from_runs")]
    corpus: Option<PathBuf>,
    /// Build the corpus from fitted runs in the output directory.
    #[arg(long)]
    from_runs: bool,
    #[arg(long, default_value_t = analysis::DEFAULT_P_ENTER)]
    p_enter: f64,
    #[arg(long, default_value_t = analysis::DEFAULT_P_REMOVE)]
    p_remove: f64,
}

#[derive(Args, Debug)]
struct RecommendArgs {
    #[arg(long)]
    classes: usize,
    #[arg(long)]
    features: usize,
    /// Table written by `analyze`; defaults to the built-in reference table.
    #[arg(long)]
    table: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn usage(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        message: message.to_string(),
    }
}

fn runtime(message: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        message: message.to_string(),
    }
}

fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} not found: {}", path.display())))
    }
}

/// Config file (if any) with command-line overrides applied.
fn load_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => {
            require_file(p, "config file")?;
            RunConfig::from_path(p).map_err(|e| usage(format!("invalid config {}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.base_seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out_dir = o.clone();
    }
    Ok(cfg)
}

fn resolve_workers(cli: &Cli, cfg: &RunConfig) -> CliResult<usize> {
    let w = cli
        .workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if w == 0 {
        return Err(usage("--workers must be >= 1"));
    }
    Ok(w)
}

fn default_id(data: &Path) -> String {
    data.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

fn cmd_characterize(cli: &Cli, args: &DataArgs) -> CliResult<()> {
    require_file(&args.schema, "schema file")?;
    require_file(&args.data, "data file")?;
    let id = args.id.clone().unwrap_or_else(|| default_id(&args.data));
    let report = pipeline::characterize_file(&id, &args.data, &args.schema).map_err(|e| match e {
        Error::Schema(_) | Error::Json(_) => usage(e),
        _ => runtime(e),
    })?;
    if let Some(out) = &cli.out {
        let path = out.join(&id).join("characteristics.json");
        pipeline::save_json(&path, &report).map_err(runtime)?;
    }
    println!("{}", serde_json::to_string_pretty(&report).map_err(runtime)?);
    Ok(())
}

fn cmd_run(cli: &Cli, args: &RunArgs) -> CliResult<()> {
    let mut cfg = load_config(cli)?;
    if let (Some(data), Some(schema)) = (&args.data, &args.schema) {
        cfg.datasets = vec![DatasetEntry {
            id: args.id.clone().unwrap_or_else(|| default_id(data)),
            data: data.clone(),
            schema: schema.clone(),
        }];
    }
    if let Some(k) = args.folds {
        cfg.folds = k;
    }
    if let Some(r) = args.reps {
        cfg.reps = r;
    }
    if let Some(m) = &args.methods {
        cfg.methods = m.clone();
    }
    if cfg.datasets.is_empty() {
        return Err(usage("no datasets: pass --data/--schema or a --config listing datasets"));
    }
    cfg.validate().map_err(usage)?;
    let workers = resolve_workers(cli, &cfg)?;
    for d in &cfg.datasets {
        require_file(&d.schema, "schema file")?;
        require_file(&d.data, "data file")?;
    }

    let mut failed = 0;
    for d in &cfg.datasets {
        let mut last_pct = usize::MAX;
        let quiet = args.quiet;
        let mut progress = |done: usize, total: usize| {
            let pct = if total == 0 { 100 } else { done * 100 / total };
            if !quiet && pct / 10 != last_pct / 10 {
                eprintln!("{}: {done}/{total} tasks", d.id);
                last_pct = pct;
            }
        };
        let summary = pipeline::run_dataset(d, &cfg, workers, &mut progress).map_err(|e| match e {
            Error::Schema(_) | Error::InvalidArgument(_) => usage(format!("{}: {e}", d.id)),
            _ => runtime(format!("{}: {e}", d.id)),
        })?;
        pipeline::save_json(&cfg.dataset_dir(&d.id).join("run.json"), &summary).map_err(runtime)?;
        for f in &summary.failures {
            eprintln!(
                "{}: task (size {}, fold {}, rep {}) failed twice: {}",
                d.id, f.size, f.fold, f.rep, f.message
            );
        }
        println!(
            "{}: {} tasks, {} already stored, {} executed, {} failed",
            d.id,
            summary.tasks,
            summary.already_stored,
            summary.executed,
            summary.failures.len()
        );
        failed += summary.failures.len();
    }
    if failed > 0 {
        return Err(runtime(format!("{failed} task(s) failed; re-run to retry them")));
    }
    if args.fit {
        let ids: Vec<String> = cfg.datasets.iter().map(|d| d.id.clone()).collect();
        fit_ids(&cfg, &ids)?;
    }
    Ok(())
}

fn fit_ids(cfg: &RunConfig, ids: &[String]) -> CliResult<()> {
    let settings = cfg.fit_settings();
    for id in ids {
        if !PlanManifest::path_for(&cfg.dataset_dir(id)).is_file() {
            return Err(usage(format!("no run for {id} in {}", cfg.out_dir.display())));
        }
        let r = pipeline::fit_dataset(&cfg.out_dir, id, &settings).map_err(|e| runtime(format!("{id}: {e}")))?;
        match r.status {
            FitStatus::Ok => println!(
                "{id}: stss={} clamped={} f_inf={:.4} lower=({:.4}, {:.4}, {:.4}) mae={:.4}",
                r.stss.unwrap(),
                r.clamped.unwrap(),
                r.f_inf,
                r.lower_curve.alpha,
                r.lower_curve.beta,
                r.lower_curve.gamma,
                r.lower_curve.mae
            ),
            _ => println!(
                "{id}: status={} ({})",
                serde_json::to_value(r.status).unwrap().as_str().unwrap(),
                r.message.as_deref().unwrap_or("")
            ),
        }
    }
    Ok(())
}

fn cmd_fit(cli: &Cli, args: &FitArgs) -> CliResult<()> {
    let cfg = load_config(cli)?;
    cfg.validate().map_err(usage)?;
    let ids: Vec<String> = if !args.ids.is_empty() {
        args.ids.clone()
    } else if !cfg.datasets.is_empty() {
        cfg.datasets.iter().map(|d| d.id.clone()).collect()
    } else {
        let entries = std::fs::read_dir(&cfg.out_dir)
            .map_err(|e| usage(format!("cannot read {}: {e}", cfg.out_dir.display())))?;
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| PlanManifest::path_for(&e.path()).is_file())
            .filter_map(|e| e.file_name().to_str().map(String::from))
            .collect();
        ids.sort();
        ids
    };
    if ids.is_empty() {
        return Err(usage(format!("no runs found in {}", cfg.out_dir.display())));
    }
    fit_ids(&cfg, &ids)
}

fn cmd_analyze(cli: &Cli, args: &AnalyzeArgs) -> CliResult<()> {
    let cfg = load_config(cli)?;
    let corpus: Vec<CorpusRow> = if let Some(p) = &args.corpus {
        require_file(p, "corpus file")?;
        analysis::load_corpus(p).map_err(|e| usage(format!("invalid corpus {}: {e}", p.display())))?
    } else if args.from_runs {
        pipeline::corpus_from_reports(&cfg.out_dir).map_err(runtime)?
    } else {
        analysis::reference_corpus()
    };
    if corpus.is_empty() {
        return Err(usage("corpus is empty"));
    }
    let report = pipeline::analyze_to_dir(&corpus, args.p_enter, args.p_remove, &cfg.out_dir).map_err(runtime)?;

    if let Some(m) = &report.stepwise {
        println!("stepwise selection (intercept {:.3}):", m.intercept);
        for f in &m.selected {
            println!("  {:<6} coefficient {:>12.4}  p = {:.4}", f.name, f.coefficient, f.p_value);
        }
        if m.selected.is_empty() {
            println!("  (no feature selected)");
        }
    } else if let Some(note) = &report.stepwise_note {
        println!("{note}");
    }
    let g = &report.groups;
    println!(
        "groups (N_C <= {} vs >, N_F <= {} vs >):",
        g.class_threshold, g.feature_threshold
    );
    for c in &g.cells {
        let fmt = |v: Option<u64>| v.map_or("-".to_string(), |v| v.to_string());
        println!(
            "  N_C {} {}, N_F {} {}: {} dataset(s), max STSS {}, recommended {}",
            if c.many_classes { ">" } else { "<=" },
            g.class_threshold,
            if c.many_features { ">" } else { "<=" },
            g.feature_threshold,
            c.count(),
            fmt(c.max_stss),
            fmt(c.recommended)
        );
    }
    Ok(())
}

fn cmd_recommend(args: &RecommendArgs) -> CliResult<()> {
    let table = match &args.table {
        Some(p) => {
            require_file(p, "table file")?;
            pipeline::load_table(p).map_err(|e| usage(format!("invalid table {}: {e}", p.display())))?
        }
        None => analysis::default_table(),
    };
    if args.classes < 2 || args.features < 1 {
        return Err(usage("need --classes >= 2 and --features >= 1"));
    }
    let size = analysis::recommend(args.classes, args.features, &table).map_err(runtime)?;
    println!("{size}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Characterize(a) => cmd_characterize(&cli, a),
        Command::Run(a) => cmd_run(&cli, a),
        Command::Fit(a) => cmd_fit(&cli, a),
        Command::Analyze(a) => cmd_analyze(&cli, a),
        Command::Recommend(a) => cmd_recommend(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
