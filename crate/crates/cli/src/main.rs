//! `rocktype` command-line driver.
//!
//! Exit codes: 0 success, 2 configuration error (including bad flags),
//! 3 data error, 4 training error. Diagnostics go to stderr; stdout gets a
//! single summary line, or the rendered tables for `report`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use rocktype::experiment::{
    featurize, preprocess, render_report, run_experiment, train, write_json, ExperimentConfig, SelectConfig,
    FEATURES_CSV, REPORT_JSON,
};
use rocktype::features::parse_families;
use rocktype::models::{GbdtParams, LogisticParams, MlpParams, ModelSpec};
use rocktype::synth::{gen_benchmark, write_benchmark};
use rocktype::{Error, ErrorKind, Result};

#[derive(Debug, Parser)]
#[command(name = "rocktype", version, about = "Rock type identification from drilling telemetry")]
struct Cli {
    /// JSON experiment config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for simulation and every stochastic model.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Raw data root holding mwd/, lithology.csv and bounds.csv.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Feature families, e.g. `B+D+L`, or `-` for none.
    #[arg(long, global = true)]
    families: Option<String>,
    /// Model family with default parameters: prior, logistic, gbdt or mlp.
    #[arg(long, global = true)]
    model: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic benchmark in the ingest layout.
    Simulate {
        /// Number of wells.
        #[arg(long)]
        wells: Option<usize>,
    },
    /// Ingest, resample and label the raw data into the cache.
    Preprocess,
    /// Build the feature table and write features.csv.
    Featurize,
    /// Fit one model on all labeled rows and save it.
    Train,
    /// Leave-one-well-out evaluation with the configured features.
    Evaluate,
    /// Greedy forward feature selection followed by evaluation.
    SelectFeatures,
    /// Render report.json as plain-text tables.
    Report {
        /// Report file (default: <out>/report.json).
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn model_by_name(name: &str) -> Result<ModelSpec> {
    Ok(match name {
        "prior" => ModelSpec::Prior,
        "logistic" => ModelSpec::Logistic(LogisticParams::default()),
        "gbdt" => ModelSpec::Gbdt(GbdtParams::default()),
        "mlp" => ModelSpec::Mlp(MlpParams::default()),
        other => return Err(Error::Config(format!("unknown model family `{other}`"))),
    })
}

fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(data) = &cli.data {
        cfg.data.root = data.clone();
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(f) = &cli.families {
        cfg.features.families = parse_families(f)?;
    }
    if let Some(m) = &cli.model {
        cfg.model = model_by_name(m)?;
    }
    if let Command::Simulate { wells: Some(n) } = cli.command {
        cfg.simulate.n_wells = n;
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn run(cli: &Cli) -> Result<String> {
    let cfg = resolve_config(cli)?;
    let out = cfg.out_dir.clone();
    match &cli.command {
        Command::Simulate { .. } => {
            // Without --out the benchmark lands where the other commands read.
            let dir = cli.out.clone().unwrap_or_else(|| cfg.data.root.clone());
            let bench = gen_benchmark(&cfg.simulate)?;
            write_benchmark(&dir, &bench)?;
            write_json(&dir.join("simulate.resolved.json"), &cfg.simulate)?;
            info!("calibration accepted after {} attempt(s)", bench.attempt + 1);
            Ok(format!(
                "simulated {} wells into {}; pooled shale share {:.4}",
                bench.wells.len(),
                dir.display(),
                bench.pooled_share
            ))
        }
        Command::Preprocess => {
            let frames = preprocess(&cfg)?;
            create_dir(&out)?;
            cfg.write_resolved(&out)?;
            let bins: usize = frames.iter().map(|f| f.grid.n_bins()).sum();
            Ok(format!("preprocessed {} laterals, {bins} bins", frames.len()))
        }
        Command::Featurize => {
            let x = featurize(&preprocess(&cfg)?, &cfg.features)?;
            create_dir(&out)?;
            cfg.write_resolved(&out)?;
            x.write_csv(&out.join(FEATURES_CSV))?;
            Ok(format!("wrote {} rows x {} features to {}", x.n_rows(), x.n_cols(), out.join(FEATURES_CSV).display()))
        }
        Command::Train => {
            let model = train(&cfg, &out)?;
            Ok(format!("trained {} model on {} features into {}", model.family(), model.features().len(), out.display()))
        }
        Command::Evaluate => {
            let cfg = ExperimentConfig { select: None, ..cfg };
            let r = run_experiment(&cfg, &out)?;
            Ok(summary(&r.evaluation.pooled, &out))
        }
        Command::SelectFeatures => {
            let mut cfg = cfg;
            if cfg.select.is_none() {
                cfg.select = Some(SelectConfig::default());
                cfg = cfg.resolved();
            }
            let r = run_experiment(&cfg, &out)?;
            let picked = r.selection.as_ref().map_or(0, |s| s.steps.len());
            Ok(format!("selected {picked} features; {}", summary(&r.evaluation.pooled, &out)))
        }
        Command::Report { report } => {
            let path = report.clone().unwrap_or_else(|| out.join(REPORT_JSON));
            let r = rocktype::experiment::load_report(&path)?;
            Ok(render_report(&r))
        }
    }
}

fn summary(m: &rocktype::eval::Metrics, out: &Path) -> String {
    let f = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
    format!(
        "ROC AUC {} PR AUC {} Accuracy L {} (majority {}); outputs in {}",
        f(m.roc_auc),
        f(m.pr_auc),
        f(m.accuracy_l),
        f(m.accuracy_l_majority),
        out.display()
    )
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Config => 2,
        ErrorKind::Data => 3,
        ErrorKind::Training => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(line) => {
            println!("{}", line.trim_end());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
