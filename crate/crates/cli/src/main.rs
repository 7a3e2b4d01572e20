use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sinet_bench::commands::{self, Outcome};
use sinet_bench::{CliError, Result, RunConfig};

/// Concealed-object detection benchmark harness.
#[derive(Parser, Debug)]
#[command(name = "sinet-bench", version)]
struct Cli {
    /// Worker threads; falls back to SINET_THREADS, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set decoder=pd`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Output format for the printed table: json, csv or markdown.
    #[arg(long, global = true)]
    format: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Predict probability maps for an image or a directory of images.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Square network resolution.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train on seeded synthetic blobs and report convergence.
    TrainToy {
        #[arg(long)]
        out: PathBuf,
        /// Also save the trained weights here.
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Score a prediction directory against a dataset.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        /// Dataset directory or CSV/JSON manifest.
        #[arg(long)]
        dataset: PathBuf,
        /// Row label in the printed table.
        #[arg(long, default_value = "model")]
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip masks that have no prediction.
        #[arg(long)]
        skip_missing: bool,
    },
    /// Dataset statistics, attribute counts and the object-centre heatmap.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train every ablation variant on the synthetic blobs.
    Ablate {
        #[arg(long)]
        out: PathBuf,
        /// `key = a | b` lines expanded to their cartesian product.
        #[arg(long)]
        grid: Option<PathBuf>,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Generalization drops from a train-by-test score matrix.
    Crossdata {
        /// JSON `{"datasets": [...], "scores": [[...]]}` or a labelled CSV.
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long, default_value = "S_alpha")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a saved JSON report as a table.
    Render {
        #[arg(long)]
        report: PathBuf,
    },
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for pair in &cli.overrides {
        cfg.apply_override(pair)?;
    }
    if let Some(f) = &cli.format {
        cfg.format = f.parse()?;
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    match &cli.command {
        Command::Infer { size: Some(s), .. } => cfg.input_size = *s,
        Command::TrainToy { steps, seed, .. } => {
            if let Some(s) = steps {
                cfg.steps = *s;
            }
            if let Some(s) = seed {
                cfg.train.seed = *s;
            }
        }
        Command::Eval { skip_missing: true, .. } => cfg.skip_missing = true,
        Command::Ablate { steps: Some(s), .. } => cfg.steps = *s,
        _ => {}
    }
    if cfg.threads.is_none() {
        if let Ok(v) = std::env::var("SINET_THREADS") {
            cfg.set("threads", &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<Outcome> {
    let cfg = build_config(&cli)?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Infer { weights, input, out, .. } => commands::infer(&cfg, weights, input, out),
        Command::TrainToy { out, weights, .. } => commands::train_toy(&cfg, out, weights.as_deref()),
        Command::Eval {
            predictions,
            dataset,
            name,
            out,
            ..
        } => commands::eval(&cfg, predictions, dataset, name, out.as_deref()),
        Command::Stats { dataset, out } => commands::stats(&cfg, dataset, out),
        Command::Ablate { out, grid, .. } => commands::ablate(&cfg, grid.as_deref(), out),
        Command::Crossdata { matrix, metric, out } => commands::crossdata(&cfg, matrix, metric, out.as_deref()),
        Command::Render { report } => commands::render(report, cfg.format),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", outcome.stdout);
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
