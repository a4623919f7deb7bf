use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use megcn::harness::{
    export_embeddings, run_baseline, run_pipeline, run_repeats, run_sweep, run_until, sweep_table, ExperimentConfig, ExportLayer, Stage,
    SweepGrid,
};
use megcn::model::Pooling;

#[derive(Parser)]
#[command(name = "megcn", version, about = "Multi-dimensional edge graph convolution for text classification")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Experiment configuration (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset directory (docs.txt + labels.txt) or label<TAB>text file.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory for artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for repeated runs and sweeps.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Preset name, `auto` or `none`.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Tokenize, build the vocabulary and draw the splits.
    Prepare,
    /// Train word and document embeddings.
    Embed,
    /// Build the multi-dimensional edge graph.
    Graph,
    /// Train the graph model.
    Train,
    /// Score the trained model; with --repeats, run several seeds.
    Evaluate {
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// TF-IDF + logistic regression on the same splits.
    Baseline,
    /// Grid search over streams, overlap threshold and pooling.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        streams: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        thresholds: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',', value_parser = parse_pooling)]
        pooling: Option<Vec<Pooling>>,
        #[arg(long)]
        repeats: Option<usize>,
    },
    /// Write per-document vectors from a trained run.
    Export {
        #[arg(long, default_value = "hidden", value_parser = parse_layer)]
        layer: ExportLayer,
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Graph statistics (builds the graph if needed).
    Stats,
    /// Print the default configuration, or write it to a file.
    Config {
        #[arg(long)]
        write: Option<PathBuf>,
    },
}

fn parse_pooling(s: &str) -> Result<Pooling, String> {
    match s {
        "max" => Ok(Pooling::Max),
        "avg" => Ok(Pooling::Avg),
        "min" => Ok(Pooling::Min),
        _ => Err(format!("unknown pooling {s:?} (max, avg, min)")),
    }
}

fn parse_layer(s: &str) -> Result<ExportLayer, String> {
    s.parse().map_err(|e: megcn::harness::HarnessError| e.to_string())
}

fn load_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = &g.dataset {
        cfg.corpus.dataset = Some(d.clone());
    }
    if let Some(s) = g.seed {
        cfg.run.seed = s;
    }
    if let Some(o) = &g.out {
        cfg.run.out = o.clone();
    }
    if let Some(t) = g.threads {
        cfg.run.threads = t;
    }
    if let Some(p) = &g.preset {
        cfg.run.preset = p.clone();
    }
    Ok(cfg)
}

fn stage(cfg: &ExperimentConfig, until: Stage) -> Result<()> {
    let summary = run_until(cfg, until)?;
    print!("{}", summary.text);
    Ok(())
}

fn write_default_config(path: &Path) -> Result<()> {
    if path.exists() {
        bail!("{} already exists", path.display());
    }
    std::fs::write(path, ExperimentConfig::default_toml()).with_context(|| format!("writing {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Command::Config { write } = &cli.command {
        match write {
            Some(p) => write_default_config(p)?,
            None => print!("{}", ExperimentConfig::default_toml()),
        }
        return Ok(());
    }
    let mut cfg = load_config(&cli.global)?;
    match cli.command {
        Command::Prepare => stage(&cfg, Stage::Prepare)?,
        Command::Embed => stage(&cfg, Stage::Embed)?,
        Command::Graph | Command::Stats => stage(&cfg, Stage::Graph)?,
        Command::Train => stage(&cfg, Stage::Train)?,
        Command::Evaluate { repeats: None } => print!("{}", run_pipeline(&cfg)?),
        Command::Evaluate { repeats: Some(n) } => {
            cfg.run.repeats = n;
            let s = run_repeats(&cfg)?;
            for r in &s.reports {
                println!("seed {:>4}  test accuracy {:.4}", r.seed, r.test_accuracy);
            }
            println!(
                "mean {:.4} ± {:.4}, best {:.4} over {} seeds",
                s.mean_test_accuracy,
                s.std_test_accuracy,
                s.best_test_accuracy,
                s.seeds.len()
            );
        }
        Command::Baseline => print!("{}", run_baseline(&cfg)?),
        Command::Sweep { streams, thresholds, pooling, repeats } => {
            let d = SweepGrid::default();
            let grid = SweepGrid {
                streams: streams.unwrap_or(d.streams),
                thresholds: thresholds.unwrap_or(d.thresholds),
                pooling: pooling.unwrap_or(d.pooling),
            };
            if let Some(n) = repeats {
                cfg.run.repeats = n;
            }
            print!("{}", sweep_table(&run_sweep(&cfg, &grid)?));
        }
        Command::Export { layer, output } => {
            let rows = export_embeddings(&cfg.run.out, layer, &output)?;
            println!("wrote {rows} rows to {}", output.display());
        }
        Command::Config { .. } => unreachable!("handled above"),
    }
    Ok(())
}
