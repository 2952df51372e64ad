use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sargdv::pipeline::{eval_masks, write_synthetic, Pipeline, RunConfig};
use sargdv::synth::SynthSpec;
use sargdv::{Error, Result};

/// Groundwater-dependent vegetation mapping from SAR data cubes.
#[derive(Debug, Parser)]
#[command(name = "sargdv", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    /// Worker thread cap; 1 runs every stage serially.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the sampling and training seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (for `synth`, the dataset directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate the input cubes and report shape and nodata.
    Ingest,
    /// Rasterize GDV polygons into the label mask.
    Rasterize,
    /// Split the grid into training and validation columns.
    Split,
    /// Draw the class-balanced training sample.
    Sample,
    /// Train the boosted trees and the logistic baseline.
    Train,
    /// Predict probabilities over the grid and threshold them.
    Predict,
    /// Smooth the thresholded prediction with the CRF.
    Smooth,
    /// Score predictions; with --pred and --truth, score an arbitrary mask pair.
    Eval {
        #[arg(long, requires = "truth")]
        pred: Option<PathBuf>,
        #[arg(long, requires = "pred")]
        truth: Option<PathBuf>,
    },
    /// Write ROC and precision-recall curves.
    Curves,
    /// Interpolate borehole depth to water.
    Idw {
        /// Drop observations before this date (YYYY-MM-DD); overrides the config.
        #[arg(long)]
        cutoff: Option<chrono::NaiveDate>,
    },
    /// Generate a synthetic dataset and matching config.
    Synth {
        /// JSON synthetic spec; defaults are used when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Run every stage from rasterize to curves, then idw.
    RunAll,
}

fn synth(spec_path: Option<PathBuf>, seed: Option<u64>, out: Option<PathBuf>) -> Result<()> {
    let mut spec = match spec_path {
        Some(p) => {
            let text = std::fs::read_to_string(&p).map_err(|e| Error::Io { path: p.clone(), source: e })?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("synth spec {}: {e}", p.display())))?
        }
        None => SynthSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let dir = out.unwrap_or_else(|| PathBuf::from("synthetic"));
    let config = write_synthetic(&spec, &dir)?;
    println!("{}", config.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    if let Command::Synth { spec } = cli.command {
        return synth(spec, cli.seed, cli.out);
    }
    if let Command::Eval {
        pred: Some(pred),
        truth: Some(truth),
    } = &cli.command
    {
        let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("."));
        let cm = eval_masks(pred, truth, &out)?;
        log::info!("eval: {cm:?}");
        return Ok(());
    }
    let mut config = RunConfig::load(&cli.config)?;
    if let Command::Idw { cutoff: Some(d) } = cli.command {
        config.idw.cutoff_date = d;
    }
    let p = Pipeline::new(config, cli.out, cli.seed)?;
    match cli.command {
        Command::Ingest => p.ingest(),
        Command::Rasterize => p.rasterize(),
        Command::Split => p.split(),
        Command::Sample => p.sample(),
        Command::Train => p.train(),
        Command::Predict => p.predict(),
        Command::Smooth => p.smooth(),
        Command::Eval { .. } => p.eval(),
        Command::Curves => p.curves(),
        Command::Idw { .. } => p.idw(),
        Command::RunAll => p.run_all(),
        Command::Synth { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SARGDV_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
