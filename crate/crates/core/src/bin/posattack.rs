//! Command-line front end for the attack pipeline. Each subcommand runs one
//! stage against the artifact directory; flags override config-file values.

use clap::{Parser, Subcommand};
use posattack::pipeline::run::{
    preflight, stage_phase1, stage_phase2, stage_phase3, stage_random_study, stage_report,
    stage_sweep, stage_train, write_manifest, PipelineError, StageOutput,
};
use posattack::pipeline::RunConfig;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "posattack", about = "POS-targeted adversarial attacks on a CNN sentiment classifier", version)]
struct Cli {
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Dataset name override.
    #[arg(long, global = true)]
    dataset: Option<String>,

    /// POS target set override, e.g. VERB_ADJ_NOUN.
    #[arg(long, global = true)]
    pos: Option<String>,

    /// Deletion ratio override (percent).
    #[arg(long, global = true)]
    ratio: Option<u32>,

    /// Artifact directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest data and train the victim classifier.
    Train,
    /// Run the any-POS random-deletion study.
    RandomStudy,
    /// Build the labeled adversarial dataset.
    Phase1,
    /// Train the two-branch adversarial net.
    Phase2,
    /// Generate, rank and evaluate adversarial examples.
    Phase3,
    /// Run all POS-set x ratio attack cells.
    Sweep,
    /// Emit the combined accuracy report.
    Report,
}

fn build_config(cli: &Cli) -> Result<RunConfig, PipelineError> {
    let named = |stage: &str, message: String| PipelineError {
        stage: stage.to_string(),
        message,
    };
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path)
            .map_err(|e| named("config", e.to_string()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(dataset) = &cli.dataset {
        cfg.dataset = dataset.clone();
    }
    if let Some(pos) = &cli.pos {
        cfg.set("pos", pos)
            .map_err(|e| named("config", e.to_string()))?;
    }
    if let Some(ratio) = cli.ratio {
        cfg.ratio = ratio;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<StageOutput, PipelineError> {
    let cfg = build_config(cli)?;
    preflight(&cfg)?;
    let output = match cli.command {
        Command::Train => stage_train(&cfg)?,
        Command::RandomStudy => stage_random_study(&cfg)?,
        Command::Phase1 => stage_phase1(&cfg)?,
        Command::Phase2 => stage_phase2(&cfg)?,
        Command::Phase3 => stage_phase3(&cfg)?,
        Command::Sweep => stage_sweep(&cfg)?,
        Command::Report => stage_report(&cfg)?,
    };
    write_manifest(&cfg, &output)?;
    Ok(output)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(output) => {
            for name in &output.written {
                println!("wrote {name}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
