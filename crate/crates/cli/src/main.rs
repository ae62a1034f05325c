use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use scimobility::kv::KvFile;
use scimobility::pipeline::bench::{read_truth, score_bundle, write_benchmark};
use scimobility::pipeline::{run_pipeline, run_stage, OutputLock, PipelineConfig, PipelineError, StageError};
use scimobility::synth::{GeneratorConfig, SynthError};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "scimobility", version, about = "Researcher mobility from bibliometric records")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline config (flat key=value file).
    #[arg(long)]
    config: PathBuf,
    /// Overrides output.dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage and publish the report bundle.
    Run(StageArgs),
    /// Validate input records into the working directory.
    Ingest(StageArgs),
    /// Fill missing affiliation countries.
    Impute {
        #[command(flatten)]
        stage: StageArgs,
        /// Pretrained classifier; trained on the labeled records otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Minimum confidence for an imputation.
        #[arg(long)]
        floor: Option<f64>,
    },
    /// Split suspicious author profiles into revised ids.
    Disambiguate(StageArgs),
    /// Assign genders from first names.
    Gender(StageArgs),
    /// Migration events and mobility categories.
    Mobility(StageArgs),
    /// Topic model and discipline labels.
    Disciplines(StageArgs),
    /// Departure/return rates, country flows, collaboration scatter.
    Rates(StageArgs),
    /// Pyramid, female share, summary and manifest.
    Report(StageArgs),
    /// Generate a synthetic population with ground truth.
    Synth {
        /// Generator config; defaults apply for missing keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a finished run against synthetic ground truth.
    Score {
        #[arg(long)]
        truth: PathBuf,
        /// Output directory of the run.
        #[arg(long)]
        bundle: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let error = e.into();
        let code = exit_code(&error);
        Failure { code, error }
    }
}

fn exit_code(error: &anyhow::Error) -> u8 {
    if let Some(e) = error.downcast_ref::<PipelineError>() {
        return match e {
            PipelineError::Config(_) | PipelineError::Kv(_) | PipelineError::Locked(_) | PipelineError::OutputExists(_) => USAGE,
            PipelineError::Stage { .. } => DATA,
            PipelineError::Output { .. } => INTERNAL,
        };
    }
    if let Some(e) = error.downcast_ref::<SynthError>() {
        return match e {
            SynthError::Config(_) | SynthError::Kv(_) => USAGE,
            _ => DATA,
        };
    }
    if error.downcast_ref::<StageError>().is_some() {
        return DATA;
    }
    INTERNAL
}

fn load_config(args: &StageArgs) -> Result<PipelineConfig, Failure> {
    let mut cfg = PipelineConfig::from_file(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn stage(name: &'static str, cfg: &PipelineConfig) -> Result<(), Failure> {
    let dir = &cfg.output_dir;
    let _lock = OutputLock::acquire(dir)?;
    fs::create_dir_all(dir)
        .map_err(|source| PipelineError::Output {
            path: dir.clone(),
            source,
        })?;
    run_stage(name, cfg, dir)?;
    eprintln!("{name}: done ({})", dir.display());
    Ok(())
}

fn synth(config: Option<&Path>, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut kv = match config {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            KvFile::parse(&text).map_err(SynthError::from)?
        }
        None => KvFile::default(),
    };
    if let Some(seed) = seed {
        let mut pairs: Vec<(String, String)> = kv
            .iter()
            .filter(|(k, _)| *k != "seed" && *k != "synth.seed")
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        pairs.push(("seed".into(), seed.to_string()));
        kv = KvFile::from_pairs(pairs);
    }
    let gen = GeneratorConfig::from_kv(&kv)?;
    let config_path = write_benchmark(out, &gen)?;
    eprintln!("synth: wrote {}", config_path.display());
    Ok(())
}

fn score(truth: &Path, bundle: &Path, out: Option<&Path>) -> Result<(), Failure> {
    let truth = read_truth(truth)?;
    let report = score_bundle(bundle, &truth)?;
    let json = serde_json::to_string_pretty(&report).context("serializing score")?;
    match out {
        Some(path) => fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load_config(&args)?;
            let out = run_pipeline(&cfg)?;
            eprintln!("report bundle written to {}", out.display());
            Ok(())
        }
        Command::Ingest(args) => stage("ingest", &load_config(&args)?),
        Command::Impute { stage: args, model, floor } => {
            let mut cfg = load_config(&args)?;
            if model.is_some() {
                cfg.imputer.model = model;
            }
            if let Some(f) = floor {
                cfg.imputer.confidence_floor = f;
            }
            cfg.validate()?;
            stage("impute", &cfg)
        }
        Command::Disambiguate(args) => stage("disambiguate", &load_config(&args)?),
        Command::Gender(args) => stage("gender", &load_config(&args)?),
        Command::Mobility(args) => stage("mobility", &load_config(&args)?),
        Command::Disciplines(args) => stage("disciplines", &load_config(&args)?),
        Command::Rates(args) => stage("rates", &load_config(&args)?),
        Command::Report(args) => stage("report", &load_config(&args)?),
        Command::Synth { config, seed, out } => synth(config.as_deref(), seed, &out),
        Command::Score { truth, bundle, out } => score(&truth, &bundle, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(failure)) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
        Err(_) => ExitCode::from(INTERNAL),
    }
}
