//! Command-line front end: validate, split, prompts, train, generate,
//! evaluate, diversity and moderate.

pub mod commands;
pub mod config;
pub mod error;

use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::ModerateInputs;
use crate::config::{ConfigMap, RunConfig, SplitSelector};
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "interp", version, about = "Grounded interpretation modeling toolkit")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides `out`.
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Overrides `dataset.path`.
    #[arg(long, global = true, value_name = "PATH")]
    pub dataset: Option<PathBuf>,
    /// Overrides any config key; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Raise log verbosity; repeatable.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the dataset and write validation.tsv.
    Validate,
    /// Write the title-stratified train/validation/test split.
    Split,
    /// Write prompt/target pairs for the configured strategy.
    Prompts {
        #[arg(long, default_value = "all")]
        split: String,
    },
    /// Train the configured backend and save a checkpoint.
    Train,
    /// Decode interpretations from a checkpoint.
    Generate {
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Decode (or read) interpretations and score them against the references.
    Evaluate {
        /// Score this generated.jsonl instead of decoding.
        #[arg(long, value_name = "PATH")]
        generated: Option<PathBuf>,
    },
    /// Correlate grounding distance with interpretation distance over annotated reader pairs.
    Diversity {
        #[arg(long, default_value = "all")]
        split: String,
    },
    /// Score interpretation clusters and run the toxicity flag analyses.
    Moderate {
        /// Cluster file (JSON lines of {id, source, sentence, interpretations, attributes?}).
        #[arg(long, value_name = "PATH")]
        clusters: Option<PathBuf>,
        /// Build model clusters from a generated.jsonl and the dataset.
        #[arg(long, value_name = "PATH")]
        generated: Option<PathBuf>,
        /// Human cluster file for overlap recall.
        #[arg(long, value_name = "PATH")]
        human: Option<PathBuf>,
        /// Build human clusters from the dataset for overlap recall.
        #[arg(long)]
        human_from_dataset: bool,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate => "validate",
            Command::Split => "split",
            Command::Prompts { .. } => "prompts",
            Command::Train => "train",
            Command::Generate { .. } => "generate",
            Command::Evaluate { .. } => "evaluate",
            Command::Diversity { .. } => "diversity",
            Command::Moderate { .. } => "moderate",
        }
    }
}

/// Config file, then `--set`, then the dedicated flags.
pub fn resolve_config(cli: &Cli) -> CliResult<(ConfigMap, RunConfig)> {
    let mut map = ConfigMap::load(cli.config.as_deref())?;
    for s in &cli.set {
        map.set_from_arg(s)?;
    }
    if let Some(seed) = cli.seed {
        map.set("seed", toml::Value::Integer(i64::try_from(seed).map_err(|_| CliError::domain("seed too large"))?))?;
    }
    if let Some(out) = &cli.out {
        map.set("out", toml::Value::String(out.display().to_string()))?;
    }
    if let Some(d) = &cli.dataset {
        map.set("dataset.path", toml::Value::String(d.display().to_string()))?;
    }
    let cfg = RunConfig::resolve(&map)?;
    Ok((map, cfg))
}

fn dispatch(cli: &Cli, cfg: &RunConfig) -> CliResult<String> {
    match &cli.command {
        Command::Validate => commands::cmd_validate(cfg),
        Command::Split => commands::cmd_split(cfg),
        Command::Prompts { split } => commands::cmd_prompts(cfg, SplitSelector::parse(split)?),
        Command::Train => commands::cmd_train(cfg),
        Command::Generate { split } => commands::cmd_generate(cfg, SplitSelector::parse(split)?),
        Command::Evaluate { generated } => commands::cmd_evaluate(cfg, generated.as_deref()),
        Command::Diversity { split } => commands::cmd_diversity(cfg, SplitSelector::parse(split)?),
        Command::Moderate { clusters, generated, human, human_from_dataset } => commands::cmd_moderate(
            cfg,
            &ModerateInputs {
                clusters: clusters.clone(),
                generated: generated.clone(),
                human: human.clone(),
                human_from_dataset: *human_from_dataset,
            },
        ),
    }
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> i32 {
    let (map, cfg) = match resolve_config(cli) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return e.code();
        }
    };
    let result = fs::create_dir_all(&cfg.out)
        .and_then(|_| fs::write(cfg.out.join("resolved_config.txt"), map.render()))
        .map_err(CliError::from)
        .and_then(|_| dispatch(cli, &cfg));
    let (code, message) = match result {
        Ok(msg) => {
            println!("{msg}");
            (0, msg)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (e.code(), e.to_string())
        }
    };
    if let Err(e) = commands::append_run_log(&cfg.out, cli.command.name(), code, &message) {
        log::warn!("could not append to run log: {e}");
    }
    code
}

/// Parses `args` (including the program name) and runs it.
pub fn run_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                error::ExitKind::Domain as i32
            } else {
                0
            }
        }
    }
}

