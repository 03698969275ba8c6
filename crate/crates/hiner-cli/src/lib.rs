//! The `hiner` command line: argument parsing, configuration layering and
//! the subcommands.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::Report;
use crate::config::{parse_override, RunConfig};
use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "hiner", version, about = "Neural compression of hyperspectral cubes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Generate the seeded synthetic scene and its labels.
    Synth,
    /// Rewrite a cube in another on-disk format.
    Convert,
    /// Fit a model to a cube and write the quantized stream.
    Encode,
    /// Rebuild a cube from a stream.
    Decode,
    /// PSNR (and rate, for streams) against a reference cube.
    Eval,
    /// Train the ablation variants and print a CSV row for each.
    Ablate,
    /// Train classifiers on a decoded stream and report accuracy.
    Classify,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Report destination; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Override any configuration key, e.g. `--set model.strides=[2,2]`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    #[arg(long, global = true)]
    pub stream: Option<PathBuf>,
    #[arg(long, global = true)]
    pub reference: Option<PathBuf>,
    #[arg(long, global = true)]
    pub cube_out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub labels_out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub stream_out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub checkpoint_out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    #[arg(long, global = true)]
    pub bitwidth: Option<u8>,
}

impl CommonArgs {
    /// `--set` values first, then the dedicated flags.
    pub fn overrides(&self) -> Result<Vec<(String, toml::Value)>, CliError> {
        let mut out: Vec<(String, toml::Value)> =
            self.overrides.iter().map(|s| parse_override(s)).collect::<Result<_, _>>()?;
        let path = |p: &PathBuf| toml::Value::String(p.to_string_lossy().into_owned());
        let paths = [
            ("io.input", &self.input),
            ("io.labels", &self.labels),
            ("io.stream", &self.stream),
            ("io.reference", &self.reference),
            ("io.cube_out", &self.cube_out),
            ("io.labels_out", &self.labels_out),
            ("io.stream_out", &self.stream_out),
            ("io.checkpoint_out", &self.checkpoint_out),
        ];
        for (key, value) in paths {
            if let Some(p) = value {
                out.push((key.into(), path(p)));
            }
        }
        let int = |v: u64| toml::Value::Integer(v as i64);
        if let Some(s) = self.seed {
            out.push(("seed".into(), int(s)));
        }
        if let Some(e) = self.epochs {
            out.push(("train.epochs".into(), int(e as u64)));
        }
        if let Some(b) = self.budget {
            out.push(("model.budget_bytes".into(), int(b as u64)));
        }
        if let Some(b) = self.bitwidth {
            out.push(("model.bitwidth".into(), int(b as u64)));
        }
        Ok(out)
    }
}

pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    RunConfig::load(common.config.as_deref(), &common.overrides()?)
}

pub fn run_command(command: Command, cfg: &RunConfig) -> Result<Report, CliError> {
    match command {
        Command::Synth => commands::cmd_synth(cfg),
        Command::Convert => commands::cmd_convert(cfg),
        Command::Encode => commands::cmd_encode(cfg),
        Command::Decode => commands::cmd_decode(cfg),
        Command::Eval => commands::cmd_eval(cfg),
        Command::Ablate => commands::cmd_ablate(cfg),
        Command::Classify => commands::cmd_classify(cfg),
    }
}

/// Resolves the configuration, runs the command and writes its report.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = resolve_config(&cli.common)?;
    let text = run_command(cli.command, &cfg)?.render();
    match &cli.common.out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
