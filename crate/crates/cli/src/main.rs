//! `polarlattice` command-line driver.

mod commands;
mod config;
mod error;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::ConfigDoc;
use crate::error::CliError;
use crate::output::{write_manifest, OutDir, RunManifest, Timer};

#[derive(Debug, Parser)]
#[command(name = "polarlattice", version, about = "Collective modes and polariton spectra of 2D dipole lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; overrides `output.threads`.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Recompute into a scratch directory and require byte-identical files.
    #[arg(long, global = true)]
    seed_check: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Collective modes, amplitude maps and numeric dispersion.
    Modes,
    /// Polariton spectrum for one parameter point.
    Spectrum,
    /// One spectrum per point of the Cartesian product of the sweep axes.
    Sweep,
    /// Linewidth threshold above which direct interactions stay hidden.
    Criterion,
    /// Nearest-neighbor coupling of built-in and config materials.
    Material {
        /// Show only this material.
        name: Option<String>,
    },
    /// Built-in oracle and invariant suite.
    Validate {
        /// Break the symmetry of one coupling entry, `J,L` (0-based).
        #[arg(long, hide = true, value_parser = parse_pair)]
        inject_asymmetry: Option<(usize, usize)>,
    },
}

fn parse_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or("expected J,L")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

type Pipeline = fn(&ConfigDoc, &OutDir, &mut Timer) -> Result<serde_json::Value, CliError>;

fn run(cli: Cli) -> Result<(), CliError> {
    let doc = cli.config.as_deref().map(config::load).transpose()?;
    let threads = cli.threads.or(doc.as_ref().and_then(|d| d.config.output.threads));
    if threads == Some(0) {
        return Err(CliError::Config("--threads: must be at least 1".into()));
    }
    if let Some(t) = threads {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    polarlattice::set_parallelism(threads.unwrap_or(0));

    let require = || doc.as_ref().ok_or_else(|| CliError::Config("--config: required for this command".into()));
    let (name, pipeline): (&str, Pipeline) = match &cli.command {
        Command::Modes => ("modes", commands::cmd_modes),
        Command::Spectrum => ("spectrum", commands::cmd_spectrum),
        Command::Sweep => ("sweep", commands::cmd_sweep),
        Command::Criterion => return commands::cmd_criterion(require()?),
        Command::Material { name } => return commands::cmd_material(doc.as_ref(), name.as_deref()),
        Command::Validate { inject_asymmetry } => return commands::cmd_validate(*inject_asymmetry),
    };
    let doc = require()?;
    let root = cli.out.clone().or_else(|| doc.config.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    execute(name, pipeline, doc, &root)?;
    if cli.seed_check {
        seed_check(name, pipeline, doc, &root)?;
    }
    Ok(())
}

fn execute(name: &str, pipeline: Pipeline, doc: &ConfigDoc, root: &Path) -> Result<RunManifest, CliError> {
    let out = OutDir::create(root, &doc.sha256)?;
    let mut timer = Timer::start();
    let details = pipeline(doc, &out, &mut timer)?;
    let manifest = RunManifest {
        command: name.into(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config_path: doc.path.display().to_string(),
        config_sha256: doc.sha256.clone(),
        config: serde_json::to_value(&doc.config).map_err(|e| CliError::io(root, e.into()))?,
        wall_seconds: timer.total(),
        stages: timer.stages,
        details,
        files: Vec::new(),
    };
    write_manifest(&out, manifest)
}

fn seed_check(name: &str, pipeline: Pipeline, doc: &ConfigDoc, root: &Path) -> Result<(), CliError> {
    let scratch = tempfile::tempdir().map_err(|e| CliError::io(std::env::temp_dir(), e))?;
    let manifest = execute(name, pipeline, doc, scratch.path())?;
    let diff = commands::compare_trees(root, scratch.path())?;
    if diff.is_empty() {
        println!("seed check: {} files byte-identical on recomputation", manifest.files.len());
        Ok(())
    } else {
        Err(CliError::Validation(format!("seed check: recomputation changed {}", diff.join(", "))))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
