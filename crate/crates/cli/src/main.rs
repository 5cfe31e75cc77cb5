//! `dirnet`: generate data, train, evaluate and run ablations from a `key = value` config.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 an ablation ordering check
//! failed. Failures print one line `error kind=<config|runtime|check> message="..."` on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dir_core::experiment::{self, ExperimentConfig, ReportFiles};
use dir_core::metrics::{sig6, EvalReport};

#[derive(Parser)]
#[command(name = "dirnet", version, about = "Decoupled IoU regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (`key = value` lines).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output root; overrides `output.dir`. Files go to `<out>/<config hash>/`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides `world.seed` and `model.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Print nothing on success.
    #[arg(long)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Write the training dataset.
    GenData(Common),
    /// Train a regressor and write its checkpoint.
    Train(Common),
    /// Evaluate a checkpoint on the held-out split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "PATH")]
        checkpoint: PathBuf,
    },
    /// Train every ablation model and write the consolidated report.
    Ablate(Common),
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
    Check(String),
}

impl Failure {
    fn from_error(e: anyhow::Error) -> Self {
        let config = e
            .chain()
            .find_map(|c| c.downcast_ref::<dir_core::Error>())
            .is_some_and(dir_core::Error::is_config);
        let msg = format!("{e:#}");
        if config {
            Failure::Config(msg)
        } else {
            Failure::Runtime(msg)
        }
    }

    fn report(&self) -> ExitCode {
        let (kind, code, msg) = match self {
            Failure::Config(m) => ("config", 2, m),
            Failure::Runtime(m) => ("runtime", 3, m),
            Failure::Check(m) => ("check", 4, m),
        };
        eprintln!("error kind={kind} message={msg:?}");
        ExitCode::from(code)
    }
}

fn load(common: &Common) -> std::result::Result<ExperimentConfig, Failure> {
    let mut cfg = ExperimentConfig::load(&common.config).map_err(|e| Failure::Config(e.to_string()))?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.override_seed(seed);
        cfg.validate().map_err(|e| Failure::Config(e.to_string()))?;
    }
    Ok(cfg)
}

fn say(quiet: bool, line: impl AsRef<str>) {
    if !quiet {
        println!("{}", line.as_ref());
    }
}

fn print_files(quiet: bool, files: &ReportFiles) {
    for p in [
        &files.json,
        &files.rows_csv,
        &files.correlations_csv,
        &files.histograms_csv,
        &files.checks_csv,
    ] {
        say(quiet, format!("wrote {}", p.display()));
    }
}

fn print_report(quiet: bool, report: &EvalReport) {
    for r in &report.rows {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), sig6);
        say(
            quiet,
            format!(
                "{:<8} {:<34} ap {:<9} ap50 {:<9} ap75 {:<9}{}",
                r.table,
                r.label,
                cell(r.ap),
                cell(r.ap50),
                cell(r.ap75),
                if r.is_ok() { "" } else { " FAILED" }
            ),
        );
    }
    for c in &report.correlations {
        say(quiet, format!("pearson {:<22} {} (n = {})", c.label, sig6(c.pearson), c.samples));
    }
}

fn run(cli: Cli) -> std::result::Result<(), Failure> {
    match cli.command {
        Command::GenData(common) => {
            let cfg = load(&common)?;
            let path = cfg.run_dir().join(cfg.file_name("dataset", "tsv"));
            let summary = experiment::gen_data(&cfg, &path)
                .with_context(|| format!("writing {}", path.display()))
                .map_err(Failure::from_error)?;
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
            say(
                common.quiet,
                format!("records={} hash={} path={}", summary.records, summary.hash, summary.path.display()),
            );
        }
        Command::Train(common) => {
            let cfg = load(&common)?;
            let out = experiment::train(&cfg, &cfg.run_dir()).map_err(|e| Failure::from_error(e.into()))?;
            if let Some(last) = out.report.epochs.last() {
                say(
                    common.quiet,
                    format!("epochs={} final_loss={} samples={}", out.report.epochs.len(), sig6(last.losses.total), last.samples),
                );
            }
            say(common.quiet, format!("wrote {}", out.checkpoint.display()));
            say(common.quiet, format!("wrote {}", out.report_path.display()));
        }
        Command::Evaluate { common, checkpoint } => {
            let cfg = load(&common)?;
            let out = evaluate(&cfg, &checkpoint).map_err(Failure::from_error)?;
            print_report(common.quiet, &out.report);
            print_files(common.quiet, &out.files);
        }
        Command::Ablate(common) => {
            let cfg = load(&common)?;
            let out = experiment::ablate(&cfg, Some(&cfg.run_dir())).map_err(|e| Failure::from_error(e.into()))?;
            print_report(common.quiet, &out.report);
            for c in &out.report.checks {
                say(
                    common.quiet,
                    format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail),
                );
            }
            if let Some(files) = &out.files {
                print_files(common.quiet, files);
            }
            if out.has_failures() {
                let failed: Vec<_> = out
                    .report
                    .rows
                    .iter()
                    .filter(|r| !r.is_ok())
                    .map(|r| format!("{}/{}", r.table, r.label))
                    .collect();
                return Err(Failure::Runtime(format!("sub-runs failed: {}", failed.join(", "))));
            }
            if !out.checks_pass() {
                let failed: Vec<_> = out.report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                return Err(Failure::Check(format!("checks failed: {}", failed.join(", "))));
            }
        }
    }
    Ok(())
}

fn evaluate(cfg: &ExperimentConfig, checkpoint: &Path) -> Result<experiment::EvaluateOutcome> {
    Ok(experiment::evaluate(cfg, checkpoint, &cfg.run_dir())?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}
