use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use dseno_cli::ablate::cmd_ablate;
use dseno_cli::commands::parse_split;
use dseno_cli::config::read_doc;
use dseno_cli::export::FieldFormat;
use dseno_cli::inspect::inspect;
use dseno_cli::{cmd_evaluate, cmd_export, cmd_train, exit_code, Overrides};
use dseno_core::train::EpochRecord;

#[derive(Parser)]
#[command(name = "dseno", version, about = "Train and inspect D-SENO and FNO+ neural operators")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model described by a run configuration.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Zero evaluates the untrained model.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
        /// Continue from `<out>/checkpoints/last` when it exists.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        quiet: bool,
    },
    /// Relative L2 error of a checkpoint.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Run configuration; defaults to the one stored with the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Count parameters of, or train, every cell of an ablation matrix.
    Ablate {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        dry_run: bool,
        /// CSV destination; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write truth, prediction and error fields of one sample.
    Export {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        sample: usize,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "export")]
        out: PathBuf,
    },
    /// Parameter count, receptive field and dilation schedule of a model.
    Inspect {
        #[arg(long)]
        config: PathBuf,
    },
}

fn progress(quiet: bool) -> impl FnMut(&EpochRecord) + Send {
    move |r: &EpochRecord| {
        if !quiet {
            eprintln!(
                "epoch {:>4}  lr {:.3e}  train {:.5}  test {:.5}  {:.1}s",
                r.epoch + 1,
                r.lr,
                r.train_rel_l2,
                r.test_rel_l2,
                r.wall_seconds
            );
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            epochs,
            threads,
            resume,
            quiet,
        } => {
            let overrides = Overrides {
                seed,
                epochs,
                out,
                threads,
            };
            let summary = cmd_train(&config, &overrides, resume, &mut progress(quiet))?;
            write!(stdout, "{}", summary.render())?;
        }
        Command::Evaluate { checkpoint, config, split } => {
            let split = parse_split(&split)?;
            let err = cmd_evaluate(&checkpoint, config.as_deref(), split)?;
            writeln!(stdout, "rel_l2: {err:.6e}")?;
        }
        Command::Ablate { matrix, dry_run, out } => {
            let table = cmd_ablate(&matrix, dry_run, &mut progress(false))?;
            match out {
                Some(path) => std::fs::write(&path, table).with_context(|| format!("writing {}", path.display()))?,
                None => write!(stdout, "{table}")?,
            }
        }
        Command::Export {
            checkpoint,
            sample,
            format,
            split,
            config,
            out,
        } => {
            let format = FieldFormat::parse(&format)
                .ok_or_else(|| dseno_core::Error::Config(format!("unknown format `{format}` (expected csv or pgm)")))?;
            let split = parse_split(&split)?;
            for path in cmd_export(&checkpoint, config.as_deref(), split, sample, format, &out)? {
                writeln!(stdout, "{}", path.display())?;
            }
        }
        Command::Inspect { config } => {
            write!(stdout, "{}", inspect(&read_doc(&config)?)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<dseno_core::Error>().map_or(2, |e| exit_code(e.kind()));
            ExitCode::from(code)
        }
    }
}
