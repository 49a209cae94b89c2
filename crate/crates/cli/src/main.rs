use std::path::PathBuf;
use std::process::ExitCode as ProcessExit;

use clap::{Args, Parser, Subcommand};

use mumkit_cli::{execute, Command, ExitCode, Flags, Overrides, TaskSel};

#[derive(Parser)]
#[command(name = "mumkit", version, about = "Modulation experiments: build, run, fit, report, replay")]
struct Cli {
    #[arg(long, global = true, default_value = "mumkit.toml")]
    config: PathBuf,
    /// Override the modulation seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the threshold level used for IMUM estimates.
    #[arg(long, global = true)]
    tau: Option<f64>,
    /// Override the output directory (relative to the working directory).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Refuse remote evaluators.
    #[arg(long, global = true)]
    offline: bool,
    /// Accept artifacts produced under a different manifest.
    #[arg(long, global = true)]
    force: bool,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args, Clone, Default)]
struct Selection {
    /// Restrict to these evaluator ids (repeatable).
    #[arg(long = "evaluator")]
    evaluators: Vec<String>,
    /// detect, understand or both.
    #[arg(long, default_value = "both")]
    task: TaskSel,
}

#[derive(Subcommand)]
enum Cmd {
    /// Validate and rank the corpus, then build the modulated dataset.
    Build,
    /// Query evaluators on the dataset.
    Run(Selection),
    /// Fit curves and compute thresholds.
    Fit(Selection),
    /// Render tables, figures and the Markdown report.
    Report(Selection),
    /// Re-run from the response cache and compare with stored results.
    Replay(Selection),
}

fn main() -> ProcessExit {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ProcessExit::from(if e.use_stderr() { ExitCode::Usage as u8 } else { 0 });
        }
    };
    let (command, sel) = match cli.command {
        Cmd::Build => (Command::Build, Selection::default()),
        Cmd::Run(s) => (Command::Run, s),
        Cmd::Fit(s) => (Command::Fit, s),
        Cmd::Report(s) => (Command::Report, s),
        Cmd::Replay(s) => (Command::Replay, s),
    };
    let overrides = Overrides {
        seed: cli.seed,
        tau: cli.tau,
        out: cli.out,
    };
    let flags = Flags {
        evaluators: sel.evaluators,
        task: sel.task,
        offline: cli.offline,
        force: cli.force,
    };
    match execute(&cli.config, &overrides, flags, command) {
        Ok(summary) => {
            for l in &summary.lines {
                println!("{l}");
            }
            if summary.failed.is_empty() {
                ProcessExit::from(ExitCode::Ok as u8)
            } else {
                eprintln!("error: evaluator(s) failed: {}", summary.failed.join(", "));
                ProcessExit::from(ExitCode::Partial as u8)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ProcessExit::from(e.code as u8)
        }
    }
}
