//! `reltrack` command-line interface.

mod commands;
mod io;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "reltrack", version, about = "Relation-based multi-object tracking toolkit")]
struct Cli {
    /// Print failures as a JSON object on stderr.
    #[arg(long, global = true)]
    json_errors: bool,
    #[command(subcommand)]
    command: Command,
}

/// Configuration shared by commands that run the tracker or trainer.
#[derive(Debug, Args, Clone, Default)]
pub struct ConfigArgs {
    /// Flat key=value configuration file.
    #[arg(long)]
    pub config: Option<std::path::PathBuf>,
    /// Override one configuration key (repeatable), e.g. `--set radius=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Track detections through a sequence and write MOTChallenge results.
    Track(commands::TrackArgs),
    /// Train the scoring head on ground-truth sequences.
    Train(commands::TrainArgs),
    /// Score tracking results against ground truth.
    Eval(commands::EvalArgs),
    /// Measure scenario attributes per dataset and normalize them.
    Profile(commands::ProfileArgs),
    /// Generate a synthetic sequence.
    Synth(commands::SynthArgs),
    /// Check analytic head gradients against finite differences.
    Gradcheck(commands::GradcheckArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Track(a) => commands::track(a),
        Command::Train(a) => commands::train(a),
        Command::Eval(a) => commands::eval(a),
        Command::Profile(a) => commands::profile(a),
        Command::Synth(a) => commands::synth(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            if cli.json_errors {
                let body = serde_json::json!({
                    "error": {
                        "kind": io::error_kind(&err),
                        "message": format!("{err:#}"),
                    }
                });
                eprintln!("{body}");
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::FAILURE
        }
    }
}
