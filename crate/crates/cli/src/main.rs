mod evaluate;
mod fuse;
mod summarize;
mod synth;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "fusemap", version, about = "Instance-aware semantic mapping from RGB-D sequences")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fuse a sequence into an instance map and export it.
    Fuse(fuse::Args),
    /// Build a statistical likelihood matrix from an annotated detection log.
    SummarizeLikelihood(summarize::Args),
    /// Score an exported map against labeled ground-truth points.
    Evaluate(evaluate::Args),
    /// Generate a synthetic sequence with detections and ground truth.
    Synth(synth::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    let result = match cli.command {
        Command::Fuse(a) => fuse::run(a),
        Command::SummarizeLikelihood(a) => summarize::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Synth(a) => synth::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if !msg.contains(&text) {
            if !msg.is_empty() {
                msg.push_str(": ");
            }
            msg.push_str(&text);
        }
    }
    msg.replace('\n', " ")
}
