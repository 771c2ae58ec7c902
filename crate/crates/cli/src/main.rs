//! `pepalign`: ingest structures, build graphs, pretrain, evaluate.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data error,
//! 3 numeric failure (non-finite loss, failed gradient check). Every failure
//! ends with one JSON line on stderr.

mod args;
mod commands;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use pepalign_core::Error;
use serde_json::json;

use args::{Cli, Command};
use commands::Failure;

const VERSION: &str = env!("CARGO_PKG_VERSION");

const USAGE: u8 = 1;
const DATA: u8 = 2;
const NUMERIC: u8 = 3;

fn classify(e: &Error) -> (&'static str, u8) {
    match e {
        Error::Step { source, .. } => classify(source),
        Error::Numeric(_) => ("numeric", NUMERIC),
        Error::Config(_) => ("config", USAGE),
        Error::Parse { .. } => ("parse", DATA),
        Error::Shape { .. } => ("shape", DATA),
        Error::Data(_) => ("data", DATA),
        Error::Record { .. } => ("record", DATA),
        Error::Checkpoint(_) => ("checkpoint", DATA),
        Error::Io { .. } => ("io", DATA),
        Error::Json(_) => ("json", DATA),
    }
}

fn fail(kind: &str, code: u8, message: String) -> ExitCode {
    let line = json!({
        "error": kind,
        "exit_code": code,
        "message": message,
        "version": VERSION,
    });
    eprintln!("{line}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    println!("pepalign {VERSION}");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{}", e.render());
            let first = e.to_string().lines().next().unwrap_or("").to_string();
            return fail("usage", USAGE, first);
        }
    };
    let outcome = match &cli.command {
        Command::Ingest(a) => commands::ingest(a),
        Command::Bucket(a) => commands::bucket(a),
        Command::Graphs(a) => commands::graphs(a),
        Command::Pretrain(a) => commands::pretrain_cmd(a),
        Command::Eval(a) => commands::eval(a),
        Command::Embed(a) => commands::embed_cmd(a),
        Command::Gradcheck(a) => commands::gradcheck(a),
        Command::Synth(a) => commands::synth(a),
        Command::Ablate(a) => commands::ablate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Core(e)) => {
            let (kind, code) = classify(&e);
            fail(kind, code, e.to_string())
        }
        Err(Failure::Gradcheck(failed)) => fail(
            "gradcheck",
            NUMERIC,
            format!("gradient check failed for: {}", failed.join(", ")),
        ),
    }
}
