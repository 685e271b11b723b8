//! `mbo-lab`: runs one experiment from a JSON configuration and writes a CSV
//! plus a JSON summary.
//!
//! Exit status: 0 success, 2 configuration error, 3 numerical divergence,
//! 4 cost guard, 1 anything else.

// `!(x > 0.0)` style guards are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use log::{error, info};
use serde_json::Value;

use config::{resolve, Command};

#[derive(Debug, Parser)]
#[command(
    name = "mbo-lab",
    version,
    about = "Numerical lab for the modified Benjamin-Ono flow"
)]
struct Cli {
    command: Command,
    /// JSON configuration; an empty object when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, created if absent.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Overrides the `seed` key.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "MBO_LAB_THREADS")]
    threads: Option<usize>,
    #[arg(long)]
    quiet: bool,
    /// Validate and print the resolved configuration, then exit.
    #[arg(long)]
    check: bool,
}

fn load(path: &Option<PathBuf>) -> Result<Value, String> {
    let Some(p) = path else {
        return Ok(Value::Object(Default::default()));
    };
    let text = std::fs::read_to_string(p).map_err(|e| format!("cannot read {}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{} is not valid JSON: {e}", p.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    if let Some(t) = cli.threads {
        if t == 0 {
            error!("`threads`: must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            error!("thread pool: {e}");
            return ExitCode::from(1);
        }
    }

    let raw = match load(&cli.config) {
        Ok(v) => v,
        Err(msg) => {
            error!("{msg}");
            return ExitCode::from(2);
        }
    };
    let resolved = match resolve(cli.command, &raw, cli.seed) {
        Ok(r) => r,
        Err(issues) => {
            for i in &issues {
                error!("configuration error in {i}");
            }
            return ExitCode::from(2);
        }
    };
    if cli.check {
        println!("{}", serde_json::to_string_pretty(&resolved.echo).expect("json value"));
        return ExitCode::SUCCESS;
    }

    info!("running {}", cli.command.name());
    let outcome = run::execute(&resolved).and_then(|(csv, rep)| {
        run::write_artifacts(&resolved, &cli.out, &csv, &rep)?;
        Ok(rep)
    });
    match outcome {
        Ok(rep) => {
            for (k, v) in &rep.checks {
                info!("check {k}: {}", if *v { "pass" } else { "fail" });
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            error!("{e}");
            ExitCode::from(run::exit_code(&e) as u8)
        }
    }
}
