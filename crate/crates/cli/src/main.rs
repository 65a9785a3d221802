//! `cpqsd`: command-line front end for the contact-process toolkit.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use cpqsd_core::parallel::Parallelism;
use cpqsd_core::spectral::Policy;
use cpqsd_core::Error;

use config::{Command, RunConfig, RunFile};

#[derive(Debug, Parser)]
#[command(name = "cpqsd", version, allow_negative_numbers = true, about = "Subcritical contact process seen from its rightmost point")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// A single time, or a comma-separated increasing grid.
    #[arg(long = "t", value_delimiter = ',', num_args = 1..)]
    t: Vec<f64>,
    /// Truncation depth (generator) or key depth (distributions).
    #[arg(long = "L")]
    l: Option<u32>,
    /// Depth of [−M, 0] standing in for an infinite initial configuration.
    #[arg(long = "M")]
    m: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    #[arg(long)]
    target_survivors: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    policy: Option<Policy>,
    /// TOML run file; its values win over flags.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Cli {
    fn run_file(&self) -> RunFile {
        let (t, t_grid) = match self.t.len() {
            0 => (None, None),
            1 => (Some(self.t[0]), None),
            _ => (None, Some(self.t.clone())),
        };
        RunFile {
            command: Some(self.command),
            lambda: self.lambda,
            beta: self.beta,
            t,
            t_grid,
            l: self.l,
            m: self.m,
            replicas: self.replicas,
            target_survivors: self.target_survivors,
            seed: self.seed,
            output_dir: self.out.clone(),
            policy: self.policy,
        }
    }
}

const EXIT_PARAMETER: u8 = 2;
const EXIT_RESOLUTION: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parameter { .. } | Error::Parse { .. } | Error::Precondition(_) => EXIT_PARAMETER,
        e if e.is_statistical() => EXIT_RESOLUTION,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_PARAMETER } else { 0 });
        }
    };
    let flags = cli.run_file();
    let resolved = match &cli.config {
        Some(path) => RunFile::load(path).map(|file| flags.merged(file)),
        None => Ok(flags),
    }
    .and_then(RunConfig::resolve);
    let cfg = match resolved {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let par = Parallelism::from_env();
    log::info!("{:?} with {} worker threads, output in {}", cfg.command, par.threads(), cfg.output_dir.display());
    match commands::run(&cfg, &par) {
        Ok(outcome) => {
            for l in &outcome.lines {
                println!("{l}");
            }
            if outcome.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
