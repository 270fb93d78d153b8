use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nesslab::commands::{self, CommandOutput};
use nesslab::config::RunConfig;
use nesslab::manifest::Manifest;
use nesslab::verify::CHECKS;
use nesslab::CliError;

#[derive(Parser)]
#[command(name = "nesslab", version, about = "Hartree steady states and currents of a two-lead tight-binding system")]
struct Cli {
    /// TOML run configuration; the built-in single-dot example when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `outputs.directory`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dirichlet lead Green function and the smallest singular value of S(E).
    Green {
        /// Comma-separated energies; overrides --sweep.
        #[arg(long)]
        energies: Option<String>,
        /// min:max:count
        #[arg(long, default_value = "-2:2:101")]
        sweep: String,
        #[arg(long, default_value_t = 0)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        m: usize,
    },
    /// Free, interacting and effective transmittance on the energy grid.
    Transmittance {
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        effective: bool,
    },
    /// Current against the lead-2 chemical potential.
    Iv {
        /// min:max:count for mu2.
        #[arg(long = "mu2-range", default_value = "-0.5:0.5:21")]
        mu2_range: String,
    },
    /// Self-consistent steady state.
    Ness,
    /// Time-domain evolution compared with the steady state.
    Evolve,
    /// Acceptance battery.
    Verify {
        /// Print check identifiers without running them.
        #[arg(long)]
        list: bool,
        /// Comma-separated check identifiers.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
    },
    /// Print the built-in configuration.
    DefaultConfig,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("nesslab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let started = Instant::now();
    let (config, bytes) = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => {
            let c = RunConfig::default_single_dot();
            let text = c.to_toml();
            (c, text.into_bytes())
        }
    };
    let directory = cli.out.clone().unwrap_or_else(|| config.outputs.directory.clone());
    let arguments: Vec<String> = std::env::args().skip(1).collect();
    let (name, output, failure) = match cli.command {
        Command::DefaultConfig => {
            print!("{}", config.to_toml());
            return Ok(());
        }
        Command::Verify { list: true, .. } => {
            for (id, name) in CHECKS {
                println!("{id}\t{name}");
            }
            return Ok(());
        }
        Command::Green { energies, sweep, n, m } => {
            let list = match energies {
                Some(text) => commands::parse_list(&text)?,
                None => commands::parse_range(&sweep)?,
            };
            ("green", commands::green(&config, &list, n, m)?, None)
        }
        Command::Transmittance { lambda, effective } => {
            ("transmittance", commands::transmittance(&config, lambda, effective)?, None)
        }
        Command::Iv { mu2_range } => ("iv", commands::iv(&config, &commands::parse_range(&mu2_range)?)?, None),
        Command::Ness => ("ness", commands::steady(&config)?.0, None),
        Command::Evolve => ("evolve", commands::evolve(&config)?.0, None),
        Command::Verify { list: false, only } => {
            let outcomes = commands::run_verify(&config, &only);
            let failed: Vec<String> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
            let passed = outcomes.len() - failed.len();
            let output = CommandOutput {
                tables: vec![("verify".into(), commands::verify_table(&outcomes))],
                warnings: Vec::new(),
                summary: format!("{passed}/{} checks passed", outcomes.len()),
            };
            let failure = (!failed.is_empty()).then(|| CliError::Acceptance(format!("checks {}", failed.join(", "))));
            ("verify", output, failure)
        }
    };
    let mut manifest = Manifest::new(name, &bytes, arguments);
    manifest.outputs = commands::emit(&output, &directory, &config.outputs.formats)?;
    manifest.warnings = output.warnings.clone();
    manifest.finish(started.elapsed()).write(&directory)?;
    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    println!("{}", output.summary);
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}
