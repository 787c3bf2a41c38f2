//! `icilink`: DLT curves, Q-Q data, rate decisions and system sweeps.
//!
//! Exit codes: 0 success, 2 configuration error, 3 numerical failure,
//! 1 for I/O problems.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{Format, RunConfig};
use error::CliError;
use icilink::cfmath::Approximation;
use icilink::policies::PolicyKind;
use output::OutputDir;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "icilink", version, about = "HARQ link adaptation and PF scheduling under inter-cell interference")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Default)]
struct LinkFlags {
    /// User distances in meters, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    r: Option<Vec<f64>>,
    /// Path-loss exponents, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    alpha: Option<Vec<f64>>,
    /// Approximations: ga, ipla.
    #[arg(long, value_delimiter = ',')]
    approx: Option<Vec<Approximation>>,
}

#[derive(Subcommand)]
enum Command {
    /// Analytical (GA, IPLA) and simulated (exact, dominant) DLT curves.
    DltCurve {
        #[command(flatten)]
        link: LinkFlags,
        /// Monte Carlo processes per rate.
        #[arg(long)]
        processes: Option<usize>,
    },
    /// Quantiles of exact effective-SINR samples against the approximations.
    Qq {
        #[command(flatten)]
        link: LinkFlags,
        #[arg(long)]
        samples: Option<usize>,
        /// Attempt counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
    },
    /// System DLT and fairness per policy and user count.
    Simulate {
        /// User counts, comma separated.
        #[arg(long, value_delimiter = ',')]
        users: Option<Vec<usize>>,
        /// Policies: genie, isinr, avgx, ga, ipla.
        #[arg(long, value_delimiter = ',')]
        policies: Option<Vec<PolicyKind>>,
        #[arg(long)]
        horizon: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Optimal rate and its expected throughput for one geometry.
    RateOpt {
        #[command(flatten)]
        link: LinkFlags,
        /// Also write the DLT curves and decisions to the output directory.
        #[arg(long)]
        dump_curve: bool,
    },
}

fn apply_link(config: &mut RunConfig, flags: LinkFlags) {
    if let Some(r) = flags.r {
        config.link.radii = r;
    }
    if let Some(alpha) = flags.alpha {
        config.link.alphas = alpha;
    }
    if let Some(approx) = flags.approx {
        config.link.approximations = approx;
    }
}

fn resolve(common: &Common, command: &mut Command) -> Result<RunConfig, CliError> {
    let mut config = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.sim.seed = seed;
    }
    if let Some(out) = &common.out {
        config.output.dir = out.clone();
    }
    if let Some(format) = common.format {
        config.output.format = format;
    }
    match command {
        Command::DltCurve { link, processes } => {
            apply_link(&mut config, std::mem::take(link));
            if let Some(p) = processes {
                config.link.processes = *p;
            }
        }
        Command::Qq { link, samples, n } => {
            apply_link(&mut config, std::mem::take(link));
            if let Some(s) = samples {
                config.link.samples = *s;
            }
            if let Some(n) = n.take() {
                config.link.attempts = n;
            }
        }
        Command::Simulate { users, policies, horizon, trials } => {
            if let Some(u) = users.take() {
                config.sim.users = u;
            }
            if let Some(p) = policies.take() {
                config.sim.policies = p;
            }
            if let Some(h) = horizon {
                config.sim.horizon = *h;
            }
            if let Some(t) = trials {
                config.sim.trials = *t;
            }
        }
        Command::RateOpt { link, .. } => apply_link(&mut config, std::mem::take(link)),
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut command = cli.command;
    let config = resolve(&cli.common, &mut command)?;
    let open = || OutputDir::create(&config.output.dir, config.output.format);
    let name = match &command {
        Command::DltCurve { .. } => "dlt-curve",
        Command::Qq { .. } => "qq",
        Command::Simulate { .. } => "simulate",
        Command::RateOpt { .. } => "rate-opt",
    };
    match command {
        Command::DltCurve { .. } | Command::Qq { .. } | Command::Simulate { .. } => {
            let mut out = open()?;
            match command {
                Command::DltCurve { .. } => commands::dlt_curve_cmd(&config, &mut out)?,
                Command::Qq { .. } => commands::qq_cmd(&config, &mut out)?,
                _ => commands::simulate_cmd(&config, &mut out)?,
            }
            let files = out.finish(name, &config)?;
            eprintln!("wrote {} files to {}", files.len(), config.output.dir.display());
        }
        Command::RateOpt { dump_curve, .. } => {
            let mut out = if dump_curve { Some(open()?) } else { None };
            let table = commands::rate_opt_cmd(&config, out.as_mut())?;
            println!("{}", table.columns.join("\t"));
            for row in &table.rows {
                println!("{}", row.join("\t"));
            }
            if let Some(out) = out {
                out.finish(name, &config)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("icilink: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
