use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use glvortex::config::{parse_file, parse_str, RunConfig};
use glvortex::criteria::{self, TARGETS};
use glvortex::error::HarnessError;
use glvortex::runs;

#[derive(Parser, Debug)]
#[command(name = "glvortex", version, about = "Gauged TDGL vortex simulations and their reduced dynamics")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (defaults to `out_dir` from the config, then `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for ladders and parallel checks.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reject unknown configuration keys.
    #[arg(long, global = true)]
    strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the drive fields and classify the regime.
    Precompute,
    /// Build well-prepared initial data and evaluate the energy band.
    Init,
    /// Run the gauged TDGL equations.
    Simulate {
        /// Interpret `time.T` on the accelerated scale `t / lambda`.
        #[arg(long)]
        accelerated: bool,
    },
    /// Integrate the reduced vortex law.
    Reduce,
    /// Run the epsilon ladder and compare PDE tracks with the reduced law.
    Compare,
    /// Run the verification suite or named acceptance targets.
    Verify {
        /// Acceptance target; repeatable.
        #[arg(long = "target", value_parser = clap::builder::PossibleValuesParser::new(TARGETS))]
        targets: Vec<String>,
        /// Flip one link phase inside the gauge check (negative control).
        #[arg(long)]
        corrupt: bool,
    },
    /// Compute the radial core profile and its energy constant.
    Gamma,
}

const VERIFY_DEFAULT: &str = include_str!("../../../configs/verify.toml");

fn load(cli: &Cli, required: bool) -> Result<RunConfig, HarnessError> {
    match &cli.config {
        Some(p) => Ok(parse_file(p, cli.strict)?),
        None if required => Err(HarnessError::Config(glvortex::config::ConfigError::one("--config", "this subcommand needs --config"))),
        None => Ok(parse_str(VERIFY_DEFAULT, true)?),
    }
}

fn run(cli: &Cli) -> Result<(), HarnessError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::Config(glvortex::config::ConfigError::one("--threads", e.to_string())))?;
    }
    let needs_config = !matches!(cli.command, Command::Verify { .. } | Command::Gamma);
    let mut cfg = load(cli, needs_config)?;
    let out = cli.out.clone().or_else(|| cfg.out_dir.clone().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"));
    match &cli.command {
        Command::Precompute => {
            let ctx = runs::precompute_cmd(&cfg, &out)?;
            println!("regime {} (k_ex = {}, lambda = {})", ctx.regime_label(), ctx.k_ex, ctx.lambda);
        }
        Command::Init => {
            let r = runs::init_cmd(&cfg, &out)?;
            println!(
                "F~(0) = {:.6}, excess = {:.4} in ({:.4}, {:.4}): {}",
                r.ftilde0,
                r.excess,
                r.lower,
                r.upper,
                if r.well_prepared { "well prepared" } else { "not well prepared" }
            );
        }
        Command::Simulate { accelerated } => {
            let r = runs::simulate(&cfg, &out, *accelerated)?;
            let fails = r.monitors.iter().filter(|m| !m.verdict).count();
            println!("{} steps to t = {:.6}; {} tracks; {fails} monitor violations", r.last.step, r.last.t, r.tracking.tracks.len());
        }
        Command::Reduce => {
            let r = runs::reduce(&cfg, &out)?;
            println!("integrated to tau = {:.6}{}", r.trajectory.t_star, if r.trajectory.halted { " (halted at sigma*)" } else { "" });
        }
        Command::Compare => {
            let r = runs::compare(&cfg, &out)?;
            for m in &r.members {
                println!("eps = {:<8} D = {:.6}  T* = {:.4}", m.epsilon, m.discrepancy, m.t_star_pde.min(m.t_star_ode));
            }
            println!("monotone: {}", r.monotone);
        }
        Command::Verify { targets, corrupt } => {
            cfg.verify.corrupt |= *corrupt;
            let results = criteria::verify(&cfg, &out, targets)?;
            let mut failures = 0;
            for c in &results {
                for k in &c.checks {
                    println!("{:<5} {}/{}: {:e} (threshold {:e}) {}", if k.pass { "PASS" } else { "FAIL" }, c.id, k.name, k.value, k.threshold, k.detail);
                }
                failures += c.failures();
            }
            if failures > 0 {
                return Err(HarnessError::VerifyFailed(failures));
            }
        }
        Command::Gamma => {
            let g = runs::gamma_cmd(&out)?;
            println!("gamma = {g}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if let HarnessError::Config(c) = &e {
                for i in &c.issues {
                    eprintln!("config error [{}]: {}", i.keys.join(", "), i.message);
                }
            } else {
                eprintln!("error: {e}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
