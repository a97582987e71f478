//! `prrr`: simulate the reporting protocol and check its incentive claims.
//!
//! Exit codes: 0 when the outcome matches the claim being checked, 1 when it
//! does not, 2 for usage, configuration or budget errors.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{InstanceArgs, SpecArgs};

#[derive(Debug, Parser)]
#[command(name = "prrr", version, about = "Personal random rewards: protocol simulator and incentive checks")]
struct Cli {
    /// Master seed. Falls back to PRRR_SEED, then 0.
    #[arg(long, global = true, env = "PRRR_SEED")]
    seed: Option<u64>,
    /// Monte Carlo trials; each command has its own default.
    #[arg(long, global = true)]
    trials: Option<u64>,
    /// Directory for JSON, CSV and NDJSON artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Print the JSON report instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reward matrix of the contract on fixed values 10, 8 and r_min = 2.
    Table1 {
        /// Perturb one ledger before comparison, to exercise the failure path.
        #[arg(long, hide = true)]
        corrupt: bool,
    },
    /// Reward monotonicity and skipping resistance of a random-value function.
    CheckRv {
        #[command(flatten)]
        spec: SpecArgs,
        /// Largest report count checked.
        #[arg(long, default_value_t = 100)]
        nmax: u64,
        /// Also estimate the payout curve by Monte Carlo with this many trials.
        #[arg(long)]
        mc: Option<u64>,
    },
    /// Play epochs under a strategy profile and report expected utilities.
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Publisher strategy, e.g. `p1=bribe-to-skip:amount=2.5`. Repeatable.
        #[arg(long = "strategy")]
        strategies: Vec<String>,
        /// Validator strategy: honest, best-response or include-nothing.
        #[arg(long)]
        validator: Option<String>,
        /// Write step-by-step NDJSON traces of the first N trials.
        #[arg(long, value_name = "N")]
        trace: Option<u64>,
    },
    /// Search the deviation grid for a profitable unilateral or coalition deviation.
    Spne {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Standard errors a gain must clear to count as profitable.
        #[arg(long, default_value_t = 3.0)]
        epsilon: f64,
        /// Offset of the bribe levels around the pivotal amounts.
        #[arg(long, default_value_t = 1e-6)]
        delta: f64,
    },
    /// Publishers plus the first validator choosing jointly after seeing the string.
    Collusion {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        instance: InstanceArgs,
        /// Colluding publishers, e.g. `0,1`. Defaults to all of them.
        #[arg(long, value_delimiter = ',')]
        members: Option<Vec<u32>>,
    },
    /// Split one publisher's reports over fresh identities.
    Sybil {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        instance: InstanceArgs,
        #[arg(long, default_value_t = 0)]
        publisher: u32,
        /// Part sizes, e.g. `2+2`. The publisher's report count becomes their sum.
        #[arg(long, default_value = "2+2")]
        split: String,
        #[arg(long, default_value_t = 3.0)]
        epsilon: f64,
    },
    /// Whether any fixed deviation moves another participant's payoff without costing the deviator.
    Stability {
        #[command(flatten)]
        spec: SpecArgs,
        #[command(flatten)]
        instance: InstanceArgs,
    },
    /// Profitable bribery against a fixed-bounty protocol.
    Impossibility {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 10.0)]
        rfix: f64,
        #[arg(long, default_value_t = 1.0)]
        v: f64,
        /// Size of the random-string space.
        #[arg(long, default_value_t = 1)]
        strings: usize,
        #[arg(long, default_value_t = 1)]
        capacity: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
