//! dpwb: command-line front end for the differential privacy workbench.
//!
//! Subcommands: `gen-data`, `bench-utility`, `bench-scale`, `dp-check`,
//! `query`. Every command is deterministic given its configuration and seed
//! (wall-clock measurement fields excepted), and benchmark commands echo
//! their resolved configuration into the output directory so a run can be
//! reproduced from its artifacts alone.
//!
//! Exit codes: 0 success; 1 usage or runtime error; 2 dp-check refuted the
//! claimed epsilon; 3 dp-check was inconclusive; 4 privacy budget exhausted.

mod commands;
mod config;
mod ledgerlock;

use clap::{Parser, Subcommand};
use dpwb_core::memtrack::TrackingAllocator;

#[global_allocator]
static ALLOC: TrackingAllocator = TrackingAllocator;

pub const EXIT_ERROR: i32 = 1;
pub const EXIT_DP_FAIL: i32 = 2;
pub const EXIT_DP_INCONCLUSIVE: i32 = 3;
pub const EXIT_BUDGET_EXHAUSTED: i32 = 4;

#[derive(Parser)]
#[command(
    name = "dpwb",
    version,
    about = "Differential privacy workbench: DP analytics queries and benchmarks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic skew-normal datasets (the 27-point grid, or one
    /// custom dataset) as CSV files plus a manifest.
    GenData(commands::GenDataArgs),
    /// Run the utility benchmark (MRE/SASE over an epsilon grid).
    BenchUtility(commands::BenchUtilityArgs),
    /// Run the scalability benchmark (time and memory over dataset sizes).
    BenchScale(commands::BenchScaleArgs),
    /// Stochastically test a mechanism's epsilon claim.
    DpCheck(commands::DpCheckArgs),
    /// Run one budget-tracked DP query against a CSV dataset.
    Query(commands::QueryArgs),
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::GenData(args) => run(commands::gen_data(args)),
        Command::BenchUtility(args) => run(commands::bench_utility(args)),
        Command::BenchScale(args) => run(commands::bench_scale(args)),
        Command::DpCheck(args) => match commands::dp_check(args) {
            Ok(code) => code,
            Err(err) => {
                eprintln!("error: {err:#}");
                EXIT_ERROR
            }
        },
        Command::Query(args) => match commands::query(args) {
            Ok(()) => 0,
            Err(err) => {
                eprintln!("error: {err:#}");
                if err
                    .downcast_ref::<dpwb_core::Error>()
                    .is_some_and(|e| matches!(e, dpwb_core::Error::BudgetExhausted { .. }))
                {
                    EXIT_BUDGET_EXHAUSTED
                } else {
                    EXIT_ERROR
                }
            }
        },
    };
    std::process::exit(code);
}

fn run(result: anyhow::Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {err:#}");
            EXIT_ERROR
        }
    }
}
