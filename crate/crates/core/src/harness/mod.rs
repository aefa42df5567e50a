//! Benchmark engine: the ε grid, MRE/SASE metrics, the utility and
//! scalability loops, the stochastic ε-DP tester, and report files.

pub mod dptest;
pub mod grid;
pub mod metrics;
pub mod report;
pub mod scalability;
pub mod utility;

pub use dptest::{dp_statistical_test, DpTestConfig, DpTestReport, Verdict};
pub use grid::{epsilon_grid, EpsilonGrid};
pub use metrics::{mre, sase};
pub use report::{emit_report, emit_scalability, format_sig6, parse_report, parse_scalability};
pub use scalability::{
    loglog_slope, median_elapsed, run_scalability, ScalabilityConfig, ScalabilityOutcome,
    ScalabilityRecord,
};
pub use utility::{
    default_definition, default_mechanisms, resolve_mechanism_spec, run_utility, run_utility_pairs,
    supported, MechanismChoice, UtilityConfig, UtilityRecord,
};
