//! The scalability benchmark: execution time and memory per query as the
//! dataset size grows.
//!
//! Datasets are generated (skew 5, scale 250) and their bounds resolved
//! before any clock starts; the monotonic timer wraps only the query
//! invocation itself, excluding generation, I/O, and reporting. Runs are
//! strictly serial to keep measurements free of scheduler interference, and
//! each (size, query, ε) cell gets one untimed warmup before its timed runs.
//!
//! Memory is reported twice per run: the peak resident-set delta observed by
//! a watcher thread around the call, and the peak allocation delta from the
//! tracking allocator when the running binary installed it (0 otherwise).

use crate::accountant::BudgetLedger;
use crate::datagen::{generate_with_id, resolve_bounds, BoundsPolicy, Dataset, GenParams};
use crate::error::{Error, Result};
use crate::mechanisms::{Bounds, Epsilon, MechanismSpec};
use crate::memtrack::{AllocMarker, RssWatcher};
use crate::queries::{
    dp_count, dp_mean, dp_sum, dp_variance, CountOptions, DpDefinition, MeanStrategy, QueryKind,
    VarStrategy,
};
use crate::rng::{derive_seed, RandomSource};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// Skew of the scalability datasets.
pub const SCALE_BENCH_SKEW: f64 = 5.0;
/// Scale of the scalability datasets.
pub const SCALE_BENCH_SCALE: f64 = 250.0;

/// Configuration of a scalability run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScalabilityConfig {
    pub sizes: Vec<usize>,
    pub queries: Vec<QueryKind>,
    pub epsilons: Vec<f64>,
    pub runs: usize,
    /// Sizes whose estimated working set exceeds this cap are skipped with a
    /// reason instead of attempted.
    pub memory_cap_bytes: u64,
    pub master_seed: u64,
}

impl Default for ScalabilityConfig {
    fn default() -> Self {
        Self {
            sizes: vec![10, 100, 1_000, 10_000, 100_000, 1_000_000],
            queries: vec![
                QueryKind::Count,
                QueryKind::Sum,
                QueryKind::Mean,
                QueryKind::Var,
            ],
            epsilons: vec![1.0],
            runs: 5,
            memory_cap_bytes: 4 * 1024 * 1024 * 1024,
            master_seed: 42,
        }
    }
}

/// One timed measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalabilityRecord {
    pub size: usize,
    pub query: QueryKind,
    pub epsilon: f64,
    pub run: usize,
    pub elapsed_seconds: f64,
    pub peak_rss_bytes: u64,
    pub alloc_peak_bytes: u64,
}

/// Either a measurement or a documented skip.
#[derive(Debug, Clone, PartialEq)]
pub enum ScalabilityOutcome {
    Measured(ScalabilityRecord),
    Skipped {
        size: usize,
        query: QueryKind,
        reason: String,
    },
}

/// Run the scalability benchmark serially over sizes x queries x epsilons.
pub fn run_scalability(cfg: &ScalabilityConfig) -> Result<Vec<ScalabilityOutcome>> {
    if cfg.runs == 0 {
        return Err(Error::invalid("scalability needs at least 1 run"));
    }
    if cfg.sizes.is_empty() || cfg.queries.is_empty() || cfg.epsilons.is_empty() {
        return Err(Error::invalid(
            "sizes, queries, and epsilons must be non-empty",
        ));
    }
    let mut outcomes = Vec::new();
    for (size_idx, &size) in cfg.sizes.iter().enumerate() {
        // clip copies plus the squared-moment pass dominate the working set
        let estimated = (size as u64).saturating_mul(8).saturating_mul(4);
        if estimated > cfg.memory_cap_bytes {
            for &query in &cfg.queries {
                outcomes.push(ScalabilityOutcome::Skipped {
                    size,
                    query,
                    reason: format!(
                        "estimated working set {estimated} B exceeds cap {} B",
                        cfg.memory_cap_bytes
                    ),
                });
            }
            continue;
        }
        let params = GenParams {
            size,
            skew: SCALE_BENCH_SKEW,
            scale: SCALE_BENCH_SCALE,
            location: 0.0,
            seed: derive_seed(cfg.master_seed, size_idx as u64),
        };
        let data = generate_with_id(format!("scale-n{size}"), &params)?;
        let bounds = resolve_bounds(&data, &BoundsPolicy::ActualMinMax)?;
        for &query in &cfg.queries {
            for &eps_raw in &cfg.epsilons {
                let eps = Epsilon::new(eps_raw)?;
                let source = RandomSource::new(cfg.master_seed)
                    .substream((size_idx as u64) << 32 | (query as u64) << 16);
                let mut rng = source.rng();
                let budget = Epsilon::new(eps_raw * (cfg.runs as f64 + 2.0) * 2.0)?;
                let ledger = BudgetLedger::new(budget)?;
                // warmup: touch pages and code paths outside the clock
                execute_query(query, &data, bounds, eps, &ledger, &mut rng)?;
                for run in 0..cfg.runs {
                    let marker = AllocMarker::set();
                    let watcher = RssWatcher::start(Duration::from_micros(200));
                    let started = Instant::now();
                    execute_query(query, &data, bounds, eps, &ledger, &mut rng)?;
                    let elapsed = started.elapsed();
                    let peak_rss = watcher.stop();
                    let alloc_peak = marker.peak_delta();
                    outcomes.push(ScalabilityOutcome::Measured(ScalabilityRecord {
                        size,
                        query,
                        epsilon: eps_raw,
                        run,
                        elapsed_seconds: elapsed.as_secs_f64().max(1e-9),
                        peak_rss_bytes: peak_rss,
                        alloc_peak_bytes: alloc_peak,
                    }));
                }
            }
        }
    }
    Ok(outcomes)
}

fn execute_query<R: rand::Rng + ?Sized>(
    query: QueryKind,
    data: &Dataset,
    bounds: Bounds,
    eps: Epsilon,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<f64> {
    Ok(match query {
        QueryKind::Count => {
            dp_count(
                data,
                eps,
                &MechanismSpec::LaplacePure,
                CountOptions::default(),
                ledger,
                rng,
            )?
            .value
        }
        QueryKind::Sum => {
            dp_sum(
                data,
                bounds,
                eps,
                DpDefinition::Bounded,
                &MechanismSpec::LaplacePure,
                ledger,
                rng,
            )?
            .value
        }
        QueryKind::Mean => {
            dp_mean(
                data,
                bounds,
                eps,
                DpDefinition::Bounded,
                MeanStrategy::Direct,
                ledger,
                rng,
            )?
            .value
        }
        QueryKind::Var | QueryKind::Std => {
            dp_variance(
                data,
                bounds,
                eps,
                DpDefinition::Bounded,
                VarStrategy::Moments,
                ledger,
                rng,
            )?
            .value
        }
    })
}

/// Least-squares slope of log10(elapsed) against log10(size), using the
/// median elapsed time per size. Used to check that query time grows no
/// worse than roughly linearly.
pub fn loglog_slope(points: &[(usize, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| (*n as f64).log10()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, t)| t.log10()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}

/// Median elapsed seconds per (size, query) over the measured outcomes.
pub fn median_elapsed(outcomes: &[ScalabilityOutcome], query: QueryKind) -> Vec<(usize, f64)> {
    let mut by_size: Vec<(usize, Vec<f64>)> = Vec::new();
    for outcome in outcomes {
        if let ScalabilityOutcome::Measured(r) = outcome {
            if r.query == query {
                match by_size.iter_mut().find(|(s, _)| *s == r.size) {
                    Some((_, v)) => v.push(r.elapsed_seconds),
                    None => by_size.push((r.size, vec![r.elapsed_seconds])),
                }
            }
        }
    }
    by_size
        .into_iter()
        .map(|(size, mut times)| {
            times.sort_by(|a, b| a.total_cmp(b));
            (size, times[times.len() / 2])
        })
        .collect()
}
