//! The utility benchmark loop.
//!
//! For every (query, mechanism, dataset, ε) cell: compute the deterministic
//! baseline y once, draw `n_runs` noisy releases ŷ_i, collect the L1 errors
//! E = {|ŷ_i - y|} and relative errors RE = {|ŷ_i - y| / |y|}, and emit
//! MRE = mean(RE) and SASE = sample-std(E / |D|). A zero baseline makes RE
//! undefined; such records are flagged and their MRE column carries the mean
//! absolute error instead.
//!
//! Cells are embarrassingly parallel: each owns a derived RNG stream keyed
//! by its coordinates, so parallel and serial execution produce bitwise
//! identical records.

use crate::accountant::BudgetLedger;
use crate::datagen::{resolve_bounds, BoundsPolicy, Dataset};
use crate::error::{Error, Result};
use crate::harness::grid::EpsilonGrid;
use crate::harness::metrics::{mre, sase};
use crate::mechanisms::{Bounds, Epsilon, MechanismSpec};
use crate::queries::{
    clip, dp_count, dp_mean, dp_std, dp_sum, dp_variance, true_count, true_mean, true_sum,
    true_variance, CountOptions, DpDefinition, MeanStrategy, QueryKind, VarStrategy,
};
use crate::rng::RandomSource;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Benchmark-level mechanism selector. The first seven rows resolve to a
/// concrete [`MechanismSpec`] whose bounds or clamp radius are derived from
/// the dataset and query; the last two select the composite strategies of
/// the mean and var queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MechanismChoice {
    LaplacePure,
    LaplaceTruncated,
    LaplaceBoundedDomain,
    LaplaceFolded,
    GeometricPure,
    GeometricTruncated,
    SnappingLaplace,
    /// Mean assembled from a noisy sum and a noisy count.
    SumOverCount,
    /// Var assembled from DP means of X and X².
    Moments,
}

impl MechanismChoice {
    pub const ALL: [MechanismChoice; 9] = [
        MechanismChoice::LaplacePure,
        MechanismChoice::LaplaceTruncated,
        MechanismChoice::LaplaceBoundedDomain,
        MechanismChoice::LaplaceFolded,
        MechanismChoice::GeometricPure,
        MechanismChoice::GeometricTruncated,
        MechanismChoice::SnappingLaplace,
        MechanismChoice::SumOverCount,
        MechanismChoice::Moments,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            MechanismChoice::LaplacePure => "laplace-pure",
            MechanismChoice::LaplaceTruncated => "laplace-truncated",
            MechanismChoice::LaplaceBoundedDomain => "laplace-bounded-domain",
            MechanismChoice::LaplaceFolded => "laplace-folded",
            MechanismChoice::GeometricPure => "geometric-pure",
            MechanismChoice::GeometricTruncated => "geometric-truncated",
            MechanismChoice::SnappingLaplace => "snapping-laplace",
            MechanismChoice::SumOverCount => "sum-over-count",
            MechanismChoice::Moments => "moments",
        }
    }
}

impl fmt::Display for MechanismChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MechanismChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MechanismChoice::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown mechanism '{s}'; expected one of: {}",
                    MechanismChoice::ALL
                        .iter()
                        .map(|m| m.name())
                        .collect::<Vec<_>>()
                        .join(", ")
                ))
            })
    }
}

/// Whether a (query, mechanism) pair can run.
pub fn supported(query: QueryKind, mech: MechanismChoice) -> bool {
    use MechanismChoice::*;
    match query {
        QueryKind::Count | QueryKind::Sum => !matches!(mech, SumOverCount | Moments),
        QueryKind::Mean => matches!(mech, LaplacePure | SumOverCount),
        QueryKind::Var | QueryKind::Std => matches!(mech, LaplaceBoundedDomain | Moments),
    }
}

/// Per-query default mechanism sets, mirroring how production DP libraries
/// assemble each query by default.
pub fn default_mechanisms(query: QueryKind) -> Vec<MechanismChoice> {
    use MechanismChoice::*;
    match query {
        QueryKind::Count => vec![
            LaplacePure,
            GeometricPure,
            GeometricTruncated,
            SnappingLaplace,
        ],
        QueryKind::Sum => vec![LaplacePure, LaplaceTruncated, SnappingLaplace],
        QueryKind::Mean => vec![LaplacePure, SumOverCount],
        QueryKind::Var | QueryKind::Std => vec![LaplaceBoundedDomain, Moments],
    }
}

/// Per-query default DP definition (count releases are calibrated for the
/// add/remove relation; the aggregates for replace-one).
pub fn default_definition(query: QueryKind) -> DpDefinition {
    match query {
        QueryKind::Count => DpDefinition::Unbounded,
        _ => DpDefinition::Bounded,
    }
}

/// Configuration of a utility run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub n_runs: usize,
    pub master_seed: u64,
    pub bounds_policy: BoundsPolicy,
    /// `None` keeps the per-query default.
    pub definition: Option<DpDefinition>,
    pub round_count: bool,
    pub include_zero_values: bool,
}

impl Default for UtilityConfig {
    fn default() -> Self {
        Self {
            n_runs: 500,
            master_seed: 42,
            bounds_policy: BoundsPolicy::ActualMinMax,
            definition: None,
            round_count: true,
            include_zero_values: true,
        }
    }
}

/// One measured benchmark cell.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityRecord {
    pub dataset_id: String,
    pub query: QueryKind,
    pub mechanism: MechanismChoice,
    pub definition: DpDefinition,
    pub epsilon: f64,
    pub mre: f64,
    pub sase: f64,
    pub n_runs: usize,
    /// True when the baseline was zero and `mre` carries the mean absolute
    /// error instead of a relative error.
    pub flagged: bool,
}

/// Run the utility benchmark over the full (query x mechanism x dataset x ε)
/// product. Every pair in the product must be supported.
pub fn run_utility(
    datasets: &[Dataset],
    queries: &[QueryKind],
    mechanisms: &[MechanismChoice],
    grid: &EpsilonGrid,
    cfg: &UtilityConfig,
) -> Result<Vec<UtilityRecord>> {
    if cfg.n_runs < 2 {
        return Err(Error::invalid("utility runs need n_runs >= 2"));
    }
    if datasets.is_empty() {
        return Err(Error::invalid("no datasets selected"));
    }
    let mut pairs = Vec::new();
    for &q in queries {
        for &m in mechanisms {
            if !supported(q, m) {
                return Err(Error::NotImplemented(format!(
                    "query '{q}' does not support mechanism '{m}'"
                )));
            }
            pairs.push((q, m));
        }
    }
    run_utility_pairs(datasets, &pairs, grid, cfg)
}

/// As [`run_utility`], but with an explicit list of (query, mechanism)
/// pairs. Used by callers that mix per-query default mechanism sets.
pub fn run_utility_pairs(
    datasets: &[Dataset],
    pairs: &[(QueryKind, MechanismChoice)],
    grid: &EpsilonGrid,
    cfg: &UtilityConfig,
) -> Result<Vec<UtilityRecord>> {
    for &(q, m) in pairs {
        if !supported(q, m) {
            return Err(Error::NotImplemented(format!(
                "query '{q}' does not support mechanism '{m}'"
            )));
        }
    }
    let prepared: Vec<PreparedDataset> = datasets
        .iter()
        .map(|d| PreparedDataset::new(d, &cfg.bounds_policy))
        .collect::<Result<_>>()?;

    let mut cells = Vec::new();
    for (pair_idx, &(query, mech)) in pairs.iter().enumerate() {
        for (ds_idx, _) in prepared.iter().enumerate() {
            for (eps_idx, &eps) in grid.values().iter().enumerate() {
                cells.push(Cell {
                    pair_idx,
                    query,
                    mech,
                    ds_idx,
                    eps_idx,
                    eps,
                });
            }
        }
    }

    cells
        .par_iter()
        .map(|cell| run_cell(cell, &prepared[cell.ds_idx], cfg))
        .collect()
}

struct Cell {
    pair_idx: usize,
    query: QueryKind,
    mech: MechanismChoice,
    ds_idx: usize,
    eps_idx: usize,
    eps: Epsilon,
}

struct PreparedDataset {
    data: Dataset,
    bounds: Bounds,
}

impl PreparedDataset {
    fn new(data: &Dataset, policy: &BoundsPolicy) -> Result<Self> {
        Ok(Self {
            data: data.clone(),
            bounds: resolve_bounds(data, policy)?,
        })
    }
}

fn run_cell(cell: &Cell, prepared: &PreparedDataset, cfg: &UtilityConfig) -> Result<UtilityRecord> {
    let data = &prepared.data;
    let n = data.len();
    let definition = cfg
        .definition
        .unwrap_or_else(|| default_definition(cell.query));
    let baseline = baseline_value(cell.query, data, prepared.bounds, cfg)?;
    let spec = resolve_mechanism(cell.mech, cell.query, n, prepared.bounds)?;

    // One stream per cell, derived from its coordinates; runs draw
    // sequentially within the stream.
    let stream_tag = cell_tag(cell);
    let source = RandomSource::new(cfg.master_seed).substream(stream_tag);
    let mut rng = source.rng();

    // Ample per-cell budget: the benchmark exercises the release path, not
    // budget exhaustion.
    let total = Epsilon::new(cell.eps.get() * (cfg.n_runs as f64 + 4.0) * 2.0)?;
    let ledger = BudgetLedger::new(total)?;

    let count_opts = CountOptions {
        round_output: cfg.round_count,
        include_zero_values: cfg.include_zero_values,
    };

    let mut errors = Vec::with_capacity(cfg.n_runs);
    for _ in 0..cfg.n_runs {
        let release = match cell.query {
            QueryKind::Count => {
                dp_count(
                    data,
                    cell.eps,
                    &spec.concrete,
                    count_opts,
                    &ledger,
                    &mut rng,
                )?
                .value
            }
            QueryKind::Sum => {
                dp_sum(
                    data,
                    prepared.bounds,
                    cell.eps,
                    definition,
                    &spec.concrete,
                    &ledger,
                    &mut rng,
                )?
                .value
            }
            QueryKind::Mean => {
                dp_mean(
                    data,
                    prepared.bounds,
                    cell.eps,
                    definition,
                    spec.mean_strategy,
                    &ledger,
                    &mut rng,
                )?
                .value
            }
            QueryKind::Var => {
                dp_variance(
                    data,
                    prepared.bounds,
                    cell.eps,
                    definition,
                    spec.var_strategy,
                    &ledger,
                    &mut rng,
                )?
                .value
            }
            QueryKind::Std => {
                dp_std(
                    data,
                    prepared.bounds,
                    cell.eps,
                    definition,
                    spec.var_strategy,
                    &ledger,
                    &mut rng,
                )?
                .value
            }
        };
        errors.push((release - baseline).abs());
    }

    let (mre_value, flagged) = if baseline == 0.0 {
        (errors.iter().sum::<f64>() / errors.len() as f64, true)
    } else {
        (mre(&errors, baseline)?, false)
    };
    let sase_value = sase(&errors, n.max(1))?;

    Ok(UtilityRecord {
        dataset_id: data.id().to_string(),
        query: cell.query,
        mechanism: cell.mech,
        definition,
        epsilon: cell.eps.get(),
        mre: mre_value,
        sase: sase_value,
        n_runs: cfg.n_runs,
        flagged,
    })
}

fn cell_tag(cell: &Cell) -> u64 {
    // distinct coordinates -> distinct tag; fields are small
    (cell.pair_idx as u64) << 40 | (cell.ds_idx as u64) << 20 | cell.eps_idx as u64
}

fn baseline_value(
    query: QueryKind,
    data: &Dataset,
    bounds: Bounds,
    cfg: &UtilityConfig,
) -> Result<f64> {
    // Baselines are the deterministic analytics queries; aggregates use the
    // clipped data, matching each query's own noise-free limit. The count
    // baseline is always the true record count, even when the release under
    // study omits zero values, so the benchmark surfaces that discrepancy.
    let _ = cfg;
    match query {
        QueryKind::Count => Ok(true_count(data, true)),
        QueryKind::Sum => Ok(true_sum(clip(data, bounds).records())),
        QueryKind::Mean => true_mean(clip(data, bounds).records()),
        QueryKind::Var => true_variance(clip(data, bounds).records()),
        QueryKind::Std => Ok(true_variance(clip(data, bounds).records())?.sqrt()),
    }
}

struct ResolvedMechanism {
    concrete: MechanismSpec,
    mean_strategy: MeanStrategy,
    var_strategy: VarStrategy,
}

/// Resolve a benchmark-level selector into a concrete mechanism for one
/// query over a dataset of `n` records clipped to `bounds`. Range-carrying
/// variants get the query's natural output range; snapping gets a clamp
/// radius covering it. Composite selectors (which do not release through a
/// single mechanism) resolve to the pure Laplace used by their sub-releases.
pub fn resolve_mechanism_spec(
    mech: MechanismChoice,
    query: QueryKind,
    n: usize,
    bounds: Bounds,
) -> Result<MechanismSpec> {
    let n_f = n as f64;
    let output_bounds = match query {
        QueryKind::Count => Bounds::new(0.0, n_f)?,
        QueryKind::Sum => Bounds::new(
            (n_f * bounds.lower()).min(n_f * bounds.upper()),
            (n_f * bounds.lower()).max(n_f * bounds.upper()),
        )?,
        _ => bounds,
    };
    Ok(match mech {
        MechanismChoice::LaplacePure => MechanismSpec::LaplacePure,
        MechanismChoice::LaplaceTruncated => MechanismSpec::LaplaceTruncated {
            bounds: output_bounds,
        },
        MechanismChoice::LaplaceBoundedDomain => MechanismSpec::LaplaceBoundedDomain {
            bounds: output_bounds,
        },
        MechanismChoice::LaplaceFolded => MechanismSpec::LaplaceFolded {
            bounds: output_bounds,
        },
        MechanismChoice::GeometricPure => MechanismSpec::GeometricPure,
        MechanismChoice::GeometricTruncated => MechanismSpec::GeometricTruncated {
            bounds: integral_envelope(output_bounds)?,
        },
        MechanismChoice::SnappingLaplace => MechanismSpec::SnappingLaplace {
            clamp_radius: output_bounds.max_abs().max(1.0),
        },
        // composite selectors never release through a concrete spec
        MechanismChoice::SumOverCount | MechanismChoice::Moments => MechanismSpec::LaplacePure,
    })
}

fn resolve_mechanism(
    mech: MechanismChoice,
    query: QueryKind,
    n: usize,
    bounds: Bounds,
) -> Result<ResolvedMechanism> {
    Ok(ResolvedMechanism {
        concrete: resolve_mechanism_spec(mech, query, n, bounds)?,
        mean_strategy: match mech {
            MechanismChoice::SumOverCount => MeanStrategy::SumOverCount,
            _ => MeanStrategy::Direct,
        },
        var_strategy: match mech {
            MechanismChoice::Moments => VarStrategy::Moments,
            _ => VarStrategy::Direct,
        },
    })
}

fn integral_envelope(bounds: Bounds) -> Result<Bounds> {
    Bounds::new(bounds.lower().floor(), bounds.upper().ceil())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::grid::EpsilonGrid;

    fn small_grid() -> EpsilonGrid {
        EpsilonGrid::from_values(&[0.1, 1.0, 10.0]).unwrap()
    }

    fn dataset(n: usize) -> Dataset {
        Dataset::from_records("unit", (0..n).map(|i| (i % 10) as f64 + 1.0).collect()).unwrap()
    }

    #[test]
    fn unsupported_pair_is_an_error() {
        let err = run_utility(
            &[dataset(10)],
            &[QueryKind::Mean],
            &[MechanismChoice::GeometricPure],
            &small_grid(),
            &UtilityConfig {
                n_runs: 5,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotImplemented(_)));
    }

    #[test]
    fn record_count_is_full_product() {
        let records = run_utility(
            &[dataset(50), dataset(80)],
            &[QueryKind::Count, QueryKind::Sum],
            &[MechanismChoice::LaplacePure],
            &small_grid(),
            &UtilityConfig {
                n_runs: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(records.len(), 2 * 2 * 3);
        assert!(records.iter().all(|r| r.n_runs == 10));
        assert!(records.iter().all(|r| r.mre >= 0.0 && r.sase >= 0.0));
    }

    #[test]
    fn replay_is_bitwise_identical() {
        let cfg = UtilityConfig {
            n_runs: 25,
            master_seed: 7,
            ..Default::default()
        };
        let run = || {
            run_utility_pairs(
                &[dataset(100)],
                &[
                    (QueryKind::Mean, MechanismChoice::LaplacePure),
                    (QueryKind::Var, MechanismChoice::Moments),
                ],
                &small_grid(),
                &cfg,
            )
            .unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.mre.to_bits(), y.mre.to_bits());
            assert_eq!(x.sase.to_bits(), y.sase.to_bits());
        }
    }

    #[test]
    fn serial_equals_parallel() {
        let cfg = UtilityConfig {
            n_runs: 12,
            master_seed: 11,
            ..Default::default()
        };
        let datasets = [dataset(60)];
        let queries = [QueryKind::Count, QueryKind::Mean];
        let mechs = [MechanismChoice::LaplacePure];
        let parallel = run_utility(&datasets, &queries, &mechs, &small_grid(), &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let serial = pool
            .install(|| run_utility(&datasets, &queries, &mechs, &small_grid(), &cfg))
            .unwrap();
        assert_eq!(parallel, serial);
    }

    #[test]
    fn zero_baseline_is_flagged_with_absolute_error() {
        // records sum to zero -> sum baseline is 0
        let data = Dataset::from_records("zero", vec![-1.0, 1.0, -2.0, 2.0]).unwrap();
        let records = run_utility(
            &[data],
            &[QueryKind::Sum],
            &[MechanismChoice::LaplacePure],
            &EpsilonGrid::from_values(&[1.0]).unwrap(),
            &UtilityConfig {
                n_runs: 20,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(records[0].flagged);
        assert!(records[0].mre > 0.0);
    }

    #[test]
    fn mre_shrinks_with_epsilon_on_count() {
        let records = run_utility(
            &[dataset(1000)],
            &[QueryKind::Count],
            &[MechanismChoice::LaplacePure],
            &EpsilonGrid::from_values(&[0.05, 5.0]).unwrap(),
            &UtilityConfig {
                n_runs: 200,
                round_count: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(records[0].mre > records[1].mre);
    }
}
