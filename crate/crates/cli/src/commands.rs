//! The five dpwb subcommands.

use crate::config::{
    ensure_out_dir, load_config, parse_bounds_policy, parse_definition, parse_mechanisms,
    parse_queries, resolve_seed, write_json, Manifest,
};
use crate::ledgerlock::LedgerLock;
use crate::{EXIT_DP_FAIL, EXIT_DP_INCONCLUSIVE};
use anyhow::{bail, Context, Result};
use clap::Args;
use dpwb_core::accountant::BudgetLedger;
use dpwb_core::datagen::{
    generate_with_id, grid_27, grid_dataset_id, load_csv, resolve_bounds, write_csv, Dataset,
    GenParams,
};
use dpwb_core::harness::{
    default_mechanisms, dp_statistical_test, emit_report, emit_scalability, epsilon_grid,
    resolve_mechanism_spec, run_scalability, run_utility_pairs, DpTestConfig, EpsilonGrid,
    MechanismChoice, ScalabilityConfig, UtilityConfig, Verdict,
};
use dpwb_core::mechanisms::{
    geometric_pure, geometric_truncated, laplace_bounded_domain, laplace_folded, laplace_pure,
    laplace_truncated, snapping_laplace, Bounds, Epsilon, Sensitivity,
};
use dpwb_core::queries::{
    dp_count, dp_mean, dp_std, dp_sum, dp_variance, CountOptions, MeanStrategy, QueryKind,
    QueryResult, VarStrategy,
};
use dpwb_core::rng::{derive_seed, RandomSource, SourceRng};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

type MechSampler = Box<dyn Fn(f64, &mut SourceRng) -> dpwb_core::Result<f64>>;

// ---------------------------------------------------------------------------
// gen-data
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Output directory for the CSV files and manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed (falls back to DPWB_SEED, then 42).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Generate one custom dataset of this size instead of the 27-set grid.
    #[arg(long, requires = "skew", requires = "scale")]
    pub size: Option<usize>,
    #[arg(long, requires = "size")]
    pub skew: Option<f64>,
    #[arg(long, requires = "size")]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub location: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetManifestEntry {
    id: String,
    file: String,
    params: GenParams,
}

pub fn gen_data(args: GenDataArgs) -> Result<()> {
    let seed = resolve_seed(args.seed, None)?;
    ensure_out_dir(&args.out)?;
    let params_list: Vec<(String, GenParams)> = match args.size {
        Some(size) => {
            let skew = args.skew.expect("clap enforces the pair");
            let scale = args.scale.expect("clap enforces the pair");
            let id = format!("custom-n{size}-skew{skew}-scale{scale}");
            vec![(
                id,
                GenParams {
                    size,
                    skew,
                    scale,
                    location: args.location,
                    seed: derive_seed(seed, 0),
                },
            )]
        }
        None => grid_27(seed)
            .into_iter()
            .enumerate()
            .map(|(i, p)| (grid_dataset_id(i), p))
            .collect(),
    };

    let mut entries = Vec::new();
    let mut outputs = Vec::new();
    for (id, params) in &params_list {
        let data = generate_with_id(id.clone(), params)?;
        let file = format!("{id}.csv");
        write_csv(&data, &args.out.join(&file))?;
        entries.push(DatasetManifestEntry {
            id: id.clone(),
            file: file.clone(),
            params: *params,
        });
        outputs.push(file);
    }
    write_json(&entries, &args.out.join("datasets.json"))?;
    outputs.push("datasets.json".to_string());
    Manifest::write("gen-data", seed, &args.out, &outputs)?;
    println!(
        "wrote {} dataset(s) to {}",
        params_list.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// bench-utility
// ---------------------------------------------------------------------------

/// Fully resolved utility-run configuration; echoed as config.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityRunConfig {
    pub data_dir: Option<String>,
    /// Dataset ids from the data directory, or `path.csv[:column]` entries.
    pub datasets: Vec<String>,
    pub queries: Vec<String>,
    /// `None` means per-query default mechanism sets.
    pub mechanisms: Option<Vec<String>>,
    /// `None` means per-query default definitions.
    pub dp_definition: Option<String>,
    pub epsilons: Vec<f64>,
    pub n_runs: usize,
    pub seed: u64,
    pub bounds: String,
    pub round_count: bool,
    pub include_zero_values: bool,
    pub out: String,
}

#[derive(Args, Debug)]
pub struct BenchUtilityArgs {
    /// Baseline configuration file (as echoed by a previous run); explicit
    /// flags override individual fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Directory produced by gen-data.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Dataset selectors: ids from the data directory, `all`, or
    /// `path.csv[:column]`.
    #[arg(long, value_delimiter = ',')]
    pub datasets: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub queries: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub mechanisms: Option<Vec<String>>,
    #[arg(long = "dp-definition")]
    pub dp_definition: Option<String>,
    /// Explicit epsilon list (comma separated), strictly increasing.
    #[arg(long, value_delimiter = ',', conflicts_with = "grid")]
    pub epsilons: Option<Vec<f64>>,
    /// Use the standard 73-point grid.
    #[arg(long)]
    pub grid: bool,
    #[arg(long = "n-runs")]
    pub n_runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `actual` or `LO:HI`.
    #[arg(long)]
    pub bounds: Option<String>,
    /// Release counts without rounding to an integer.
    #[arg(long = "no-round-count")]
    pub no_round_count: bool,
    /// Count only non-zero records (reproduces a known library pitfall).
    #[arg(long = "exclude-zero-values")]
    pub exclude_zero_values: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn default_utility_config(seed: u64) -> UtilityRunConfig {
    UtilityRunConfig {
        data_dir: None,
        datasets: vec!["all".to_string()],
        queries: vec![
            "count".to_string(),
            "sum".to_string(),
            "mean".to_string(),
            "var".to_string(),
        ],
        mechanisms: None,
        dp_definition: None,
        epsilons: epsilon_grid().values().iter().map(|e| e.get()).collect(),
        n_runs: 500,
        seed,
        bounds: "actual".to_string(),
        round_count: true,
        include_zero_values: true,
        out: String::new(),
    }
}

pub fn bench_utility(args: BenchUtilityArgs) -> Result<()> {
    let base: Option<UtilityRunConfig> = match &args.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let seed = resolve_seed(args.seed, base.as_ref().map(|c| c.seed))?;
    let mut cfg = base.unwrap_or_else(|| default_utility_config(seed));
    cfg.seed = seed;
    if let Some(data) = &args.data {
        cfg.data_dir = Some(data.display().to_string());
    }
    if let Some(v) = args.datasets {
        cfg.datasets = v;
    }
    if let Some(v) = args.queries {
        cfg.queries = v;
    }
    if let Some(v) = args.mechanisms {
        cfg.mechanisms = Some(v);
    }
    if let Some(v) = args.dp_definition {
        cfg.dp_definition = Some(v);
    }
    if args.grid {
        cfg.epsilons = epsilon_grid().values().iter().map(|e| e.get()).collect();
    } else if let Some(v) = args.epsilons {
        cfg.epsilons = v;
    }
    if let Some(v) = args.n_runs {
        cfg.n_runs = v;
    }
    if let Some(v) = args.bounds {
        cfg.bounds = v;
    }
    if args.no_round_count {
        cfg.round_count = false;
    }
    if args.exclude_zero_values {
        cfg.include_zero_values = false;
    }
    if let Some(out) = &args.out {
        cfg.out = out.display().to_string();
    }
    if cfg.out.is_empty() {
        bail!("--out is required (or provide it via --config)");
    }

    let queries = parse_queries(&cfg.queries)?;
    let mechanisms = match &cfg.mechanisms {
        Some(names) => Some(parse_mechanisms(names)?),
        None => None,
    };
    let definition = cfg
        .dp_definition
        .as_deref()
        .map(parse_definition)
        .transpose()?;
    let grid = EpsilonGrid::from_values(&cfg.epsilons)?;
    let datasets = load_datasets(&cfg)?;

    let mut pairs = Vec::new();
    for &query in &queries {
        match &mechanisms {
            Some(ms) => pairs.extend(ms.iter().map(|&m| (query, m))),
            None => pairs.extend(default_mechanisms(query).into_iter().map(|m| (query, m))),
        }
    }

    let utility_cfg = UtilityConfig {
        n_runs: cfg.n_runs,
        master_seed: cfg.seed,
        bounds_policy: parse_bounds_policy(&cfg.bounds)?,
        definition,
        round_count: cfg.round_count,
        include_zero_values: cfg.include_zero_values,
    };
    let records = run_utility_pairs(&datasets, &pairs, &grid, &utility_cfg)?;

    let out_dir = PathBuf::from(&cfg.out);
    ensure_out_dir(&out_dir)?;
    let written = emit_report(&records, &out_dir.join("utility.csv"))?;
    write_json(&cfg, &out_dir.join("config.json"))?;
    let mut outputs: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    outputs.push("config.json".to_string());
    Manifest::write("bench-utility", cfg.seed, &out_dir, &outputs)?;
    println!(
        "wrote {} utility record(s) to {}",
        records.len(),
        out_dir.display()
    );
    Ok(())
}

fn load_datasets(cfg: &UtilityRunConfig) -> Result<Vec<Dataset>> {
    let mut selectors = cfg.datasets.clone();
    if selectors.iter().any(|s| s == "all") {
        let dir = cfg
            .data_dir
            .as_ref()
            .context("dataset selector 'all' needs --data")?;
        let entries: Vec<DatasetManifestEntry> = load_config(&Path::new(dir).join("datasets.json"))
            .context("cannot read datasets.json; run gen-data first")?;
        selectors = entries.into_iter().map(|e| e.id).collect();
    }
    let mut datasets = Vec::new();
    for selector in &selectors {
        datasets.push(load_one_dataset(cfg.data_dir.as_deref(), selector)?);
    }
    if datasets.is_empty() {
        bail!("no datasets selected");
    }
    Ok(datasets)
}

fn load_one_dataset(data_dir: Option<&str>, selector: &str) -> Result<Dataset> {
    let path_like = selector.contains('/') || selector.contains(".csv");
    if path_like {
        let (path, column) = match selector.rsplit_once(':') {
            Some((p, c)) if !c.is_empty() && p.contains(".csv") => (p.to_string(), c.to_string()),
            _ => (selector.to_string(), "value".to_string()),
        };
        return Ok(load_csv(Path::new(&path), &column)?);
    }
    let dir = data_dir.with_context(|| {
        format!("dataset id '{selector}' needs --data pointing at a gen-data directory")
    })?;
    let path = Path::new(dir).join(format!("{selector}.csv"));
    Ok(load_csv(&path, "value")?)
}

// ---------------------------------------------------------------------------
// bench-scale
// ---------------------------------------------------------------------------

/// Fully resolved scalability-run configuration; echoed as config.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleRunConfig {
    pub sizes: Vec<usize>,
    pub queries: Vec<String>,
    pub epsilons: Vec<f64>,
    pub runs: usize,
    pub seed: u64,
    pub memory_cap_bytes: u64,
    pub out: String,
}

#[derive(Args, Debug)]
pub struct BenchScaleArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub sizes: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub queries: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub epsilons: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Memory cap in GiB; larger sizes are skipped with a reason.
    #[arg(long = "memory-cap-gb")]
    pub memory_cap_gb: Option<f64>,
    /// Extend the default size sweep to 10^7 records.
    #[arg(long)]
    pub huge: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn bench_scale(args: BenchScaleArgs) -> Result<()> {
    let base: Option<ScaleRunConfig> = match &args.config {
        Some(path) => Some(load_config(path)?),
        None => None,
    };
    let seed = resolve_seed(args.seed, base.as_ref().map(|c| c.seed))?;
    let defaults = ScalabilityConfig::default();
    let mut cfg = base.unwrap_or_else(|| ScaleRunConfig {
        sizes: defaults.sizes.clone(),
        queries: defaults.queries.iter().map(|q| q.to_string()).collect(),
        epsilons: defaults.epsilons.clone(),
        runs: defaults.runs,
        seed,
        memory_cap_bytes: defaults.memory_cap_bytes,
        out: String::new(),
    });
    cfg.seed = seed;
    if let Some(v) = args.sizes {
        cfg.sizes = v;
    }
    if args.huge && !cfg.sizes.contains(&10_000_000) {
        cfg.sizes.push(10_000_000);
    }
    if let Some(v) = args.queries {
        cfg.queries = v;
    }
    if let Some(v) = args.epsilons {
        cfg.epsilons = v;
    }
    if let Some(v) = args.runs {
        cfg.runs = v;
    }
    if let Some(gb) = args.memory_cap_gb {
        cfg.memory_cap_bytes = (gb * 1024.0 * 1024.0 * 1024.0) as u64;
    }
    if let Some(out) = &args.out {
        cfg.out = out.display().to_string();
    }
    if cfg.out.is_empty() {
        bail!("--out is required (or provide it via --config)");
    }

    let scal_cfg = ScalabilityConfig {
        sizes: cfg.sizes.clone(),
        queries: parse_queries(&cfg.queries)?,
        epsilons: cfg.epsilons.clone(),
        runs: cfg.runs,
        memory_cap_bytes: cfg.memory_cap_bytes,
        master_seed: cfg.seed,
    };
    let outcomes = run_scalability(&scal_cfg)?;

    let out_dir = PathBuf::from(&cfg.out);
    ensure_out_dir(&out_dir)?;
    let written = emit_scalability(&outcomes, &out_dir.join("scalability.csv"))?;
    write_json(&cfg, &out_dir.join("config.json"))?;
    let mut outputs: Vec<String> = written
        .iter()
        .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
        .collect();
    outputs.push("config.json".to_string());
    Manifest::write("bench-scale", cfg.seed, &out_dir, &outputs)?;
    println!(
        "wrote {} scalability outcome(s) to {}",
        outcomes.len(),
        out_dir.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// dp-check
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct DpCheckArgs {
    /// Mechanism under test (laplace-pure, laplace-truncated,
    /// laplace-bounded-domain, laplace-folded, geometric-pure,
    /// geometric-truncated, snapping-laplace).
    #[arg(long)]
    pub mechanism: String,
    /// Declared epsilon to test against.
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    pub trials: usize,
    #[arg(long)]
    pub bins: Option<usize>,
    /// Test-only control: divide the noise scale by this factor while
    /// keeping the declared epsilon, to verify the tester catches it.
    #[arg(long)]
    pub undernoise: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Optional output directory for the JSON report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn dp_check(args: DpCheckArgs) -> Result<i32> {
    let seed = resolve_seed(args.seed, None)?;
    let declared = Epsilon::new(args.eps)?;
    let factor = args.undernoise.unwrap_or(1.0);
    if factor <= 0.0 || !factor.is_finite() {
        bail!("--undernoise must be a positive factor");
    }
    let true_eps = Epsilon::new(args.eps * factor)?;
    let mech: MechanismChoice = args.mechanism.parse()?;
    let mut cfg = DpTestConfig {
        trials: args.trials,
        ..Default::default()
    };
    if let Some(bins) = args.bins {
        cfg.bins = bins;
    }

    // Fixed test fixture: a [0, 20] range with inputs comfortably interior,
    // integer-valued for the geometric variants.
    let range = Bounds::new(0.0, 20.0).unwrap();
    let s = Sensitivity::new(1.0).unwrap();
    let sampler: MechSampler = match mech {
        MechanismChoice::LaplacePure => Box::new(move |v, rng| laplace_pure(v, s, true_eps, rng)),
        MechanismChoice::LaplaceTruncated => {
            Box::new(move |v, rng| laplace_truncated(v, s, true_eps, range, rng))
        }
        MechanismChoice::LaplaceBoundedDomain => {
            Box::new(move |v, rng| laplace_bounded_domain(v, s, true_eps, range, rng))
        }
        MechanismChoice::LaplaceFolded => {
            Box::new(move |v, rng| laplace_folded(v, s, true_eps, range, rng))
        }
        MechanismChoice::GeometricPure => {
            Box::new(move |v, rng| geometric_pure(v as i64, s, true_eps, rng).map(|z| z as f64))
        }
        MechanismChoice::GeometricTruncated => Box::new(move |v, rng| {
            geometric_truncated(v as i64, s, true_eps, range, rng).map(|z| z as f64)
        }),
        MechanismChoice::SnappingLaplace => {
            Box::new(move |v, rng| snapping_laplace(v, s, true_eps, 20.0, rng))
        }
        MechanismChoice::SumOverCount | MechanismChoice::Moments => {
            bail!("dp-check tests noise mechanisms, not query strategies")
        }
    };
    let base_value = if mech.name().starts_with("geometric") {
        9.0
    } else {
        9.5
    };
    let report = dp_statistical_test(
        mech.name(),
        sampler.as_ref(),
        base_value,
        1.0,
        declared,
        &cfg,
        RandomSource::new(seed),
    )?;
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(out) = &args.out {
        ensure_out_dir(out)?;
        std::fs::write(out.join("dp_check.json"), json + "\n")
            .with_context(|| format!("cannot write report under {}", out.display()))?;
        Manifest::write("dp-check", seed, out, &["dp_check.json".to_string()])?;
    }
    Ok(match report.verdict {
        Verdict::Pass => 0,
        Verdict::Fail => EXIT_DP_FAIL,
        Verdict::Inconclusive => EXIT_DP_INCONCLUSIVE,
    })
}

// ---------------------------------------------------------------------------
// query
// ---------------------------------------------------------------------------

#[derive(Args, Debug)]
pub struct QueryArgs {
    /// CSV dataset file.
    #[arg(long)]
    pub data: PathBuf,
    /// Column to read (defaults to the single-column layout of gen-data).
    #[arg(long, default_value = "value")]
    pub column: String,
    /// count | sum | mean | var | std
    #[arg(long)]
    pub query: String,
    #[arg(long)]
    pub eps: f64,
    /// `actual` or `LO:HI`.
    #[arg(long, default_value = "actual")]
    pub bounds: String,
    #[arg(long = "dp-definition")]
    pub dp_definition: Option<String>,
    /// Mechanism for count/sum queries.
    #[arg(long, default_value = "laplace-pure")]
    pub mechanism: String,
    /// direct | sum-over-count
    #[arg(long = "mean-strategy", default_value = "direct")]
    pub mean_strategy: String,
    /// direct | moments
    #[arg(long = "var-strategy", default_value = "moments")]
    pub var_strategy: String,
    /// Budget ledger file; persists across runs.
    #[arg(long)]
    pub ledger: PathBuf,
    /// Create a fresh ledger with this total budget (the file must not
    /// already exist).
    #[arg(long = "new-budget")]
    pub new_budget: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "no-round-count")]
    pub no_round_count: bool,
    #[arg(long = "exclude-zero-values")]
    pub exclude_zero_values: bool,
}

pub fn query(args: QueryArgs) -> Result<()> {
    let seed = resolve_seed(args.seed, None)?;
    let ledger = match args.new_budget {
        Some(total) => {
            if args.ledger.exists() {
                bail!(
                    "{} already exists; --new-budget refuses to overwrite a ledger",
                    args.ledger.display()
                );
            }
            let ledger = BudgetLedger::new(Epsilon::new(total)?)?;
            ledger.save(&args.ledger)?;
            ledger
        }
        None => BudgetLedger::load(&args.ledger)?,
    };
    let _lock = LedgerLock::acquire(&args.ledger)?;

    let data = load_csv(&args.data, &args.column)?;
    let kind: QueryKind = args.query.parse()?;
    let policy = parse_bounds_policy(&args.bounds)?;
    let definition = match &args.dp_definition {
        Some(d) => parse_definition(d)?,
        None => dpwb_core::harness::default_definition(kind),
    };
    let eps = Epsilon::new(args.eps)?;
    let mut rng = RandomSource::new(seed).rng();
    let count_opts = CountOptions {
        round_output: !args.no_round_count,
        include_zero_values: !args.exclude_zero_values,
    };

    let outcome: dpwb_core::Result<QueryResult> = (|| {
        let bounds = resolve_bounds(&data, &policy)?;
        match kind {
            QueryKind::Count => {
                let mech_choice: MechanismChoice = args.mechanism.parse()?;
                let spec = resolve_mechanism_spec(mech_choice, kind, data.len(), bounds)?;
                dp_count(&data, eps, &spec, count_opts, &ledger, &mut rng)
            }
            QueryKind::Sum => {
                let mech_choice: MechanismChoice = args.mechanism.parse()?;
                let spec = resolve_mechanism_spec(mech_choice, kind, data.len(), bounds)?;
                dp_sum(&data, bounds, eps, definition, &spec, &ledger, &mut rng)
            }
            QueryKind::Mean => {
                let strategy = match args.mean_strategy.as_str() {
                    "direct" => MeanStrategy::Direct,
                    "sum-over-count" => MeanStrategy::SumOverCount,
                    other => {
                        return Err(dpwb_core::Error::InvalidArgument(format!(
                            "unknown mean strategy '{other}'"
                        )))
                    }
                };
                dp_mean(&data, bounds, eps, definition, strategy, &ledger, &mut rng)
            }
            QueryKind::Var | QueryKind::Std => {
                let strategy = match args.var_strategy.as_str() {
                    "direct" => VarStrategy::Direct,
                    "moments" => VarStrategy::Moments,
                    other => {
                        return Err(dpwb_core::Error::InvalidArgument(format!(
                            "unknown var strategy '{other}'"
                        )))
                    }
                };
                if kind == QueryKind::Var {
                    dp_variance(&data, bounds, eps, definition, strategy, &ledger, &mut rng)
                } else {
                    dp_std(&data, bounds, eps, definition, strategy, &ledger, &mut rng)
                }
            }
        }
    })();

    // Persist the ledger in every case: accepted spends and the denied
    // audit trail both survive the process.
    ledger.save(&args.ledger)?;

    let result = outcome?;
    println!("value: {}", result.value);
    println!("epsilon_spent: {}", result.epsilon_spent);
    println!("remaining: {}", ledger.remaining());
    Ok(())
}
