//! DP analytics queries: count, sum, mean, var, std.
//!
//! Every release first charges the budget ledger (quantized to the ledger's
//! micro-epsilon granularity), then draws noise calibrated with the charged
//! epsilon, so what the accountant records is exactly what the noise used.
//! Composite queries split their budget into exact micro-unit halves, which
//! keeps `ε/2 + ε/2 = ε` true in the ledger with integer arithmetic.
//!
//! Strategy notes:
//! * mean `Direct` is a single pure-Laplace release of the clipped mean;
//!   `SumOverCount` divides a noisy sum (ε/2) by a noisy count (ε/2) with
//!   the denominator floored at 1.
//! * var `Moments` releases DP means of X and X² (ε/2 each) and returns
//!   E[X²] - E[X]² clamped at 0; the clamp is post-processing.
//! * var `Direct` releases the true variance through the Laplace bounded
//!   domain mechanism over [0, ((u-l)/2)²], so its output is never negative.
//! * std is the square root of var: post-processing, no extra budget.

use crate::accountant::BudgetLedger;
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::{
    laplace_bounded_domain, laplace_pure, Bounds, Epsilon, MechanismSpec, Sensitivity,
};
use crate::sensitivity::{analytic_sensitivity, population_variance};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Which neighboring relation the sensitivity calibration assumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DpDefinition {
    /// Neighbors replace one record; the dataset size is public.
    Bounded,
    /// Neighbors add or remove one record.
    Unbounded,
}

impl fmt::Display for DpDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DpDefinition::Bounded => "bounded",
            DpDefinition::Unbounded => "unbounded",
        })
    }
}

impl FromStr for DpDefinition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bounded" => Ok(DpDefinition::Bounded),
            "unbounded" => Ok(DpDefinition::Unbounded),
            other => Err(Error::invalid(format!(
                "unknown DP definition '{other}' (expected bounded|unbounded)"
            ))),
        }
    }
}

/// The analytics queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueryKind {
    Count,
    Sum,
    Mean,
    Var,
    /// Square root of the var release; post-processing of `Var`.
    Std,
}

impl QueryKind {
    pub const ALL: [QueryKind; 5] = [
        QueryKind::Count,
        QueryKind::Sum,
        QueryKind::Mean,
        QueryKind::Var,
        QueryKind::Std,
    ];
}

impl fmt::Display for QueryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryKind::Count => "count",
            QueryKind::Sum => "sum",
            QueryKind::Mean => "mean",
            QueryKind::Var => "var",
            QueryKind::Std => "std",
        })
    }
}

impl FromStr for QueryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "count" => Ok(QueryKind::Count),
            "sum" => Ok(QueryKind::Sum),
            "mean" => Ok(QueryKind::Mean),
            "var" => Ok(QueryKind::Var),
            "std" => Ok(QueryKind::Std),
            other => Err(Error::invalid(format!(
                "unknown query '{other}' (expected count|sum|mean|var|std)"
            ))),
        }
    }
}

/// How the mean query is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanStrategy {
    /// Single Laplace release of the clipped mean.
    Direct,
    /// Noisy sum over noisy count, ε/2 each, denominator floored at 1.
    SumOverCount,
}

/// How the var query is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarStrategy {
    /// Laplace bounded domain release of the true variance; output >= 0.
    Direct,
    /// E[X²] - E[X]² from two DP means, clamped at 0.
    Moments,
}

/// One DP release with its privacy bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryResult {
    pub value: f64,
    /// Exactly the sum of the ledger charges this release caused.
    pub epsilon_spent: f64,
    /// The mechanism behind the release; composite queries report the
    /// mechanism of their magnitude-dominant sub-release.
    pub mechanism: MechanismSpec,
    pub definition: DpDefinition,
}

/// Flags of the count query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountOptions {
    /// Round the release to the nearest integer and clamp at 0.
    pub round_output: bool,
    /// When false, count only non-zero records. This reproduces a known
    /// count-as-conditional-sum pitfall for study; leave it true for a real
    /// record count.
    pub include_zero_values: bool,
}

impl Default for CountOptions {
    fn default() -> Self {
        Self {
            round_output: true,
            include_zero_values: true,
        }
    }
}

/// Map every record into `bounds`; length and order preserved.
pub fn clip(data: &Dataset, bounds: Bounds) -> Dataset {
    let clipped = data.records().iter().map(|&r| bounds.clamp(r)).collect();
    Dataset::with_provenance(data.id().to_string(), clipped, data.provenance().clone())
}

/// Deterministic count baseline.
pub fn true_count(data: &Dataset, include_zero_values: bool) -> f64 {
    if include_zero_values {
        data.len() as f64
    } else {
        data.records().iter().filter(|&&r| r != 0.0).count() as f64
    }
}

/// Deterministic sum of already-clipped records.
pub fn true_sum(records: &[f64]) -> f64 {
    records.iter().sum()
}

pub fn true_mean(records: &[f64]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::invalid("mean of an empty dataset is undefined"));
    }
    Ok(true_sum(records) / records.len() as f64)
}

/// Population (not sample) variance, the deterministic var baseline.
pub fn true_variance(records: &[f64]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::invalid("variance needs at least 2 records"));
    }
    Ok(population_variance(records))
}

/// DP count: releases a noisy record count with sensitivity 1.
pub fn dp_count<R: Rng + ?Sized>(
    data: &Dataset,
    eps: Epsilon,
    mech: &MechanismSpec,
    opts: CountOptions,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    count_inner(data, eps, mech, opts, ledger, "count", rng)
}

fn count_inner<R: Rng + ?Sized>(
    data: &Dataset,
    eps: Epsilon,
    mech: &MechanismSpec,
    opts: CountOptions,
    ledger: &BudgetLedger,
    descriptor: &str,
    rng: &mut R,
) -> Result<QueryResult> {
    let base = true_count(data, opts.include_zero_values);
    let charged = ledger.try_spend(eps, descriptor)?;
    let sensitivity = Sensitivity::new(1.0)?;
    let mut value = mech.release(base, sensitivity, charged, rng)?;
    if opts.round_output {
        value = value.round().max(0.0);
    }
    Ok(QueryResult {
        value,
        epsilon_spent: charged.get(),
        mechanism: *mech,
        definition: DpDefinition::Unbounded,
    })
}

/// DP sum: clips internally, then releases the clipped sum with the
/// analytic sum sensitivity for `definition`.
pub fn dp_sum<R: Rng + ?Sized>(
    data: &Dataset,
    bounds: Bounds,
    eps: Epsilon,
    definition: DpDefinition,
    mech: &MechanismSpec,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    sum_inner(data, bounds, eps, definition, mech, ledger, "sum", rng)
}

#[allow(clippy::too_many_arguments)]
fn sum_inner<R: Rng + ?Sized>(
    data: &Dataset,
    bounds: Bounds,
    eps: Epsilon,
    definition: DpDefinition,
    mech: &MechanismSpec,
    ledger: &BudgetLedger,
    descriptor: &str,
    rng: &mut R,
) -> Result<QueryResult> {
    let clipped = clip(data, bounds);
    let base = true_sum(clipped.records());
    let sensitivity = analytic_sensitivity(QueryKind::Sum, bounds, data.len().max(1), definition)?;
    let charged = ledger.try_spend(eps, descriptor)?;
    let value = mech.release(base, sensitivity, charged, rng)?;
    Ok(QueryResult {
        value,
        epsilon_spent: charged.get(),
        mechanism: *mech,
        definition,
    })
}

/// DP mean. `Direct` needs a non-empty dataset. Spends exactly `eps` under
/// either strategy (two ledger entries for `SumOverCount`).
pub fn dp_mean<R: Rng + ?Sized>(
    data: &Dataset,
    bounds: Bounds,
    eps: Epsilon,
    definition: DpDefinition,
    strategy: MeanStrategy,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    mean_inner(data, bounds, eps, definition, strategy, ledger, "mean", rng)
}

#[allow(clippy::too_many_arguments)]
fn mean_inner<R: Rng + ?Sized>(
    data: &Dataset,
    bounds: Bounds,
    eps: Epsilon,
    definition: DpDefinition,
    strategy: MeanStrategy,
    ledger: &BudgetLedger,
    descriptor: &str,
    rng: &mut R,
) -> Result<QueryResult> {
    match strategy {
        MeanStrategy::Direct => {
            if data.is_empty() {
                return Err(Error::invalid("direct mean needs at least 1 record"));
            }
            let clipped = clip(data, bounds);
            let base = true_mean(clipped.records())?;
            let sensitivity =
                analytic_sensitivity(QueryKind::Mean, bounds, data.len(), definition)?;
            let charged = ledger.try_spend(eps, descriptor)?;
            let value = laplace_pure(base, sensitivity, charged, rng)?;
            Ok(QueryResult {
                value,
                epsilon_spent: charged.get(),
                mechanism: MechanismSpec::LaplacePure,
                definition,
            })
        }
        MeanStrategy::SumOverCount => {
            let (eps_sum, eps_count) = split_half(eps)?;
            let sum = sum_inner(
                data,
                bounds,
                eps_sum,
                definition,
                &MechanismSpec::LaplacePure,
                ledger,
                &format!("{descriptor}/sum"),
                rng,
            )?;
            let count = count_inner(
                data,
                eps_count,
                &MechanismSpec::LaplacePure,
                CountOptions::default(),
                ledger,
                &format!("{descriptor}/count"),
                rng,
            )?;
            let denominator = count.value.max(1.0);
            Ok(QueryResult {
                value: sum.value / denominator,
                epsilon_spent: sum.epsilon_spent + count.epsilon_spent,
                mechanism: MechanismSpec::LaplacePure,
                definition,
            })
        }
    }
}

/// DP variance over at least 2 records.
pub fn dp_variance<R: Rng + ?Sized>(
    data: &Dataset,
    bounds: Bounds,
    eps: Epsilon,
    definition: DpDefinition,
    strategy: VarStrategy,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    if data.len() < 2 {
        return Err(Error::invalid("variance needs at least 2 records"));
    }
    match strategy {
        VarStrategy::Moments => {
            let (eps_first, eps_second) = split_half(eps)?;
            let clipped = clip(data, bounds);
            let mean_x = mean_inner(
                &clipped,
                bounds,
                eps_first,
                definition,
                MeanStrategy::Direct,
                ledger,
                "var/mean",
                rng,
            )?;
            let squares = Dataset::from_records(
                format!("{}^2", data.id()),
                clipped.records().iter().map(|&x| x * x).collect(),
            )?;
            let sq_bounds = squared_bounds(bounds)?;
            let mean_x2 = mean_inner(
                &squares,
                sq_bounds,
                eps_second,
                definition,
                MeanStrategy::Direct,
                ledger,
                "var/mean-of-squares",
                rng,
            )?;
            let value = (mean_x2.value - mean_x.value * mean_x.value).max(0.0);
            Ok(QueryResult {
                value,
                epsilon_spent: mean_x.epsilon_spent + mean_x2.epsilon_spent,
                mechanism: MechanismSpec::LaplacePure,
                definition,
            })
        }
        VarStrategy::Direct => {
            let clipped = clip(data, bounds);
            let base = true_variance(clipped.records())?;
            let sensitivity = analytic_sensitivity(QueryKind::Var, bounds, data.len(), definition)?;
            let half_width = bounds.width() / 2.0;
            let domain = Bounds::new(0.0, half_width * half_width)?;
            let charged = ledger.try_spend(eps, "var")?;
            // Degenerate range: the variance is identically 0 and the
            // rejection domain is a single point.
            let value = if sensitivity.is_zero() || domain.width() == 0.0 {
                domain.clamp(base)
            } else {
                laplace_bounded_domain(base, sensitivity, charged, domain, rng)?
            };
            Ok(QueryResult {
                value,
                epsilon_spent: charged.get(),
                mechanism: MechanismSpec::LaplaceBoundedDomain { bounds: domain },
                definition,
            })
        }
    }
}

/// DP standard deviation: square root of the var release. Post-processing,
/// so it spends exactly the variance's budget.
pub fn dp_std<R: Rng + ?Sized>(
    data: &Dataset,
    bounds: Bounds,
    eps: Epsilon,
    definition: DpDefinition,
    strategy: VarStrategy,
    ledger: &BudgetLedger,
    rng: &mut R,
) -> Result<QueryResult> {
    let var = dp_variance(data, bounds, eps, definition, strategy, ledger, rng)?;
    Ok(QueryResult {
        value: var.value.max(0.0).sqrt(),
        ..var
    })
}

/// Exact micro-unit split of `eps` into two halves whose ledger charges sum
/// to the ledger charge of `eps` itself.
fn split_half(eps: Epsilon) -> Result<(Epsilon, Epsilon)> {
    let micro = crate::accountant::epsilon_to_micro(eps)?;
    let first = micro / 2;
    let second = micro - first;
    if first == 0 {
        return Err(Error::invalid(format!(
            "epsilon {} is too small to split across two releases",
            eps.get()
        )));
    }
    Ok((
        Epsilon::new(crate::accountant::micro_to_epsilon(first))?,
        Epsilon::new(crate::accountant::micro_to_epsilon(second))?,
    ))
}

/// Range of x² when x ranges over `bounds`.
fn squared_bounds(bounds: Bounds) -> Result<Bounds> {
    let l = bounds.lower();
    let u = bounds.upper();
    let hi = (l * l).max(u * u);
    let lo = if l <= 0.0 && u >= 0.0 {
        0.0
    } else {
        (l * l).min(u * u)
    };
    Bounds::new(lo, hi)
}
