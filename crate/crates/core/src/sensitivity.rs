//! ℓ1-sensitivity: analytic formulas per (query, DP definition) and an
//! empirical sensitivity sampler.
//!
//! The analytic formulas follow the standard conventions:
//!
//! * bounded DP — neighbors replace one record, the dataset size n is fixed;
//! * unbounded DP — neighbors add or remove one record. The mean under
//!   unbounded DP uses the scaled-sum form `sum/n` with the denominator held
//!   fixed, which yields `max(|lower|, |upper|)/n`.
//!
//! The sampler estimates sensitivity empirically in the random-DP style: it
//! draws `m` pairs of neighboring datasets by resampling the provided data,
//! computes `|f(D) - f(D')|` for each pair, and returns the ⌈m(1-γ)⌉-th
//! order statistic. The resulting guarantee holds with probability 1-γ, not
//! with certainty. Neighbor pairs are drawn by empirical resampling from the
//! given dataset, a modeling assumption documented here because the
//! underlying sampling distribution is in principle the analyst's choice.

use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::{Bounds, Sensitivity};
use crate::queries::{DpDefinition, QueryKind};
use rand::Rng;

/// Configuration of the empirical sensitivity sampler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    /// Random-DP confidence slack γ in (0, 1): the estimate covers the true
    /// sensitivity with probability about 1-γ.
    pub gamma: f64,
    /// Number of neighboring pairs to draw. Must satisfy m >= ceil(1/γ).
    pub m: usize,
    /// Size of each resampled dataset.
    pub resample_size: usize,
}

impl SamplerConfig {
    pub fn new(gamma: f64, m: usize, resample_size: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::invalid(format!(
                "gamma must lie in (0,1), got {gamma}"
            )));
        }
        let min_m = (1.0 / gamma).ceil() as usize;
        if m < min_m {
            return Err(Error::invalid(format!(
                "m = {m} is below ceil(1/gamma) = {min_m}"
            )));
        }
        if resample_size == 0 {
            return Err(Error::invalid("resample_size must be positive"));
        }
        Ok(Self {
            gamma,
            m,
            resample_size,
        })
    }

    /// Defaults: γ = 0.1, m = 1000, resample size equal to the base dataset.
    pub fn defaults(base_len: usize) -> Result<Self> {
        Self::new(0.1, 1000, base_len.max(1))
    }
}

/// Analytic ℓ1-sensitivity of `query` over data clipped to `bounds`.
///
/// Supported pairs:
///
/// | query | bounded                  | unbounded               |
/// |-------|--------------------------|-------------------------|
/// | count | 1                        | 1                       |
/// | sum   | u - l                    | max(\|l\|, \|u\|)       |
/// | mean  | (u - l)/n                | max(\|l\|, \|u\|)/n     |
/// | var   | (u - l)^2 (n-1)/n^2      | unsupported             |
///
/// Std shares the var query's release and therefore its sensitivity; ask for
/// `Var` instead.
pub fn analytic_sensitivity(
    query: QueryKind,
    bounds: Bounds,
    n: usize,
    definition: DpDefinition,
) -> Result<Sensitivity> {
    if n == 0 {
        return Err(Error::invalid("dataset size n must be at least 1"));
    }
    let width = bounds.width();
    let max_abs = bounds.max_abs();
    let n_f = n as f64;
    let value = match (query, definition) {
        (QueryKind::Count, _) => 1.0,
        (QueryKind::Sum, DpDefinition::Bounded) => width,
        (QueryKind::Sum, DpDefinition::Unbounded) => max_abs,
        (QueryKind::Mean, DpDefinition::Bounded) => width / n_f,
        (QueryKind::Mean, DpDefinition::Unbounded) => max_abs / n_f,
        (QueryKind::Var, DpDefinition::Bounded) => width * width * (n_f - 1.0) / (n_f * n_f),
        (QueryKind::Var, DpDefinition::Unbounded) | (QueryKind::Std, _) => {
            return Err(Error::NotImplemented(format!(
                "no analytic sensitivity for ({query}, {definition}); supported: \
                 count (both), sum (both), mean (both), var (bounded)"
            )));
        }
    };
    Sensitivity::new(value)
}

/// Empirical sensitivity estimate in the random-DP style.
///
/// Draws `config.m` neighboring pairs: each pair resamples
/// `config.resample_size` records with replacement from `base_data`, and the
/// neighbor replaces one record (uniform position) with a fresh resample.
/// Returns the ⌈m(1-γ)⌉-th smallest of the observed |f(D) - f(D')|.
///
/// Count is rejected deterministically: a count release does not depend on
/// the record values, so resampled "neighbors" are indistinguishable to it
/// and the estimate would be a meaningless 0.
pub fn sample_sensitivity<R: Rng + ?Sized>(
    query: QueryKind,
    base_data: &Dataset,
    config: &SamplerConfig,
    rng: &mut R,
) -> Result<Sensitivity> {
    if query == QueryKind::Count {
        return Err(Error::invalid(
            "the sensitivity sampler does not support count queries; \
             use the analytic sensitivity of 1",
        ));
    }
    let base = base_data.records();
    if base.len() < 2 {
        return Err(Error::invalid(
            "sensitivity sampling needs at least 2 base records",
        ));
    }
    let f = deterministic_query(query)?;
    let k = config.resample_size;
    let mut diffs = Vec::with_capacity(config.m);
    let mut sample = vec![0.0f64; k];
    for _ in 0..config.m {
        for slot in sample.iter_mut() {
            *slot = base[rng.random_range(0..base.len())];
        }
        let before = f(&sample);
        let replace_at = rng.random_range(0..k);
        let old = sample[replace_at];
        sample[replace_at] = base[rng.random_range(0..base.len())];
        let after = f(&sample);
        sample[replace_at] = old;
        diffs.push((before - after).abs());
    }
    diffs.sort_by(|a, b| a.total_cmp(b));
    let rank = order_statistic_rank(config.m, config.gamma);
    Sensitivity::new(diffs[rank - 1])
}

/// 1-indexed rank of the returned order statistic: ⌈m(1-γ)⌉.
pub fn order_statistic_rank(m: usize, gamma: f64) -> usize {
    ((m as f64) * (1.0 - gamma)).ceil().max(1.0) as usize
}

fn deterministic_query(query: QueryKind) -> Result<fn(&[f64]) -> f64> {
    Ok(match query {
        QueryKind::Sum => |d: &[f64]| d.iter().sum(),
        QueryKind::Mean => |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64,
        QueryKind::Var => population_variance,
        QueryKind::Std => |d: &[f64]| population_variance(d).sqrt(),
        QueryKind::Count => unreachable!("rejected above"),
    })
}

pub(crate) fn population_variance(d: &[f64]) -> f64 {
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    d.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
}
