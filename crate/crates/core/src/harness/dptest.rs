//! Stochastic ε-DP tester.
//!
//! The ε guarantee says that for any output set S,
//! Pr[M(v) ∈ S] <= e^ε Pr[M(v') ∈ S] for inputs v, v' at sensitivity
//! distance Δf. The tester draws `trials` releases at v and at v + Δf,
//! histograms both into shared equal-width bins, and brackets the worst
//! per-bin log-probability ratio with Clopper-Pearson confidence bounds:
//!
//! * FAIL when even the conservative lower bound of some bin's ratio
//!   exceeds ε — the guarantee is refuted at high confidence. All bins
//!   participate, including the overflow tails.
//! * PASS when the optimistic upper bound of every in-range bin stays below
//!   ε * pass_margin — the observed behavior is consistent with the claim.
//!   Tail overflow bins are excluded from this check because no finite
//!   sample can bound ratios in regions it barely visits.
//! * INCONCLUSIVE otherwise (typically: not enough trials for the claimed ε).
//!
//! A pass is a calibration statement, not a proof: a mechanism can only be
//! refuted by sampling, never verified. Declaring a larger ε than the true
//! cost passes by design, since ε is an upper bound on privacy loss.

use crate::error::{Error, Result};
use crate::mechanisms::Epsilon;
use crate::rng::{RandomSource, SourceRng};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Beta, ContinuousCDF};

/// Tester tuning knobs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DpTestConfig {
    pub trials: usize,
    /// Number of equal-width bins between the trim quantiles (two overflow
    /// bins are added outside).
    pub bins: usize,
    /// Pooled-sample quantile trimmed off each side when placing the bins.
    pub trim: f64,
    /// One-sided Clopper-Pearson level for the refutation bound.
    pub alpha_fail: f64,
    /// One-sided Clopper-Pearson level for the pass bound.
    pub alpha_pass: f64,
    /// Pass when the upper bound stays below ε * pass_margin.
    pub pass_margin: f64,
}

impl Default for DpTestConfig {
    fn default() -> Self {
        Self {
            trials: 1_000_000,
            bins: 12,
            trim: 0.10,
            alpha_fail: 1e-5,
            alpha_pass: 0.05,
            pass_margin: 1.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

/// Outcome of one tester invocation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DpTestReport {
    pub mechanism: String,
    pub epsilon_claimed: f64,
    /// Largest |log(p̂1/p̂2)| over bins where both histograms have mass.
    pub max_observed_log_ratio: f64,
    /// Confidence lower bound on the worst ratio; > ε refutes the claim.
    pub fail_lower_bound: f64,
    /// Confidence upper bound on the worst in-range ratio; must undercut
    /// ε * pass_margin for a pass. Infinite when some in-range bin is
    /// one-sided.
    pub pass_upper_bound: f64,
    pub verdict: Verdict,
    pub trials: usize,
    pub bins_used: usize,
}

/// Run the stochastic tester on `mechanism`, a pure sampler of a release
/// given an input value and an RNG. Draws are taken at `base_value` and at
/// `base_value + delta_f`.
pub fn dp_statistical_test<F>(
    label: &str,
    mechanism: F,
    base_value: f64,
    delta_f: f64,
    eps: Epsilon,
    cfg: &DpTestConfig,
    source: RandomSource,
) -> Result<DpTestReport>
where
    F: Fn(f64, &mut SourceRng) -> Result<f64>,
{
    if cfg.trials < 100 {
        return Err(Error::invalid("the tester needs at least 100 trials"));
    }
    if cfg.bins < 2 {
        return Err(Error::invalid("the tester needs at least 2 bins"));
    }
    if !(delta_f > 0.0 && delta_f.is_finite()) {
        return Err(Error::invalid("delta_f must be positive and finite"));
    }
    let mut rng_a = source.substream(1).rng();
    let mut rng_b = source.substream(2).rng();
    let mut samples_a = Vec::with_capacity(cfg.trials);
    let mut samples_b = Vec::with_capacity(cfg.trials);
    for _ in 0..cfg.trials {
        samples_a.push(mechanism(base_value, &mut rng_a)?);
        samples_b.push(mechanism(base_value + delta_f, &mut rng_b)?);
    }

    let (lo, hi) = trimmed_range(&samples_a, &samples_b, cfg.trim);
    if hi <= lo {
        // everything collapsed onto one point; no ratio evidence either way
        return Ok(DpTestReport {
            mechanism: label.to_string(),
            epsilon_claimed: eps.get(),
            max_observed_log_ratio: 0.0,
            fail_lower_bound: 0.0,
            pass_upper_bound: f64::INFINITY,
            verdict: Verdict::Inconclusive,
            trials: cfg.trials,
            bins_used: 0,
        });
    }

    // bins: [underflow] [bins equal-width over [lo, hi)] [overflow]
    let total_bins = cfg.bins + 2;
    let width = (hi - lo) / cfg.bins as f64;
    let index_of = |x: f64| -> usize {
        if x < lo {
            0
        } else if x >= hi {
            total_bins - 1
        } else {
            1 + (((x - lo) / width) as usize).min(cfg.bins - 1)
        }
    };
    let mut counts_a = vec![0u64; total_bins];
    let mut counts_b = vec![0u64; total_bins];
    for &x in &samples_a {
        counts_a[index_of(x)] += 1;
    }
    for &x in &samples_b {
        counts_b[index_of(x)] += 1;
    }

    let n = cfg.trials as u64;
    let mut max_observed: f64 = 0.0;
    let mut fail_lower: f64 = 0.0;
    let mut pass_upper: f64 = 0.0;
    let mut bins_used = 0usize;
    for bin in 0..total_bins {
        let (ca, cb) = (counts_a[bin], counts_b[bin]);
        if ca == 0 && cb == 0 {
            continue; // no mass observed here under either input
        }
        bins_used += 1;
        if ca > 0 && cb > 0 {
            let ratio = ((ca as f64) / (cb as f64)).ln().abs();
            max_observed = max_observed.max(ratio);
        }
        // refutation bound: conservative in both directions
        let fail_a = safe_log_ratio(
            cp_lower(ca, n, cfg.alpha_fail),
            cp_upper(cb, n, cfg.alpha_fail),
        );
        let fail_b = safe_log_ratio(
            cp_lower(cb, n, cfg.alpha_fail),
            cp_upper(ca, n, cfg.alpha_fail),
        );
        fail_lower = fail_lower.max(fail_a).max(fail_b);
        // pass bound: only over the central region the sample actually covers
        let in_range = bin > 0 && bin < total_bins - 1;
        if in_range {
            let up_a = safe_log_ratio(
                cp_upper(ca, n, cfg.alpha_pass),
                cp_lower(cb, n, cfg.alpha_pass),
            );
            let up_b = safe_log_ratio(
                cp_upper(cb, n, cfg.alpha_pass),
                cp_lower(ca, n, cfg.alpha_pass),
            );
            pass_upper = pass_upper.max(up_a).max(up_b);
        }
    }

    if bins_used == 0 {
        return Ok(DpTestReport {
            mechanism: label.to_string(),
            epsilon_claimed: eps.get(),
            max_observed_log_ratio: 0.0,
            fail_lower_bound: 0.0,
            pass_upper_bound: f64::INFINITY,
            verdict: Verdict::Inconclusive,
            trials: cfg.trials,
            bins_used,
        });
    }

    let verdict = if fail_lower > eps.get() {
        Verdict::Fail
    } else if pass_upper <= eps.get() * cfg.pass_margin {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    };
    Ok(DpTestReport {
        mechanism: label.to_string(),
        epsilon_claimed: eps.get(),
        max_observed_log_ratio: max_observed,
        fail_lower_bound: fail_lower,
        pass_upper_bound: pass_upper,
        verdict,
        trials: cfg.trials,
        bins_used,
    })
}

fn trimmed_range(a: &[f64], b: &[f64], trim: f64) -> (f64, f64) {
    let mut pooled: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
    pooled.sort_by(|x, y| x.total_cmp(y));
    let n = pooled.len();
    let lo_idx = ((n as f64) * trim) as usize;
    let hi_idx = (((n as f64) * (1.0 - trim)) as usize).min(n - 1);
    (pooled[lo_idx], pooled[hi_idx])
}

fn safe_log_ratio(numerator: f64, denominator: f64) -> f64 {
    if numerator <= 0.0 {
        return 0.0; // nothing provable from an empty numerator
    }
    if denominator <= 0.0 {
        return f64::INFINITY;
    }
    (numerator / denominator).ln()
}

/// One-sided Clopper-Pearson lower bound for a binomial proportion.
fn cp_lower(successes: u64, trials: u64, alpha: f64) -> f64 {
    if successes == 0 {
        return 0.0;
    }
    if successes >= trials {
        return (alpha).powf(1.0 / trials as f64);
    }
    let beta = Beta::new(successes as f64, (trials - successes + 1) as f64)
        .expect("valid beta parameters");
    beta.inverse_cdf(alpha)
}

/// One-sided Clopper-Pearson upper bound for a binomial proportion.
fn cp_upper(successes: u64, trials: u64, alpha: f64) -> f64 {
    if successes >= trials {
        return 1.0;
    }
    let beta = Beta::new((successes + 1) as f64, (trials - successes) as f64)
        .expect("valid beta parameters");
    beta.inverse_cdf(1.0 - alpha)
}
