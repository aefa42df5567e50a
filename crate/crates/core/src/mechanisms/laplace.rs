//! Laplace mechanism and its range-respecting variants.
//!
//! The base mechanism releases `value + Lap(0, b)` with `b = Δf/ε`. Three
//! post-processing variants keep the release inside a caller-supplied range:
//!
//! * truncated — out-of-range draws are mapped to the closest bound;
//! * bounded domain — draws are rejected until one falls within the range;
//! * folded — out-of-range draws are reflected across the violated bound
//!   (repeatedly) until they land inside.
//!
//! Truncation and folding are post-processing, so they preserve the ε
//! guarantee of the base mechanism. Plain rejection sampling does NOT: the
//! bounded-domain variant as implemented here satisfies a weaker guarantee
//! than the nominal ε unless the caller applies a corrective scale, which is
//! out of scope. It is provided because output-consistent releases (for
//! example non-negative variances) are worth benchmarking.

use super::{require_finite, Bounds, Epsilon, Sensitivity};
use crate::error::{Error, Result};
use rand::Rng;

/// Rejection-sampling retry cap for the bounded-domain variant. Bounds the
/// worst-case latency when the acceptance region carries almost no mass.
pub const REJECTION_RETRY_CAP: u64 = 1_000_000;

/// Draw from Lap(0, scale) by inverse CDF. `scale` must be positive.
fn laplace_noise<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    // u uniform in (0,1); the open endpoints keep ln() finite.
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let centered = u - 0.5;
    -scale * centered.signum() * (1.0 - 2.0 * centered.abs()).ln()
}

/// Release `value + Lap(0, Δf/ε)`. Unbiased: the expected output is `value`.
///
/// Zero sensitivity returns `value` unchanged (the scale-zero limit).
pub fn laplace_pure<R: Rng + ?Sized>(
    value: f64,
    sensitivity: Sensitivity,
    eps: Epsilon,
    rng: &mut R,
) -> Result<f64> {
    require_finite("value", value)?;
    if sensitivity.is_zero() {
        return Ok(value);
    }
    let scale = sensitivity.get() / eps.get();
    Ok(value + laplace_noise(scale, rng))
}

/// Laplace release mapped to the closest bound whenever the raw draw falls
/// outside `bounds`. The output always lies in `[lower, upper]`.
pub fn laplace_truncated<R: Rng + ?Sized>(
    value: f64,
    sensitivity: Sensitivity,
    eps: Epsilon,
    bounds: Bounds,
    rng: &mut R,
) -> Result<f64> {
    let raw = laplace_pure(value, sensitivity, eps, rng)?;
    Ok(bounds.clamp(raw))
}

/// Laplace release re-sampled until the draw lies within `bounds`.
///
/// Requires `lower < upper`. Fails with [`Error::NonConvergence`] after
/// [`REJECTION_RETRY_CAP`] attempts, which in practice means the value sits
/// so far outside the bounds relative to the noise scale that the acceptance
/// probability is negligible.
pub fn laplace_bounded_domain<R: Rng + ?Sized>(
    value: f64,
    sensitivity: Sensitivity,
    eps: Epsilon,
    bounds: Bounds,
    rng: &mut R,
) -> Result<f64> {
    require_finite("value", value)?;
    if bounds.width() <= 0.0 {
        return Err(Error::invalid(format!(
            "bounded-domain sampling needs lower < upper, got {bounds}"
        )));
    }
    if sensitivity.is_zero() {
        return Ok(bounds.clamp(value));
    }
    let scale = sensitivity.get() / eps.get();
    for _ in 0..REJECTION_RETRY_CAP {
        let draw = value + laplace_noise(scale, rng);
        if bounds.contains(draw) {
            return Ok(draw);
        }
    }
    Err(Error::NonConvergence {
        attempts: REJECTION_RETRY_CAP,
    })
}

/// Laplace release folded back into `bounds`: a draw outside the range is
/// reflected across the violated bound (`x -> 2*bound - x`) as many times as
/// needed. Requires `lower < upper`.
pub fn laplace_folded<R: Rng + ?Sized>(
    value: f64,
    sensitivity: Sensitivity,
    eps: Epsilon,
    bounds: Bounds,
    rng: &mut R,
) -> Result<f64> {
    if bounds.width() <= 0.0 {
        return Err(Error::invalid(format!(
            "folding needs lower < upper, got {bounds}"
        )));
    }
    let raw = laplace_pure(value, sensitivity, eps, rng)?;
    Ok(fold_into(raw, bounds))
}

/// Closed form of the repeated reflection: the triangle wave of period
/// `2*width` applied to `x - lower`. Identical to reflecting across the
/// violated bound until the point lands inside, but O(1) and immune to the
/// loss of significance that makes the iterative version loop on draws many
/// orders of magnitude beyond the range.
pub(crate) fn fold_into(x: f64, bounds: Bounds) -> f64 {
    let width = bounds.width();
    debug_assert!(width > 0.0);
    let t = (x - bounds.lower()).rem_euclid(2.0 * width);
    let y = if t <= width { t } else { 2.0 * width - t };
    bounds.lower() + y
}
