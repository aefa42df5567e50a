//! Two-sided geometric mechanism: the discrete Laplace analog.
//!
//! Adds integer noise Z with P(Z = k) = ((1-α)/(1+α)) α^|k| where
//! α = exp(-ε/Δf). Because the distribution is supported on the integers it
//! satisfies ε-DP with equality for integer-valued queries (tighter than the
//! continuous Laplace) and has no floating-point side channel in its output.
//!
//! Z is sampled as the difference of two i.i.d. geometric variables, which
//! realizes the two-sided law exactly:
//! P(G1 - G2 = k) = (1-α)^2/(1-α^2) * α^|k| = (1-α)/(1+α) * α^|k|.

use super::{Bounds, Epsilon, Sensitivity};
use crate::error::{Error, Result};
use rand::Rng;

fn check_integer_sensitivity(sensitivity: Sensitivity) -> Result<()> {
    let s = sensitivity.get();
    if s.fract() != 0.0 || s < 1.0 {
        return Err(Error::invalid(format!(
            "geometric mechanisms require a positive integer sensitivity, got {s}"
        )));
    }
    Ok(())
}

/// Number of failures before the first success of a Bernoulli(1-α) trial,
/// by inversion: P(G >= k) = α^k.
fn geometric<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> i64 {
    if alpha <= 0.0 {
        return 0;
    }
    let u = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    (u.ln() / alpha.ln()).floor() as i64
}

/// Release `value + Z` with Z two-sided geometric calibrated to
/// `(sensitivity, eps)`. E[Z] = 0; the output is always an integer.
///
/// `sensitivity` must be a positive integer. The scale-zero limit (huge ε)
/// degenerates to Z = 0.
pub fn geometric_pure<R: Rng + ?Sized>(
    value: i64,
    sensitivity: Sensitivity,
    eps: Epsilon,
    rng: &mut R,
) -> Result<i64> {
    check_integer_sensitivity(sensitivity)?;
    let alpha = (-eps.get() / sensitivity.get()).exp();
    let z = geometric(alpha, rng).saturating_sub(geometric(alpha, rng));
    Ok(value.saturating_add(z))
}

/// Geometric release mapped to the closest bound when it falls outside
/// `bounds`. Both bounds must be integer-valued.
pub fn geometric_truncated<R: Rng + ?Sized>(
    value: i64,
    sensitivity: Sensitivity,
    eps: Epsilon,
    bounds: Bounds,
    rng: &mut R,
) -> Result<i64> {
    if !bounds.is_integral() {
        return Err(Error::invalid(format!(
            "geometric truncation requires integer bounds, got {bounds}"
        )));
    }
    let raw = geometric_pure(value, sensitivity, eps, rng)?;
    Ok(raw.clamp(bounds.lower() as i64, bounds.upper() as i64))
}
