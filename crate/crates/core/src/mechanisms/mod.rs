//! Calibrated-noise primitives.
//!
//! Each mechanism turns a deterministic value into an ε-differentially
//! private release by adding noise scaled to `sensitivity / epsilon`. The
//! Laplace family covers real-valued outputs, the two-sided geometric family
//! covers integer-valued outputs, and the snapping mechanism is the
//! floating-point-safe Laplace variant that clamps and rounds its output to a
//! power-of-two grid.
//!
//! All mechanisms are pure functions of `(inputs, rng)`: no hidden state, so
//! they can run on any number of threads given distinct RNG streams.
//!
//! The zero-sensitivity case is degenerate for every mechanism here: the
//! noise scale would be zero, so the (clamped) deterministic value is
//! returned directly, matching the distribution's limit.

mod geometric;
mod laplace;
mod snapping;

pub use geometric::{geometric_pure, geometric_truncated};
pub use laplace::{laplace_bounded_domain, laplace_folded, laplace_pure, laplace_truncated};
pub use snapping::{round_to_multiple, snapping_laplace, uniform_full_entropy};

use crate::error::{Error, Result};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Privacy parameter ε. Positive and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Epsilon(f64);

impl Epsilon {
    pub fn new(value: f64) -> Result<Self> {
        if value > 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!(
                "epsilon must be positive and finite, got {value}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// ℓ1-sensitivity Δf: the worst-case change of the query output when one
/// record changes. Non-negative and finite.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Sensitivity(f64);

impl Sensitivity {
    pub fn new(value: f64) -> Result<Self> {
        if value >= 0.0 && value.is_finite() {
            Ok(Self(value))
        } else {
            Err(Error::invalid(format!(
                "sensitivity must be non-negative and finite, got {value}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0.0
    }
}

/// A closed interval `[lower, upper]` used for clipping, truncation, and
/// sensitivity formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    lower: f64,
    upper: f64,
}

impl Bounds {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::invalid(format!(
                "bounds must be finite, got [{lower}, {upper}]"
            )));
        }
        if lower > upper {
            return Err(Error::invalid(format!(
                "bounds must satisfy lower <= upper, got [{lower}, {upper}]"
            )));
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    /// Largest magnitude among the two endpoints.
    pub fn max_abs(&self) -> f64 {
        self.lower.abs().max(self.upper.abs())
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lower, self.upper)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// True when both endpoints are exactly representable integers.
    pub fn is_integral(&self) -> bool {
        self.lower.fract() == 0.0 && self.upper.fract() == 0.0
    }
}

impl fmt::Display for Bounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.lower, self.upper)
    }
}

/// Discriminated choice of a noise mechanism together with the parameters it
/// needs. Variants that post-process into a range carry their bounds;
/// snapping carries its clamp radius `B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MechanismSpec {
    LaplacePure,
    LaplaceTruncated { bounds: Bounds },
    LaplaceBoundedDomain { bounds: Bounds },
    LaplaceFolded { bounds: Bounds },
    GeometricPure,
    GeometricTruncated { bounds: Bounds },
    SnappingLaplace { clamp_radius: f64 },
}

impl MechanismSpec {
    /// Short kebab-case name, used in reports and CLI selectors.
    pub fn name(&self) -> &'static str {
        match self {
            MechanismSpec::LaplacePure => "laplace-pure",
            MechanismSpec::LaplaceTruncated { .. } => "laplace-truncated",
            MechanismSpec::LaplaceBoundedDomain { .. } => "laplace-bounded-domain",
            MechanismSpec::LaplaceFolded { .. } => "laplace-folded",
            MechanismSpec::GeometricPure => "geometric-pure",
            MechanismSpec::GeometricTruncated { .. } => "geometric-truncated",
            MechanismSpec::SnappingLaplace { .. } => "snapping-laplace",
        }
    }

    /// True for mechanisms whose output distribution is supported on the
    /// integers (and therefore requires an integer-valued input).
    pub fn is_integer_valued(&self) -> bool {
        matches!(
            self,
            MechanismSpec::GeometricPure | MechanismSpec::GeometricTruncated { .. }
        )
    }

    /// Release `value` under this mechanism.
    ///
    /// Geometric variants demand an integer-valued input and produce an
    /// integer-valued output; everything else operates on reals.
    pub fn release<R: Rng + ?Sized>(
        &self,
        value: f64,
        sensitivity: Sensitivity,
        eps: Epsilon,
        rng: &mut R,
    ) -> Result<f64> {
        match self {
            MechanismSpec::LaplacePure => laplace_pure(value, sensitivity, eps, rng),
            MechanismSpec::LaplaceTruncated { bounds } => {
                laplace_truncated(value, sensitivity, eps, *bounds, rng)
            }
            MechanismSpec::LaplaceBoundedDomain { bounds } => {
                laplace_bounded_domain(value, sensitivity, eps, *bounds, rng)
            }
            MechanismSpec::LaplaceFolded { bounds } => {
                laplace_folded(value, sensitivity, eps, *bounds, rng)
            }
            MechanismSpec::GeometricPure => {
                let v = as_integer(value)?;
                Ok(geometric_pure(v, sensitivity, eps, rng)? as f64)
            }
            MechanismSpec::GeometricTruncated { bounds } => {
                let v = as_integer(value)?;
                Ok(geometric_truncated(v, sensitivity, eps, *bounds, rng)? as f64)
            }
            MechanismSpec::SnappingLaplace { clamp_radius } => {
                snapping_laplace(value, sensitivity, eps, *clamp_radius, rng)
            }
        }
    }
}

fn as_integer(value: f64) -> Result<i64> {
    if value.fract() != 0.0 || value.abs() >= 2f64.powi(63) {
        return Err(Error::invalid(format!(
            "geometric mechanisms require an integer-valued input, got {value}"
        )));
    }
    Ok(value as i64)
}

pub(crate) fn require_finite(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::invalid(format!(
            "{name} must be finite, got {value}"
        )))
    }
}
