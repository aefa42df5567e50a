//! The 73-point ε grid.

use crate::error::{Error, Result};
use crate::mechanisms::Epsilon;

/// Strictly increasing list of ε values for a benchmark sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonGrid {
    values: Vec<Epsilon>,
}

impl EpsilonGrid {
    /// Build a grid from raw values; they must be valid epsilons in strictly
    /// increasing order.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("epsilon grid must not be empty"));
        }
        let mut out = Vec::with_capacity(values.len());
        for (i, &v) in values.iter().enumerate() {
            let eps = Epsilon::new(v)?;
            if i > 0 && values[i - 1] >= v {
                return Err(Error::invalid(format!(
                    "epsilon grid must be strictly increasing, violated at index {i}"
                )));
            }
            out.push(eps);
        }
        Ok(Self { values: out })
    }

    pub fn values(&self) -> &[Epsilon] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The standard 73-value grid: 50 linear steps 0.01, 0.02, .., 0.50, then 23
/// geometric steps g_i = 0.5 * 200^(i/23) ending at exactly 100.
pub fn epsilon_grid() -> EpsilonGrid {
    let mut values = Vec::with_capacity(73);
    for i in 1..=50u32 {
        values.push(i as f64 / 100.0);
    }
    for i in 1..=23u32 {
        if i == 23 {
            values.push(100.0);
        } else {
            values.push(0.5 * 200f64.powf(i as f64 / 23.0));
        }
    }
    EpsilonGrid::from_values(&values).expect("canonical grid is valid")
}
