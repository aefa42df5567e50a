//! Utility metrics: MRE (accuracy) and SASE (precision).
//!
//! Given a baseline y and noisy releases ŷ_i, the per-run L1 error is
//! e_i = |ŷ_i - y|. MRE is the sample mean of e_i/|y|; SASE is the sample
//! standard deviation (n-1 denominator) of e_i scaled by the dataset size.

use crate::error::{Error, Result};

/// Sample mean of |error| / |baseline|.
pub fn mre(errors: &[f64], baseline: f64) -> Result<f64> {
    if baseline == 0.0 {
        return Err(Error::UndefinedBaseline);
    }
    if errors.is_empty() {
        return Err(Error::invalid("mre needs at least one error sample"));
    }
    Ok(errors.iter().map(|e| e.abs()).sum::<f64>() / (errors.len() as f64 * baseline.abs()))
}

/// Sample standard deviation of |error| / dataset_size.
pub fn sase(errors: &[f64], dataset_size: usize) -> Result<f64> {
    if errors.len() < 2 {
        return Err(Error::invalid("sase needs at least two error samples"));
    }
    if dataset_size == 0 {
        return Err(Error::invalid("dataset size must be positive"));
    }
    let n = errors.len() as f64;
    let scaled: Vec<f64> = errors
        .iter()
        .map(|e| e.abs() / dataset_size as f64)
        .collect();
    let mean = scaled.iter().sum::<f64>() / n;
    let var = scaled.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok(var.sqrt())
}
