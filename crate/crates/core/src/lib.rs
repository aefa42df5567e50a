//! dpwb: a differentially private analytics workbench.
//!
//! The crate provides calibrated noise mechanisms (Laplace family, two-sided
//! geometric, snapping), DP analytics queries (count, sum, mean, var, std)
//! with sensitivity calculation and privacy-budget accounting, skew-normal
//! dataset generation and CSV ingestion, and a benchmark harness measuring
//! utility (MRE/SASE across an ε grid) and scalability (time and memory
//! across dataset sizes), plus a stochastic ε-DP tester.
//!
//! Randomness is explicit everywhere: operations draw from a seeded,
//! stream-addressable [`rng::RandomSource`], so runs replay bit for bit.
//! That favors reproducible experiments over adversarial robustness — swap
//! in a cryptographic source before protecting real data against a
//! determined attacker.

pub mod accountant;
pub mod datagen;
pub mod error;
pub mod harness;
pub mod mechanisms;
pub mod memtrack;
pub mod queries;
pub mod rng;
pub mod sensitivity;

pub use error::{Error, Result};
pub use mechanisms::{Bounds, Epsilon, MechanismSpec, Sensitivity};
pub use rng::RandomSource;
