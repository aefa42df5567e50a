//! Resolved run configurations, flag/file merging, and output manifests.
//!
//! A command's effective configuration is fully concrete (no optional
//! fields left to interpret) and is echoed verbatim as `config.json` into
//! the output directory. `--config FILE` loads such a file as the baseline
//! and explicit flags override individual fields.

use anyhow::{bail, Context, Result};
use dpwb_core::datagen::BoundsPolicy;
use dpwb_core::harness::MechanismChoice;
use dpwb_core::mechanisms::Bounds;
use dpwb_core::queries::{DpDefinition, QueryKind};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use std::path::Path;

pub const DEFAULT_SEED: u64 = 42;
pub const SEED_ENV: &str = "DPWB_SEED";

/// Seed precedence: explicit flag, then config file, then DPWB_SEED, then
/// the fixed default.
pub fn resolve_seed(flag: Option<u64>, from_config: Option<u64>) -> Result<u64> {
    if let Some(seed) = flag.or(from_config) {
        return Ok(seed);
    }
    match std::env::var(SEED_ENV) {
        Ok(raw) => raw
            .parse()
            .with_context(|| format!("{SEED_ENV} must be a 64-bit unsigned integer, got '{raw}'")),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

pub fn parse_queries(names: &[String]) -> Result<Vec<QueryKind>> {
    names
        .iter()
        .map(|n| n.parse::<QueryKind>().map_err(Into::into))
        .collect()
}

pub fn parse_mechanisms(names: &[String]) -> Result<Vec<MechanismChoice>> {
    names
        .iter()
        .map(|n| n.parse::<MechanismChoice>().map_err(Into::into))
        .collect()
}

pub fn parse_definition(name: &str) -> Result<DpDefinition> {
    name.parse::<DpDefinition>().map_err(Into::into)
}

/// `actual` or `LO:HI`.
pub fn parse_bounds_policy(spec: &str) -> Result<BoundsPolicy> {
    if spec == "actual" {
        return Ok(BoundsPolicy::ActualMinMax);
    }
    let Some((lo, hi)) = spec.split_once(':') else {
        bail!("bounds must be 'actual' or 'LO:HI', got '{spec}'");
    };
    let lower: f64 = lo
        .parse()
        .with_context(|| format!("bad lower bound '{lo}'"))?;
    let upper: f64 = hi
        .parse()
        .with_context(|| format!("bad upper bound '{hi}'"))?;
    Ok(BoundsPolicy::Provided(Bounds::new(lower, upper)?))
}

pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Output-directory manifest: what was run and which files it produced.
/// Deliberately free of wall-clock fields so reruns compare bytewise.
#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub seed: u64,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn write(command: &str, seed: u64, out_dir: &Path, outputs: &[String]) -> Result<()> {
        let manifest = Manifest {
            command: command.to_string(),
            seed,
            outputs: outputs.to_vec(),
        };
        write_json(&manifest, &out_dir.join("manifest.json"))
    }
}

pub fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .with_context(|| format!("cannot create output directory {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_policy_parsing() {
        assert!(matches!(
            parse_bounds_policy("actual").unwrap(),
            BoundsPolicy::ActualMinMax
        ));
        match parse_bounds_policy("0:100").unwrap() {
            BoundsPolicy::Provided(b) => {
                assert_eq!((b.lower(), b.upper()), (0.0, 100.0));
            }
            other => panic!("unexpected: {other:?}"),
        }
        assert!(parse_bounds_policy("-5:5").is_ok());
        assert!(parse_bounds_policy("10:1").is_err());
        assert!(parse_bounds_policy("nope").is_err());
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(7), Some(9)).unwrap(), 7);
        assert_eq!(resolve_seed(None, Some(9)).unwrap(), 9);
    }
}
