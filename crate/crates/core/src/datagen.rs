//! Dataset generation and ingestion.
//!
//! Synthetic datasets are skew-normal: shape α controls skewness, scale the
//! spread, and the standard grid crosses sizes {1000, 10000, 100000} with
//! skews {0, 5, 50} and scales {50, 250, 500} at location 0, giving 27
//! datasets. Real datasets load from comma-separated, header-first CSV with
//! '.' decimal separators; generated datasets persist as single-column CSV
//! with a '#'-prefixed provenance comment so files are self-describing.

use crate::error::{Error, Result};
use crate::mechanisms::Bounds;
use crate::rng::{derive_seed, RandomSource};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

/// Generation parameters of one synthetic dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub size: usize,
    /// Shape α of the skew-normal; 0 recovers the normal distribution.
    pub skew: f64,
    pub scale: f64,
    pub location: f64,
    pub seed: u64,
}

impl GenParams {
    fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("dataset size must be positive"));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::invalid(format!(
                "scale must be positive and finite, got {}",
                self.scale
            )));
        }
        if !self.skew.is_finite() || !self.location.is_finite() {
            return Err(Error::invalid("skew and location must be finite"));
        }
        Ok(())
    }
}

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Generated(GenParams),
    SourceFile { path: String, column: String },
    Inline,
}

/// Ordered collection of real-valued records plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    id: String,
    records: Vec<f64>,
    provenance: Provenance,
}

impl Dataset {
    /// Wrap explicit records. All records must be finite.
    pub fn from_records(id: impl Into<String>, records: Vec<f64>) -> Result<Self> {
        if let Some(bad) = records.iter().find(|r| !r.is_finite()) {
            return Err(Error::invalid(format!(
                "dataset records must be finite, found {bad}"
            )));
        }
        Ok(Self {
            id: id.into(),
            records,
            provenance: Provenance::Inline,
        })
    }

    pub(crate) fn with_provenance(id: String, records: Vec<f64>, provenance: Provenance) -> Self {
        Self {
            id,
            records,
            provenance,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn records(&self) -> &[f64] {
        &self.records
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// How clipping bounds are chosen for a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundsPolicy {
    /// Use the dataset's actual minimum and maximum. Convenient for
    /// synthetic benchmarks, but data-dependent: choosing bounds this way
    /// leaks information and is not itself differentially private.
    ActualMinMax,
    /// Caller-supplied range from domain knowledge.
    Provided(Bounds),
}

/// Standard skew-normal variate with shape `alpha`, via the conditioning
/// representation: Z = δ|U0| + sqrt(1-δ²) U1 with δ = α/sqrt(1+α²) and
/// U0, U1 independent standard normals.
pub fn skew_normal_sample<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u0: f64 = StandardNormal.sample(rng);
    let u1: f64 = StandardNormal.sample(rng);
    if alpha == 0.0 {
        return u1;
    }
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    delta * u0.abs() + (1.0 - delta * delta).sqrt() * u1
}

/// Generate a dataset: records[i] = location + scale * Z_i. Deterministic
/// under the seed carried in `params`.
pub fn generate(params: &GenParams) -> Result<Dataset> {
    generate_with_id(default_id(params), params)
}

/// As [`generate`] but with an explicit dataset id.
pub fn generate_with_id(id: impl Into<String>, params: &GenParams) -> Result<Dataset> {
    params.validate()?;
    let mut rng = RandomSource::new(params.seed).rng();
    let records = (0..params.size)
        .map(|_| params.location + params.scale * skew_normal_sample(params.skew, &mut rng))
        .collect();
    Ok(Dataset::with_provenance(
        id.into(),
        records,
        Provenance::Generated(*params),
    ))
}

fn default_id(params: &GenParams) -> String {
    format!("n{}-skew{}-scale{}", params.size, params.skew, params.scale)
}

/// The 27-point generation grid: sizes {1000, 10000, 100000} x skew
/// {0, 5, 50} x scale {50, 250, 500}, location 0, with per-dataset seeds
/// derived from `master_seed`. The first element is (1000, skew 0, scale 50).
pub fn grid_27(master_seed: u64) -> Vec<GenParams> {
    let mut grid = Vec::with_capacity(27);
    for &size in &[1000usize, 10_000, 100_000] {
        for &skew in &[0.0f64, 5.0, 50.0] {
            for &scale in &[50.0f64, 250.0, 500.0] {
                let index = grid.len() as u64;
                grid.push(GenParams {
                    size,
                    skew,
                    scale,
                    location: 0.0,
                    seed: derive_seed(master_seed, index),
                });
            }
        }
    }
    grid
}

/// Grid id in the style `d01` .. `d27`, by position.
pub fn grid_dataset_id(index: usize) -> String {
    format!("d{:02}", index + 1)
}

/// Load the named column of a CSV file as a dataset. Comma separated, first
/// line is the header, '#' lines are comments. Rows whose cell does not
/// parse as a finite real are rejected with the 1-based line number.
pub fn load_csv(path: &Path, column: &str) -> Result<Dataset> {
    let display = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.kind() {
            csv::ErrorKind::Io(_) => {
                Error::io(display.clone(), std::io::Error::other(e.to_string()))
            }
            _ => Error::invalid(format!("{display}: {e}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::invalid(format!("{display}: cannot read header: {e}")))?
        .clone();
    let col_idx = headers.iter().position(|h| h == column).ok_or_else(|| {
        Error::invalid(format!(
            "{display}: column '{column}' not found; available: {}",
            headers.iter().collect::<Vec<_>>().join(", ")
        ))
    })?;
    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::invalid(format!("{display}: {e}")))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let cell = row.get(col_idx).ok_or_else(|| Error::CsvParse {
            path: display.clone(),
            line,
            message: format!("row has no column '{column}'"),
        })?;
        let value: f64 = cell.parse().map_err(|_| Error::CsvParse {
            path: display.clone(),
            line,
            message: format!("column '{column}': cannot parse '{cell}' as a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::CsvParse {
                path: display.clone(),
                line,
                message: format!("column '{column}': non-finite value '{cell}'"),
            });
        }
        records.push(value);
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| display.clone());
    // single-column files round-trip under their bare stem
    let id = if column == "value" {
        stem
    } else {
        format!("{stem}:{column}")
    };
    Ok(Dataset::with_provenance(
        id,
        records,
        Provenance::SourceFile {
            path: display,
            column: column.to_string(),
        },
    ))
}

/// Persist a dataset as single-column CSV (`value` header) with a '#'
/// provenance comment. Records print in shortest-round-trip form, so a
/// reload reproduces them bit for bit.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let display = path.display().to_string();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(display.clone(), e))?;
    let provenance = match dataset.provenance() {
        Provenance::Generated(p) => format!(
            "generated size={} skew={} scale={} location={} seed={}",
            p.size, p.skew, p.scale, p.location, p.seed
        ),
        Provenance::SourceFile { path, column } => format!("source={path} column={column}"),
        Provenance::Inline => "inline".to_string(),
    };
    let mut out = String::with_capacity(dataset.len() * 12 + 64);
    out.push_str(&format!(
        "# dpwb dataset id={} {provenance}\n",
        dataset.id()
    ));
    out.push_str("value\n");
    for r in dataset.records() {
        out.push_str(&format!("{r}\n"));
    }
    file.write_all(out.as_bytes())
        .map_err(|e| Error::io(display, e))
}

/// Resolve clipping bounds for `data` under `policy`.
pub fn resolve_bounds(data: &Dataset, policy: &BoundsPolicy) -> Result<Bounds> {
    match policy {
        BoundsPolicy::Provided(b) => Ok(*b),
        BoundsPolicy::ActualMinMax => {
            if data.is_empty() {
                return Err(Error::invalid(
                    "cannot take actual min/max of an empty dataset",
                ));
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &r in data.records() {
                lo = lo.min(r);
                hi = hi.max(r);
            }
            Bounds::new(lo, hi)
        }
    }
}

/// Theoretical mean of the standard skew-normal with shape `alpha`.
pub fn skew_normal_mean(alpha: f64) -> f64 {
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    delta * (2.0 / std::f64::consts::PI).sqrt()
}

/// Theoretical standard deviation of the standard skew-normal.
pub fn skew_normal_std(alpha: f64) -> f64 {
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    (1.0 - 2.0 * delta * delta / std::f64::consts::PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn alpha_zero_is_standard_normal() {
        let mut rng = RandomSource::new(101).rng();
        let n = 200_000;
        let mean = (0..n)
            .map(|_| skew_normal_sample(0.0, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    // Skew-normal mean is δ sqrt(2/π) ≈ 0.7824 at α = 5.
    #[test]
    fn alpha_five_mean_matches_formula() {
        let expected = skew_normal_mean(5.0);
        assert!((expected - 0.7824).abs() < 5e-4);
        let mut rng = RandomSource::new(103).rng();
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| skew_normal_sample(5.0, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!(
            (mean - expected).abs() < 0.004,
            "mean {mean}, expected {expected}"
        );
    }

    // At α = 50 the negative tail nearly vanishes; the exact left-tail mass
    // is 1/2 - arctan(α)/π ≈ 0.00636.
    #[test]
    fn alpha_fifty_is_nearly_half_normal() {
        let mut rng = RandomSource::new(107).rng();
        let n = 1_000_000usize;
        let negative = (0..n)
            .filter(|_| skew_normal_sample(50.0, &mut rng) < 0.0)
            .count() as f64;
        let p = 0.5 - (50.0f64).atan() / std::f64::consts::PI;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!(
            (negative - n as f64 * p).abs() < 4.0 * sd,
            "negative draws {negative}, expected {}",
            n as f64 * p
        );
        assert!(negative / (n as f64) < 0.01);
    }

    #[test]
    fn generate_is_deterministic_and_scaled() {
        let params = GenParams {
            size: 1000,
            skew: 0.0,
            scale: 50.0,
            location: 0.0,
            seed: 7,
        };
        let a = generate(&params).unwrap();
        let b = generate(&params).unwrap();
        assert_eq!(a.records(), b.records());
        assert_eq!(a.len(), 1000);
        let mean = a.records().iter().sum::<f64>() / 1000.0;
        let var = a.records().iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        let std = var.sqrt();
        assert!((std - 50.0).abs() < 5.0, "sample std {std}");
    }

    #[test]
    fn generate_rejects_bad_params() {
        let bad = GenParams {
            size: 0,
            skew: 0.0,
            scale: 50.0,
            location: 0.0,
            seed: 1,
        };
        assert!(generate(&bad).is_err());
        let bad = GenParams {
            size: 10,
            skew: 0.0,
            scale: -1.0,
            location: 0.0,
            seed: 1,
        };
        assert!(generate(&bad).is_err());
    }

    #[test]
    fn grid_has_27_distinct_points_in_document_order() {
        let grid = grid_27(99);
        assert_eq!(grid.len(), 27);
        assert_eq!(
            (grid[0].size, grid[0].skew, grid[0].scale),
            (1000, 0.0, 50.0)
        );
        let mut triples: Vec<(usize, u64, u64)> = grid
            .iter()
            .map(|p| (p.size, p.skew.to_bits(), p.scale.to_bits()))
            .collect();
        triples.sort_unstable();
        triples.dedup();
        assert_eq!(triples.len(), 27);
        // expected parameter sets, as set equality
        let mut expected = Vec::new();
        for &size in &[1000usize, 10_000, 100_000] {
            for &skew in &[0.0f64, 5.0, 50.0] {
                for &scale in &[50.0f64, 250.0, 500.0] {
                    expected.push((size, skew.to_bits(), scale.to_bits()));
                }
            }
        }
        expected.sort_unstable();
        assert_eq!(triples, expected);
        // grid is reproducible and seed-sensitive
        assert_eq!(grid_27(99), grid);
        assert_ne!(grid_27(100)[0].seed, grid[0].seed);
    }

    // Sample moments of every grid point stay within generous CLT bands of
    // skew-normal theory.
    #[test]
    fn grid_datasets_match_theoretical_moments() {
        for (i, params) in grid_27(2024).iter().enumerate() {
            let data = generate_with_id(grid_dataset_id(i), params).unwrap();
            let n = data.len() as f64;
            let mean = data.records().iter().sum::<f64>() / n;
            let var = data
                .records()
                .iter()
                .map(|x| (x - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0);
            let std = var.sqrt();
            let expect_mean = params.location + params.scale * skew_normal_mean(params.skew);
            let expect_std = params.scale * skew_normal_std(params.skew);
            let mean_tol = 5.0 * expect_std / n.sqrt();
            let std_tol = 5.0 * expect_std * (1.5 / n).sqrt(); // kurtosis slack
            assert!(
                (mean - expect_mean).abs() < mean_tol,
                "{}: mean {mean} vs {expect_mean} (tol {mean_tol})",
                data.id()
            );
            assert!(
                (std - expect_std).abs() < std_tol,
                "{}: std {std} vs {expect_std} (tol {std_tol})",
                data.id()
            );
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("d.csv");
        let params = GenParams {
            size: 500,
            skew: 5.0,
            scale: 250.0,
            location: 0.0,
            seed: 11,
        };
        let data = generate(&params).unwrap();
        write_csv(&data, &path).unwrap();
        let loaded = load_csv(&path, "value").unwrap();
        assert_eq!(loaded.records(), data.records());
    }

    #[test]
    fn load_csv_parses_simple_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ages.csv");
        std::fs::write(&path, "age,name\n10,a\n20,b\n30,c\n").unwrap();
        let data = load_csv(&path, "age").unwrap();
        assert_eq!(data.records(), &[10.0, 20.0, 30.0]);
        assert_eq!(data.id(), "ages:age");
    }

    #[test]
    fn load_csv_reports_line_of_bad_cell() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "age\n10\noops\n30\n").unwrap();
        let err = load_csv(&path, "age").unwrap_err();
        match err {
            Error::CsvParse { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("oops"));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn load_csv_errors_on_missing_column_and_file() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("cols.csv");
        std::fs::write(&path, "a,b\n1,2\n").unwrap();
        let err = load_csv(&path, "c").unwrap_err().to_string();
        assert!(err.contains("available: a, b"));
        assert!(load_csv(&dir.path().join("nope.csv"), "a").is_err());
    }

    #[test]
    fn bounds_policies() {
        let data = Dataset::from_records("t", vec![3.0, 1.0, 2.0]).unwrap();
        let b = resolve_bounds(&data, &BoundsPolicy::ActualMinMax).unwrap();
        assert_eq!((b.lower(), b.upper()), (1.0, 3.0));
        let provided = Bounds::new(0.0, 100.0).unwrap();
        let b = resolve_bounds(&data, &BoundsPolicy::Provided(provided)).unwrap();
        assert_eq!((b.lower(), b.upper()), (0.0, 100.0));
        let single = Dataset::from_records("s", vec![7.0]).unwrap();
        let b = resolve_bounds(&single, &BoundsPolicy::ActualMinMax).unwrap();
        assert_eq!((b.lower(), b.upper()), (7.0, 7.0));
        let empty = Dataset::from_records("e", vec![]).unwrap();
        assert!(resolve_bounds(&empty, &BoundsPolicy::ActualMinMax).is_err());
    }
}
