//! CSV report emission and re-parsing.
//!
//! Utility reports carry one row per benchmark cell; a companion
//! `<stem>_plot.csv` file groups the same measurements into one series per
//! (query, mechanism) for direct consumption by plotting tools. Epsilon is
//! printed with 6 significant digits; metric columns print in shortest
//! round-trip form, so emit -> parse -> emit is byte identical.

use crate::error::{Error, Result};
use crate::harness::scalability::{ScalabilityOutcome, ScalabilityRecord};
use crate::harness::utility::{MechanismChoice, UtilityRecord};
use crate::queries::{DpDefinition, QueryKind};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

pub const UTILITY_HEADER: &str =
    "dataset_id,query,mechanism,dp_definition,epsilon,mre,sase,n_runs,flagged";
pub const SCALABILITY_HEADER: &str =
    "size,query,epsilon,run,elapsed_seconds,peak_rss_bytes,alloc_peak_bytes";

/// Format with 6 significant digits, plain decimal notation.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0.00000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    format!("{:.*}", decimals, x)
}

fn utility_line(r: &UtilityRecord) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        r.dataset_id,
        r.query,
        r.mechanism,
        r.definition,
        format_sig6(r.epsilon),
        r.mre,
        r.sase,
        r.n_runs,
        r.flagged
    )
}

/// Write the utility CSV plus the companion plot-data file. Returns the
/// paths written.
pub fn emit_report(records: &[UtilityRecord], path: &Path) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        return Err(Error::invalid("refusing to emit an empty report"));
    }
    let mut out = String::with_capacity(records.len() * 64);
    out.push_str(UTILITY_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&utility_line(r));
        out.push('\n');
    }
    std::fs::write(path, &out).map_err(|e| Error::io(path.display().to_string(), e))?;

    let plot_path = companion_plot_path(path);
    let mut plot = String::with_capacity(records.len() * 64);
    plot.push_str("series,dataset_id,epsilon,mre,sase\n");
    let mut series: Vec<(QueryKind, MechanismChoice)> = Vec::new();
    for r in records {
        if !series.contains(&(r.query, r.mechanism)) {
            series.push((r.query, r.mechanism));
        }
    }
    for (query, mechanism) in series {
        for r in records
            .iter()
            .filter(|r| r.query == query && r.mechanism == mechanism)
        {
            let _ = writeln!(
                plot,
                "{}:{},{},{},{},{}",
                query,
                mechanism,
                r.dataset_id,
                format_sig6(r.epsilon),
                r.mre,
                r.sase
            );
        }
    }
    std::fs::write(&plot_path, &plot).map_err(|e| Error::io(plot_path.display().to_string(), e))?;
    Ok(vec![path.to_path_buf(), plot_path])
}

fn companion_plot_path(path: &Path) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".to_string());
    path.with_file_name(format!("{stem}_plot.csv"))
}

/// Parse a utility CSV produced by [`emit_report`].
pub fn parse_report(path: &Path) -> Result<Vec<UtilityRecord>> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == UTILITY_HEADER => {}
        _ => return Err(Error::invalid(format!("{display}: not a utility report"))),
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(Error::CsvParse {
                path: display.clone(),
                line: idx as u64 + 2,
                message: "expected 9 fields".to_string(),
            });
        }
        let parse_err = |message: String| Error::CsvParse {
            path: display.clone(),
            line: idx as u64 + 2,
            message,
        };
        records.push(UtilityRecord {
            dataset_id: fields[0].to_string(),
            query: QueryKind::from_str(fields[1]).map_err(|e| parse_err(e.to_string()))?,
            mechanism: MechanismChoice::from_str(fields[2])
                .map_err(|e| parse_err(e.to_string()))?,
            definition: DpDefinition::from_str(fields[3]).map_err(|e| parse_err(e.to_string()))?,
            epsilon: fields[4]
                .parse()
                .map_err(|_| parse_err(format!("bad epsilon '{}'", fields[4])))?,
            mre: fields[5]
                .parse()
                .map_err(|_| parse_err(format!("bad mre '{}'", fields[5])))?,
            sase: fields[6]
                .parse()
                .map_err(|_| parse_err(format!("bad sase '{}'", fields[6])))?,
            n_runs: fields[7]
                .parse()
                .map_err(|_| parse_err(format!("bad n_runs '{}'", fields[7])))?,
            flagged: fields[8]
                .parse()
                .map_err(|_| parse_err(format!("bad flagged '{}'", fields[8])))?,
        });
    }
    Ok(records)
}

/// Write the scalability CSV. Skipped sizes go to `<stem>_skipped.txt` so
/// the main schema stays fixed; returns the paths written.
pub fn emit_scalability(outcomes: &[ScalabilityOutcome], path: &Path) -> Result<Vec<PathBuf>> {
    if outcomes.is_empty() {
        return Err(Error::invalid("refusing to emit an empty report"));
    }
    let mut out = String::new();
    out.push_str(SCALABILITY_HEADER);
    out.push('\n');
    let mut skips = String::new();
    for outcome in outcomes {
        match outcome {
            ScalabilityOutcome::Measured(r) => {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    r.size,
                    r.query,
                    format_sig6(r.epsilon),
                    r.run,
                    r.elapsed_seconds,
                    r.peak_rss_bytes,
                    r.alloc_peak_bytes
                );
            }
            ScalabilityOutcome::Skipped {
                size,
                query,
                reason,
            } => {
                let _ = writeln!(skips, "size={size} query={query}: {reason}");
            }
        }
    }
    std::fs::write(path, &out).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut written = vec![path.to_path_buf()];
    if !skips.is_empty() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "scalability".to_string());
        let skip_path = path.with_file_name(format!("{stem}_skipped.txt"));
        std::fs::write(&skip_path, &skips)
            .map_err(|e| Error::io(skip_path.display().to_string(), e))?;
        written.push(skip_path);
    }
    Ok(written)
}

/// Parse a scalability CSV produced by [`emit_scalability`].
pub fn parse_scalability(path: &Path) -> Result<Vec<ScalabilityRecord>> {
    let display = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(display.clone(), e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == SCALABILITY_HEADER => {}
        _ => {
            return Err(Error::invalid(format!(
                "{display}: not a scalability report"
            )))
        }
    }
    let mut records = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::CsvParse {
                path: display.clone(),
                line: idx as u64 + 2,
                message: "expected 7 fields".to_string(),
            });
        }
        let parse_err = |message: String| Error::CsvParse {
            path: display.clone(),
            line: idx as u64 + 2,
            message,
        };
        records.push(ScalabilityRecord {
            size: fields[0]
                .parse()
                .map_err(|_| parse_err(format!("bad size '{}'", fields[0])))?,
            query: QueryKind::from_str(fields[1]).map_err(|e| parse_err(e.to_string()))?,
            epsilon: fields[2]
                .parse()
                .map_err(|_| parse_err(format!("bad epsilon '{}'", fields[2])))?,
            run: fields[3]
                .parse()
                .map_err(|_| parse_err(format!("bad run '{}'", fields[3])))?,
            elapsed_seconds: fields[4]
                .parse()
                .map_err(|_| parse_err(format!("bad elapsed '{}'", fields[4])))?,
            peak_rss_bytes: fields[5]
                .parse()
                .map_err(|_| parse_err(format!("bad rss '{}'", fields[5])))?,
            alloc_peak_bytes: fields[6]
                .parse()
                .map_err(|_| parse_err(format!("bad alloc '{}'", fields[6])))?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn sample_records() -> Vec<UtilityRecord> {
        vec![
            UtilityRecord {
                dataset_id: "d01".into(),
                query: QueryKind::Count,
                mechanism: MechanismChoice::LaplacePure,
                definition: DpDefinition::Unbounded,
                epsilon: 0.01,
                mre: 0.10250000371,
                sase: 0.00014,
                n_runs: 500,
                flagged: false,
            },
            UtilityRecord {
                dataset_id: "d01".into(),
                query: QueryKind::Count,
                mechanism: MechanismChoice::LaplacePure,
                definition: DpDefinition::Unbounded,
                epsilon: 0.6309573444801932,
                mre: 0.0016,
                sase: 2.2e-6,
                n_runs: 500,
                flagged: false,
            },
        ]
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.01), "0.0100000");
        assert_eq!(format_sig6(100.0), "100.000");
        assert_eq!(format_sig6(0.6309573444801932), "0.630957");
        assert_eq!(format_sig6(0.0), "0.00000");
    }

    #[test]
    fn emit_parse_emit_is_byte_identical() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("utility.csv");
        emit_report(&sample_records(), &path).unwrap();
        let parsed = parse_report(&path).unwrap();
        assert_eq!(parsed.len(), 2);
        let path2 = dir.path().join("utility2.csv");
        emit_report(&parsed, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn empty_report_is_rejected() {
        let dir = tempdir().unwrap();
        assert!(emit_report(&[], &dir.path().join("x.csv")).is_err());
        assert!(emit_scalability(&[], &dir.path().join("y.csv")).is_err());
    }

    #[test]
    fn plot_companion_has_one_series_per_query_mechanism() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("utility.csv");
        let written = emit_report(&sample_records(), &path).unwrap();
        assert_eq!(written.len(), 2);
        let plot = std::fs::read_to_string(&written[1]).unwrap();
        let series: Vec<&str> = plot
            .lines()
            .skip(1)
            .map(|l| l.split(',').next().unwrap())
            .collect();
        assert!(series.iter().all(|s| *s == "count:laplace-pure"));
    }

    #[test]
    fn scalability_round_trip_with_skips() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("scale.csv");
        let outcomes = vec![
            ScalabilityOutcome::Measured(ScalabilityRecord {
                size: 100,
                query: QueryKind::Sum,
                epsilon: 1.0,
                run: 0,
                elapsed_seconds: 1.25e-5,
                peak_rss_bytes: 4096,
                alloc_peak_bytes: 800,
            }),
            ScalabilityOutcome::Skipped {
                size: 10_000_000,
                query: QueryKind::Sum,
                reason: "cap".to_string(),
            },
        ];
        let written = emit_scalability(&outcomes, &path).unwrap();
        assert_eq!(written.len(), 2);
        let parsed = parse_scalability(&path).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].size, 100);
        assert_eq!(parsed[0].elapsed_seconds, 1.25e-5);
    }
}
