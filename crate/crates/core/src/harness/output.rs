//! CSV tables, JSON manifests and gnuplot data files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::config::ExperimentConfig;
use super::study::RateStudyResult;
use crate::error::{Error, Result};

/// Text of a float that round-trips; empty for `None`.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// Fields shared by every manifest; `extra` is merged in.
pub fn manifest(command: &str, config: &ExperimentConfig, extra: Value) -> Value {
    let mut base = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": config.experiment.seed,
        "config_hash": config.hash(),
        "config": config,
    });
    if let (Some(b), Value::Object(e)) = (base.as_object_mut(), extra) {
        b.extend(e);
    }
    base
}

/// Writes `rate_study.csv` (one row per replicate), `rate_study.json` and
/// `rate_study.dat` (log n against aggregated log error).
pub fn emit_results(result: &RateStudyResult, config: &ExperimentConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(dir)?;
    let csv_path = dir.join("rate_study.csv");
    let rows: Vec<Vec<String>> = result
        .records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                r.replicate.to_string(),
                fmt_opt(r.error),
                if r.error.is_some() { "ok" } else { "failed" }.to_string(),
                r.failure.clone().unwrap_or_default(),
            ]
        })
        .collect();
    write_csv(&csv_path, &["n", "replicate", "error", "status", "message"], &rows)?;

    let dat_path = dir.join("rate_study.dat");
    let mut dat = String::from("# log_n log_error\n");
    for (n, le) in &result.log_errors {
        dat.push_str(&format!("{} {}\n", (*n as f64).ln(), le));
    }
    fs::write(&dat_path, dat).map_err(|e| Error::io(&dat_path, e))?;

    let json_path = dir.join("rate_study.json");
    let fit = result
        .fit
        .map(|f| json!({ "slope": f.slope, "slope_se": f.slope_se, "intercept": f.intercept }));
    let value = manifest(
        "rate-study",
        config,
        json!({
            "scenario": result.scenario,
            "replicates": result.records.len(),
            "failures": result.failures,
            "fit": fit,
            "theoretical_slope": result.theoretical_slope,
            "log_errors": result.log_errors,
            "acceptance": result.records.iter().map(|r| r.acceptance).collect::<Vec<_>>(),
        }),
    );
    write_json(&json_path, &value)?;
    Ok(vec![csv_path, json_path, dat_path])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::Scenario;
    use crate::harness::study::ReplicateRecord;
    use crate::stats::LineFit;

    fn result(records: Vec<ReplicateRecord>) -> RateStudyResult {
        RateStudyResult {
            scenario: Scenario::Regression,
            records,
            log_errors: vec![(100, -1.5), (200, -1.75)],
            fit: Some(LineFit {
                slope: -0.4,
                intercept: 0.3,
                slope_se: 0.01,
            }),
            theoretical_slope: -0.4,
            failures: 0,
        }
    }

    #[test]
    fn csv_round_trips_values() {
        let dir = tempfile::tempdir().unwrap();
        let errors = [0.123_456_789_012_345_68, 1e-300, 7.0];
        let records = errors
            .iter()
            .enumerate()
            .map(|(i, &e)| ReplicateRecord {
                n: 100,
                replicate: i,
                error: Some(e),
                failure: None,
                acceptance: None,
            })
            .collect();
        let config = ExperimentConfig::default();
        emit_results(&result(records), &config, dir.path()).unwrap();
        let mut reader = csv::Reader::from_path(dir.path().join("rate_study.csv")).unwrap();
        let parsed: Vec<f64> = reader
            .records()
            .map(|r| r.unwrap()[2].parse::<f64>().unwrap())
            .collect();
        assert_eq!(parsed, errors);
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("rate_study.json")).unwrap()).unwrap();
        assert_eq!(manifest["fit"]["slope"], -0.4);
        assert_eq!(manifest["config_hash"], config.hash());
        let dat = fs::read_to_string(dir.path().join("rate_study.dat")).unwrap();
        assert_eq!(dat.lines().count(), 3);
    }

    #[test]
    fn empty_study_gives_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = result(vec![]);
        r.fit = None;
        r.log_errors.clear();
        emit_results(&r, &ExperimentConfig::default(), dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("rate_study.csv")).unwrap();
        assert_eq!(text, "n,replicate,error,status,message\n");
        let manifest: Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("rate_study.json")).unwrap()).unwrap();
        assert!(manifest["fit"].is_null());
    }

    #[test]
    fn unwritable_directory_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "").unwrap();
        let err = emit_results(&result(vec![]), &ExperimentConfig::default(), &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }
}
