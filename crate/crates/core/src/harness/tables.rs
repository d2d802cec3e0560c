//! Output files of a run.
//!
//! - `records.csv`: one row per `(replication, n, x)`, reproducible byte for byte
//! - `timing.csv`: wall time per record
//! - `summary.json`: per-n aggregates and the decay fit
//! - `plot.csv`: `n, median_gap, median_exp_leakage_minus_1, median_rhs`
//! - `violations.json`: only written when some inequality failed

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::{ExperimentOutput, ExperimentRecord, Summary};
use crate::error::{Error, Result};

pub const RECORDS_FILE: &str = "records.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_FILE: &str = "plot.csv";
pub const VIOLATIONS_FILE: &str = "violations.json";
pub const CONFIG_FILE: &str = "config.toml";

fn create(path: &Path) -> Result<File> {
    File::create(path).map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    }
}

pub fn write_records_csv(records: &[ExperimentRecord], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for r in records {
        w.serialize(r).map_err(csv_error(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_records_csv(path: &Path) -> Result<Vec<ExperimentRecord>> {
    let mut r = csv::Reader::from_reader(File::open(path).map_err(|e| Error::io(path, e))?);
    r.deserialize()
        .map(|row| row.map_err(csv_error(path)))
        .collect()
}

#[derive(Serialize)]
struct TimingRow {
    replication: usize,
    n: usize,
    x_index: usize,
    wall_time_secs: f64,
}

#[derive(Serialize)]
struct PlotRow {
    n: usize,
    median_gap: Option<f64>,
    median_exp_leakage_minus_1: Option<f64>,
    median_rhs: Option<f64>,
}

fn write_rows<T: Serialize>(rows: impl IntoIterator<Item = T>, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    for row in rows {
        w.serialize(row).map_err(csv_error(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

pub fn write_plot_csv(summary: &Summary, path: &Path) -> Result<()> {
    write_rows(
        summary.per_n.iter().map(|s| PlotRow {
            n: s.n,
            median_gap: s.median_gap,
            median_exp_leakage_minus_1: s.median_exp_leakage_minus_1,
            median_rhs: s.median_gap_rhs,
        }),
        path,
    )
}

/// Writes every table into `dir`, creating it if needed, and returns the
/// paths written.
pub fn emit_tables(output: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    if output.records.is_empty() {
        return Err(Error::invalid("no records to write"));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let path = dir.join(RECORDS_FILE);
    write_records_csv(&output.records, &path)?;
    written.push(path);

    let path = dir.join(TIMING_FILE);
    write_rows(
        output.records.iter().map(|r| TimingRow {
            replication: r.replication,
            n: r.n,
            x_index: r.x_index,
            wall_time_secs: r.wall_time_secs,
        }),
        &path,
    )?;
    written.push(path);

    let path = dir.join(SUMMARY_FILE);
    write_json(&output.summary, &path)?;
    written.push(path);

    let path = dir.join(PLOT_FILE);
    write_plot_csv(&output.summary, &path)?;
    written.push(path);

    let path = dir.join(CONFIG_FILE);
    std::fs::write(&path, output.config.to_toml_string()).map_err(|e| Error::io(&path, e))?;
    written.push(path);

    let violations = output.violations();
    let path = dir.join(VIOLATIONS_FILE);
    if violations.is_empty() {
        if path.exists() {
            std::fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
        }
    } else {
        write_json(&violations, &path)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;
    use crate::harness::experiment::{decay_fit, run_experiment, RunOptions};
    use crate::numerics::least_squares;

    fn output(reps: usize) -> ExperimentOutput {
        let mut cfg = ExperimentConfig::decay_preset(3);
        cfg.experiment.replications = reps;
        run_experiment(&cfg, &RunOptions::default()).unwrap()
    }

    #[test]
    fn one_record_one_row() {
        let mut out = output(1);
        out.records.truncate(1);
        let dir = tempfile::tempdir().unwrap();
        emit_tables(&out, dir.path()).unwrap();
        let text = std::fs::read_to_string(dir.path().join(RECORDS_FILE)).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("schema_version,replication,seed,n,x_index,x,schedule,status"));
        assert!(!text.contains("wall_time"));
    }

    #[test]
    fn csv_round_trip_preserves_values() {
        let out = output(2);
        let dir = tempfile::tempdir().unwrap();
        emit_tables(&out, dir.path()).unwrap();
        let back = read_records_csv(&dir.path().join(RECORDS_FILE)).unwrap();
        assert_eq!(back.len(), out.records.len());
        for (a, b) in out.records.iter().zip(&back) {
            let close = |u: Option<f64>, v: Option<f64>| match (u, v) {
                (Some(u), Some(v)) => (u - v).abs() <= 1e-12 * u.abs().max(1e-300),
                (None, None) => true,
                _ => false,
            };
            assert!(
                close(a.gap, b.gap) && close(a.leakage, b.leakage) && close(a.gap_rhs, b.gap_rhs)
            );
            assert!(close(a.k_over_sqrt_n, b.k_over_sqrt_n) && close(a.radius, b.radius));
            assert_eq!(
                (a.covered, a.gap_bound_holds, a.mle_warning),
                (b.covered, b.gap_bound_holds, b.mle_warning)
            );
        }
    }

    #[test]
    fn summary_slope_matches_plot_csv() {
        let out = output(8);
        let dir = tempfile::tempdir().unwrap();
        emit_tables(&out, dir.path()).unwrap();
        let mut r = csv::Reader::from_path(dir.path().join(PLOT_FILE)).unwrap();
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for row in r.records() {
            let row = row.unwrap();
            let n: f64 = row[0].parse().unwrap();
            let m: f64 = row[2].parse().unwrap();
            xs.push(n.ln());
            ys.push(m.ln());
        }
        let (slope, _) = least_squares(&xs, &ys).unwrap();
        assert!((slope - out.summary.slope.unwrap()).abs() < 1e-12);
        assert_eq!(
            decay_fit(&out.summary.per_n).unwrap().0,
            out.summary.slope.unwrap()
        );
        let json: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap())
                .unwrap();
        assert_eq!(json["master_seed"], 3);
    }

    #[test]
    fn unwritable_path_is_named() {
        let out = output(1);
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("blocker");
        std::fs::write(&blocker, "").unwrap();
        let err = emit_tables(&out, &blocker.join("sub"))
            .unwrap_err()
            .to_string();
        assert!(err.contains("blocker"), "{err}");
        assert!(emit_tables(
            &ExperimentOutput {
                records: vec![],
                ..out
            },
            dir.path()
        )
        .is_err());
    }
}
