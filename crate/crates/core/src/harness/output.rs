use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::experiment::MetricRow;
use crate::error::{Error, Result};

pub const ROW_HEADER: [&str; 6] = ["method", "eps", "t", "rel_err", "max_sketch_cols", "update_ns"];
pub const SUMMARY_HEADER: [&str; 5] = ["method", "eps", "max_rel_err", "mean_rel_err", "max_sketch_cols"];

/// Per-(method, eps) aggregate of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub method: String,
    pub eps: f64,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
    pub max_sketch_cols: u64,
}

pub fn summarize(rows: &[MetricRow]) -> Vec<SummaryRow> {
    // eps keyed by bit pattern; all grid values are positive so the order is numeric
    let mut groups: BTreeMap<(String, u64), Vec<&MetricRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.method.clone(), r.eps.to_bits())).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((method, eps), g)| SummaryRow {
            method,
            eps: f64::from_bits(eps),
            max_rel_err: g.iter().map(|r| r.rel_err).fold(0.0, f64::max),
            mean_rel_err: g.iter().map(|r| r.rel_err).sum::<f64>() / g.len() as f64,
            max_sketch_cols: g.iter().map(|r| r.max_sketch_cols).max().unwrap_or(0),
        })
        .collect()
}

fn write_csv<W: Write, T: Serialize>(out: W, header: &[&str], rows: &[T]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn rows_to_csv(rows: &[MetricRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &ROW_HEADER, rows).expect("in-memory csv");
    buf
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_csv(&mut buf, &SUMMARY_HEADER, rows).expect("in-memory csv");
    buf
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// `results.csv` -> `results.summary.csv`.
pub fn summary_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.summary.csv"))
}

/// Write the per-query rows to `path` and the per-(method, eps) summary next to it.
pub fn emit_results(rows: &[MetricRow], path: &Path) -> Result<PathBuf> {
    write_file(path, &rows_to_csv(rows))?;
    let summary = summary_path(path);
    write_file(&summary, &summary_to_csv(&summarize(rows)))?;
    Ok(summary)
}

pub fn write_summary(rows: &[SummaryRow], path: &Path) -> Result<()> {
    write_file(path, &summary_to_csv(rows))
}

pub fn read_results(path: &Path) -> Result<Vec<MetricRow>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    rdr.deserialize()
        .collect::<csv::Result<Vec<MetricRow>>>()
        .map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(method: &str, eps: f64, t: u64, rel_err: f64) -> MetricRow {
        MetricRow {
            method: method.into(),
            eps,
            t,
            rel_err,
            max_sketch_cols: t / 10,
            update_ns: 0,
        }
    }

    #[test]
    fn empty_rows_give_header_only() {
        assert_eq!(rows_to_csv(&[]), b"method,eps,t,rel_err,max_sketch_cols,update_ns\n");
    }

    #[test]
    fn round_trip_through_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.csv");
        let rows = vec![row("socod", 0.125, 100, 0.1 + 0.2), row("socod", 0.125, 200, 1e-17)];
        let summary = emit_results(&rows, &path).unwrap();
        assert_eq!(summary, dir.path().join("out.summary.csv"));
        assert_eq!(read_results(&path).unwrap(), rows);
        assert!(matches!(
            read_results(&dir.path().join("missing.csv")),
            Err(Error::Csv { .. })
        ));
    }

    #[test]
    fn summary_max_dominates_mean() {
        let rows = vec![
            row("a", 0.5, 10, 0.2),
            row("a", 0.5, 20, 0.4),
            row("a", 0.25, 10, 0.1),
            row("b", 0.5, 10, 0.3),
        ];
        let s = summarize(&rows);
        assert_eq!(s.len(), 3);
        assert_eq!((s[0].method.as_str(), s[0].eps), ("a", 0.25));
        let a = &s[1];
        assert!((a.mean_rel_err - 0.3).abs() < 1e-15);
        assert_eq!(a.max_rel_err, 0.4);
        assert!(s.iter().all(|g| g.max_rel_err >= g.mean_rel_err));
    }
}
