//! CSV time series, reports and atomic file writes.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use crate::diagnostics::DiagnosticsRecord;
use crate::dynamics::Mode;

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Column names and rows of one time series.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// 17 significant digits, enough to reproduce every double exactly.
fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn table_to_csv(table: &Table) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.header).expect("writing to memory");
    for row in &table.rows {
        w.write_record(row.iter().map(|v| format_value(*v))).expect("writing to memory");
    }
    w.into_inner().expect("flushing to memory")
}

pub fn write_timeseries(table: &Table, path: &Path) -> io::Result<()> {
    if table.rows.is_empty() {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "time series has no rows"));
    }
    write_atomic(path, &table_to_csv(table))
}

pub fn read_timeseries(path: &Path) -> io::Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(io::Error::other)?;
    let header: Vec<String> = r.headers().map_err(io::Error::other)?.iter().map(String::from).collect();
    let mut table = Table::new(header);
    for rec in r.records() {
        let rec = rec.map_err(io::Error::other)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)))
            .collect::<io::Result<Vec<f64>>>()?;
        table.push(row);
    }
    Ok(table)
}

/// The diagnostics columns of a run; the set depends only on the mode and the
/// configured diagnostics, never on the values.
pub fn records_table(mode: Mode, vortices: usize, constancy: bool, lp_norms: bool, records: &[DiagnosticsRecord]) -> Table {
    let mut header = vec!["time".to_string(), "support_radius".to_string()];
    if constancy {
        header.extend((0..vortices).map(|i| format!("constancy_radius_{i}")));
    }
    if lp_norms {
        header.extend(["l1", "l2", "linf"].map(String::from));
    }
    if vortices > 0 {
        header.push("min_vortex_marker_dist".into());
    }
    if mode == Mode::Multi {
        header.push("min_vortex_pair_dist".into());
    }
    if mode == Mode::Fixed {
        header.push("hole_radius".into());
    }
    header.push("guard_event_count".into());
    let mut table = Table::new(header);
    let nan = f64::NAN;
    for r in records {
        let mut row = vec![r.time, r.support_radius];
        if constancy {
            row.extend((0..vortices).map(|i| r.constancy_radius.get(i).copied().unwrap_or(nan)));
        }
        if lp_norms {
            row.extend([r.l1.unwrap_or(nan), r.l2.unwrap_or(nan), r.linf.unwrap_or(nan)]);
        }
        if vortices > 0 {
            row.push(r.min_vortex_marker_dist.unwrap_or(f64::INFINITY));
        }
        if mode == Mode::Multi {
            row.push(r.min_vortex_pair_dist.unwrap_or(nan));
        }
        if mode == Mode::Fixed {
            row.push(r.hole_radius.unwrap_or(nan));
        }
        row.push(r.guard_event_count as f64);
        table.push(row);
    }
    table
}

/// `key: value` lines, each check ending in PASS or FAIL.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    lines: Vec<(String, String, Option<bool>)>,
}

impl Report {
    pub fn info(&mut self, key: &str, value: impl fmt::Display) {
        self.lines.push((key.to_string(), value.to_string(), None));
    }

    pub fn check(&mut self, key: &str, value: impl fmt::Display, pass: bool) {
        self.lines.push((key.to_string(), value.to_string(), Some(pass)));
    }

    pub fn passed(&self) -> bool {
        self.lines.iter().all(|l| l.2 != Some(false))
    }

    pub fn get(&self, key: &str) -> Option<(&str, Option<bool>)> {
        self.lines
            .iter()
            .find(|l| l.0 == key)
            .map(|l| (l.1.as_str(), l.2))
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v, pass) in &self.lines {
            match pass {
                Some(true) => writeln!(f, "{k}: {v} PASS")?,
                Some(false) => writeln!(f, "{k}: {v} FAIL")?,
                None => writeln!(f, "{k}: {v}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_gives_two_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let mut t = Table::new(["time", "x"]);
        t.push(vec![0.0, 1.5]);
        write_timeseries(&t, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!dir.path().join("series.csv.tmp").exists());
    }

    #[test]
    fn values_survive_text_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let mut t = Table::new(["a", "b", "c"]);
        let vals = [0.1, 1.0 / 3.0, std::f64::consts::PI, 1e-300, -2.5e17, 5e-324, f64::MAX, f64::INFINITY];
        for w in vals.windows(3) {
            t.push(w.to_vec());
        }
        write_timeseries(&t, &path).unwrap();
        let back = read_timeseries(&path).unwrap();
        assert_eq!(back.header, t.header);
        for (a, b) in back.rows.iter().flatten().zip(t.rows.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_series_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let t = Table::new(["time"]);
        assert!(write_timeseries(&t, &dir.path().join("x.csv")).is_err());
    }

    #[test]
    fn report_format() {
        let mut r = Report::default();
        r.info("steps", 10);
        r.check("drift", 0.01, true);
        assert!(r.passed());
        r.check("margin", 0.0, false);
        assert!(!r.passed());
        assert_eq!(r.to_string(), "steps: 10\ndrift: 0.01 PASS\nmargin: 0 FAIL\n");
        assert_eq!(r.get("margin"), Some(("0", Some(false))));
    }
}
