//! CSV formats.
//!
//! Every file may start with comment lines beginning with `#`. Indices are
//! 1-based on disk. Floats are written with the shortest representation
//! that round-trips exactly.
//!
//! * observations: header `i,j,y`, optional `# shape RxC` comment;
//! * matrices: one row per line, no header;
//! * results: `series,m,replication,estimator,rmse,seconds,seed`;
//! * traces: `round,k_selected,r_selected,entry_samples...`;
//! * summaries: `series,m,estimator,replications,mean_rmse,std_error`;
//! * ACF: `lag,acf_uniform,acf_conjugate`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::gibbs::FitOutput;
use crate::model::{DenseMatrix, Observation, ObservationSet};
use crate::diagnostics::SummaryRow;
use crate::sim::RmseRecord;

const SHAPE_PREFIX: &str = "shape ";

fn write_comments<W: Write>(w: &mut W, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    Ok(())
}

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn csv_reader(text: &str, has_headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes())
}

fn record_line(record: &csv::StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub fn write_observations<W: Write>(w: &mut W, obs: &ObservationSet, comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "# {SHAPE_PREFIX}{}x{}", obs.rows(), obs.cols())?;
    writeln!(w, "i,j,y")?;
    for e in obs.entries() {
        writeln!(w, "{},{},{}", e.i + 1, e.j + 1, e.y)?;
    }
    Ok(())
}

fn parse_shape(text: &str) -> Option<(usize, usize)> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .filter_map(|l| l.trim().strip_prefix(SHAPE_PREFIX))
        .find_map(|s| {
            let (r, c) = s.trim().split_once('x')?;
            Some((r.parse().ok()?, c.parse().ok()?))
        })
}

/// Parses observations. The matrix shape comes from `shape` if given,
/// else from a `# shape RxC` comment, else from the largest indices.
pub fn parse_observations(text: &str, path: &Path, shape: Option<(usize, usize)>) -> Result<ObservationSet> {
    let mut reader = csv_reader(text, true);
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let names: Vec<&str> = headers.iter().collect();
    if names != ["i", "j", "y"] {
        return Err(parse_error(path, record_line(&headers), format!("expected header i,j,y, found {}", names.join(","))));
    }
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_error(path, line, e.to_string())
        })?;
        let line = record_line(&record);
        if record.len() != 3 {
            return Err(parse_error(path, line, format!("expected 3 fields, found {}", record.len())));
        }
        let index = |k: usize, name: &str| -> Result<usize> {
            let v: usize = record[k]
                .parse()
                .map_err(|_| parse_error(path, line, format!("{name} is not a positive integer: '{}'", &record[k])))?;
            v.checked_sub(1)
                .ok_or_else(|| parse_error(path, line, format!("{name} must be at least 1")))
        };
        let i = index(0, "i")?;
        let j = index(1, "j")?;
        let y: f64 = record[2]
            .parse()
            .map_err(|_| parse_error(path, line, format!("y is not a number: '{}'", &record[2])))?;
        if !y.is_finite() {
            return Err(parse_error(path, line, "y must be finite"));
        }
        entries.push(Observation { i, j, y });
    }
    if entries.is_empty() {
        return Err(Error::EmptyObservations);
    }
    let (rows, cols) = shape.or_else(|| parse_shape(text)).unwrap_or_else(|| {
        let r = entries.iter().map(|e| e.i).max().unwrap_or(0) + 1;
        let c = entries.iter().map(|e| e.j).max().unwrap_or(0) + 1;
        (r, c)
    });
    ObservationSet::new(rows, cols, entries)
}

pub fn read_observations(path: &Path, shape: Option<(usize, usize)>) -> Result<ObservationSet> {
    parse_observations(&fs::read_to_string(path)?, path, shape)
}

pub fn write_matrix<W: Write>(w: &mut W, a: &DenseMatrix, comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv_reader(text, false);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&record);
        let row = record
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("not a number: '{f}'")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(parse_error(path, line, format!("expected {} columns, found {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_error(path, 0, "empty matrix"));
    }
    DenseMatrix::from_rows(&rows)
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let mut text = String::new();
    fs::File::open(path)?.read_to_string(&mut text)?;
    parse_matrix(&text, path)
}

pub const RESULTS_HEADER: &str = "series,m,replication,estimator,rmse,seconds,seed";

pub fn write_results<W: Write>(w: &mut W, records: &[RmseRecord], comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{:.3},{}",
            r.series, r.m, r.replication, r.estimator, r.rmse, r.seconds, r.seed
        )?;
    }
    Ok(())
}

pub const SUMMARY_HEADER: &str = "series,m,estimator,replications,mean_rmse,std_error";

/// Summary rows; `std_error` is empty for single-replication cells.
pub fn write_summary<W: Write>(w: &mut W, rows: &[SummaryRow], comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    writeln!(w, "{SUMMARY_HEADER}")?;
    for r in rows {
        let se = r.std_error.map(|v| v.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{},{},{}", r.series, r.m, r.estimator, r.replications, r.mean, se)?;
    }
    Ok(())
}

/// Trace rows; monitored entries are labelled `M[i:j]` with 1-based
/// indices.
pub fn write_trace<W: Write>(w: &mut W, fit: &FitOutput, comments: &[String]) -> Result<()> {
    write_comments(w, comments)?;
    let mut header = vec!["round".to_string(), "k_selected".into(), "r_selected".into()];
    header.extend(fit.monitored.iter().map(|(i, j)| format!("M[{}:{}]", i + 1, j + 1)));
    writeln!(w, "{}", header.join(","))?;
    for r in &fit.trace {
        let mut row = vec![r.round.to_string(), r.k_selected.to_string(), r.r_selected.to_string()];
        row.extend(r.entries.iter().map(|v| v.to_string()));
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

/// Monitored-entry columns of a trace file: `(label, values)` per column
/// after `r_selected`.
pub fn parse_trace(text: &str, path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut reader = csv_reader(text, true);
    let headers = reader
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    if headers.len() < 3 || &headers[0] != "round" || &headers[1] != "k_selected" || &headers[2] != "r_selected" {
        return Err(parse_error(path, record_line(&headers), "expected header round,k_selected,r_selected,..."));
    }
    let mut columns: Vec<(String, Vec<f64>)> = headers.iter().skip(3).map(|h| (h.to_string(), Vec::new())).collect();
    for record in reader.records() {
        let record = record.map_err(|e| parse_error(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record_line(&record);
        if record.len() != headers.len() {
            return Err(parse_error(path, line, format!("expected {} fields, found {}", headers.len(), record.len())));
        }
        for (col, field) in columns.iter_mut().zip(record.iter().skip(3)) {
            let v = field
                .parse()
                .map_err(|_| parse_error(path, line, format!("not a number: '{field}'")))?;
            col.1.push(v);
        }
    }
    Ok(columns)
}

pub fn read_trace(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    parse_trace(&fs::read_to_string(path)?, path)
}

pub fn write_acf<W: Write>(w: &mut W, uniform: &[f64], conjugate: &[f64], comments: &[String]) -> Result<()> {
    if uniform.len() != conjugate.len() {
        return Err(Error::LengthMismatch(uniform.len(), conjugate.len()));
    }
    write_comments(w, comments)?;
    writeln!(w, "lag,acf_uniform,acf_conjugate")?;
    for (h, (a, b)) in uniform.iter().zip(conjugate).enumerate() {
        writeln!(w, "{h},{a},{b}")?;
    }
    Ok(())
}
