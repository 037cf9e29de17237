//! Text formats and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use pointstab::{ModalState, TrajectoryRecord};

use crate::error::CliError;

/// Shortest decimal string that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        ryu::Buffer::new().format_finite(x).to_string()
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Comma-separated rows under a header line.
pub fn csv(header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(num).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Row-major, space-separated matrix under a one-line header.
pub fn matrix_dump(header: &str, m: &pointstab::DMatrix<f64>) -> String {
    let mut out = String::new();
    writeln!(out, "{header}").expect("string write");
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| num(m[(i, j)])).collect();
        writeln!(out, "{}", row.join(" ")).expect("string write");
    }
    out
}

pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for prefix in ["a", "b", "adot", "bdot"] {
        h.extend((1..=n).map(|k| format!("{prefix}_{k}")));
    }
    h.push("v1".into());
    h.push("v2".into());
    h
}

pub fn trajectory_csv(rec: &TrajectoryRecord) -> String {
    let n = rec.states.first().map_or(0, ModalState::modes);
    let rows = rec.times.iter().zip(&rec.states).zip(&rec.controls).map(|((&t, s), &(v1, v2))| {
        let mut row = Vec::with_capacity(4 * n + 3);
        row.push(t);
        row.extend(&s.a);
        row.extend(&s.b);
        row.extend(&s.a_dot);
        row.extend(&s.b_dot);
        row.push(v1);
        row.push(v2);
        row
    });
    csv(&trajectory_header(n), rows)
}

/// Parses a file written by [`trajectory_csv`].
pub fn read_trajectory_csv(text: &str) -> Result<TrajectoryRecord, CliError> {
    let bad = |msg: String| CliError::Config(format!("trajectory csv: {msg}"));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().ok_or_else(|| bad("empty file".into()))?.split(',').collect();
    if header.len() < 7 || !(header.len() - 3).is_multiple_of(4) {
        return Err(bad(format!("unexpected column count {}", header.len())));
    }
    let n = (header.len() - 3) / 4;
    let want = trajectory_header(n);
    if header != want.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(bad("header does not match the trajectory layout".into()));
    }
    let mut rec = TrajectoryRecord { times: Vec::new(), states: Vec::new(), controls: Vec::new() };
    for (i, line) in lines.enumerate() {
        let vals = line
            .split(',')
            .map(|c| c.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", i + 1)))?;
        if vals.len() != header.len() {
            return Err(bad(format!("row {} has {} cells", i + 1, vals.len())));
        }
        rec.times.push(vals[0]);
        let block = |j: usize| vals[1 + j * n..1 + (j + 1) * n].to_vec();
        rec.states.push(ModalState::new(block(0), block(2), block(1), block(3))?);
        rec.controls.push((vals[4 * n + 1], vals[4 * n + 2]));
    }
    Ok(rec)
}

/// Named file contents, written together by [`Outputs::commit`].
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Outputs {
    pub files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.iter().find(|(n, _)| n == name).map(|(_, c)| c.as_str())
    }

    /// Writes every file through a temporary in `dir` followed by a rename.
    pub fn commit(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let mut written = Vec::with_capacity(self.files.len());
        for (name, contents) in &self.files {
            let path = dir.join(name);
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
            tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(&path, e))?;
            tmp.as_file().sync_all().map_err(|e| CliError::io(&path, e))?;
            tmp.persist(&path).map_err(|e| CliError::io(&path, e.error))?;
            written.push(path);
        }
        Ok(written)
    }
}
