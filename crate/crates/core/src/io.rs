//! Text formats for layouts, community hierarchies and traces.
//!
//! * layout: `label<TAB>x<TAB>y[<TAB>z]` per node
//! * communities: `label<TAB>path` with `path` dot-separated ids, e.g. `3.1`
//! * modularity trace: CSV `merge_step,Q`
//! * energy trace: CSV `step,kinetic,spring,coulomb`
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! written layout parses back to the identical values.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::layout::EnergySample;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}: expected {expected} tab-separated fields, found {found}")]
    FieldCount {
        line: usize,
        expected: String,
        found: usize,
    },
    #[error("line {line}: cannot parse {value:?} as a {what}")]
    BadValue {
        line: usize,
        value: String,
        what: &'static str,
    },
    #[error("line {line}: {dim}-dimensional row after {expected}-dimensional rows")]
    MixedDimension {
        line: usize,
        dim: usize,
        expected: usize,
    },
    #[error("line {line}: label {label:?} appears twice")]
    DuplicateLabel { line: usize, label: String },
    #[error("no rows")]
    Empty,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Node coordinates read from a layout file; all rows share one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub dim: usize,
    pub labels: Vec<String>,
    pub coords: Vec<Vec<f64>>,
}

impl Layout {
    /// Coordinates as fixed-size points, when `D` matches the file.
    pub fn points<const D: usize>(&self) -> Option<Vec<[f64; D]>> {
        (self.dim == D).then(|| {
            self.coords
                .iter()
                .map(|c| std::array::from_fn(|k| c[k]))
                .collect()
        })
    }
}

pub fn write_layout<const D: usize>(labels: &[String], positions: &[[f64; D]]) -> String {
    let mut out = String::new();
    for (label, x) in labels.iter().zip(positions) {
        out.push_str(label);
        for c in x {
            let _ = write!(out, "\t{c}");
        }
        out.push('\n');
    }
    out
}

pub fn parse_layout(text: &str) -> Result<Layout, FormatError> {
    let mut layout = Layout {
        dim: 0,
        labels: Vec::new(),
        coords: Vec::new(),
    };
    let mut seen = HashSet::new();
    for (line, row) in data_lines(text) {
        let fields: Vec<&str> = row.split('\t').collect();
        let dim = fields.len() - 1;
        if !(1..=3).contains(&dim) {
            return Err(FormatError::FieldCount {
                line,
                expected: "2 to 4".into(),
                found: fields.len(),
            });
        }
        if layout.dim == 0 {
            layout.dim = dim;
        } else if dim != layout.dim {
            return Err(FormatError::MixedDimension {
                line,
                dim,
                expected: layout.dim,
            });
        }
        let label = fields[0];
        if label.is_empty() {
            return Err(FormatError::BadValue {
                line,
                value: String::new(),
                what: "label",
            });
        }
        let coords = fields[1..]
            .iter()
            .map(|f| match f.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(FormatError::BadValue {
                    line,
                    value: (*f).to_owned(),
                    what: "finite coordinate",
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !seen.insert(label.to_owned()) {
            return Err(FormatError::DuplicateLabel {
                line,
                label: label.to_owned(),
            });
        }
        layout.labels.push(label.to_owned());
        layout.coords.push(coords);
    }
    if layout.labels.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(layout)
}

pub fn format_path(path: &[usize]) -> String {
    let parts: Vec<String> = path.iter().map(usize::to_string).collect();
    parts.join(".")
}

pub fn write_communities(labels: &[String], paths: &[Vec<usize>]) -> String {
    let mut out = String::new();
    for (label, path) in labels.iter().zip(paths) {
        let _ = writeln!(out, "{label}\t{}", format_path(path));
    }
    out
}

/// Rows of a community file as `(label, path)`.
pub fn parse_communities(text: &str) -> Result<Vec<(String, Vec<usize>)>, FormatError> {
    let mut rows = Vec::new();
    let mut seen = HashSet::new();
    for (line, row) in data_lines(text) {
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 2 {
            return Err(FormatError::FieldCount {
                line,
                expected: "2".into(),
                found: fields.len(),
            });
        }
        let (label, path) = (fields[0], fields[1].trim());
        if label.is_empty() {
            return Err(FormatError::BadValue {
                line,
                value: String::new(),
                what: "label",
            });
        }
        let ids = path
            .split('.')
            .map(|p| {
                p.parse::<usize>().map_err(|_| FormatError::BadValue {
                    line,
                    value: path.to_owned(),
                    what: "community path",
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if !seen.insert(label.to_owned()) {
            return Err(FormatError::DuplicateLabel {
                line,
                label: label.to_owned(),
            });
        }
        rows.push((label.to_owned(), ids));
    }
    if rows.is_empty() {
        return Err(FormatError::Empty);
    }
    Ok(rows)
}

pub fn write_q_trace(q_trace: &[f64]) -> String {
    let mut out = String::from("merge_step,Q\n");
    for (step, q) in q_trace.iter().enumerate() {
        let _ = writeln!(out, "{step},{q}");
    }
    out
}

pub fn write_energy_trace(samples: &[EnergySample]) -> String {
    let mut out = String::from("step,kinetic,spring,coulomb\n");
    for s in samples {
        let _ = writeln!(out, "{},{},{},{}", s.step, s.kinetic, s.spring, s.coulomb);
    }
    out
}

/// `label<TAB>block` rows for planted ground truth.
pub fn write_truth(labels: &[String], blocks: &[usize]) -> String {
    let mut out = String::new();
    for (label, b) in labels.iter().zip(blocks) {
        let _ = writeln!(out, "{label}\t{b}");
    }
    out
}
