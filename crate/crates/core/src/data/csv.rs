//! CSV datasets: header `label,f0,f1,...`, one record per line.
//!
//! Labels are free-form class names; class ids follow first appearance.

use std::fmt::Write as _;
use std::path::Path;

use super::{LabeledDataset, SplitTag};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub fn parse_csv_dataset(text: &str, path: &str) -> Result<LabeledDataset> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_string(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.first() != Some(&"label") {
        return Err(err(1, format!("header must start with 'label', found '{header}'")));
    }
    for (k, c) in cols.iter().enumerate().skip(1) {
        if *c != format!("f{}", k - 1) {
            return Err(err(1, format!("column {k} should be 'f{}', found '{c}'", k - 1)));
        }
    }
    let dim = cols.len() - 1;
    let mut names: Vec<String> = Vec::new();
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != dim + 1 {
            return Err(err(
                i + 1,
                format!("expected {} fields, found {}", dim + 1, fields.len()),
            ));
        }
        let id = match names.iter().position(|n| n == fields[0]) {
            Some(id) => id,
            None => {
                names.push(fields[0].to_string());
                names.len() - 1
            }
        };
        labels.push(id);
        for f in &fields[1..] {
            let v: f64 = f
                .parse()
                .map_err(|_| err(i + 1, format!("invalid number '{f}'")))?;
            if !v.is_finite() {
                return Err(err(i + 1, format!("non-finite value '{f}'")));
            }
            data.push(v);
        }
    }
    let n = labels.len();
    LabeledDataset::new(Matrix::from_vec(n, dim, data)?, labels, names, SplitTag::Base)
}

pub fn load_csv_dataset(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_dataset(&text, &path.display().to_string())
}

pub fn to_csv_string(ds: &LabeledDataset) -> String {
    let mut out = String::from("label");
    for k in 0..ds.dim() {
        let _ = write!(out, ",f{k}");
    }
    out.push('\n');
    for (i, &y) in ds.labels().iter().enumerate() {
        out.push_str(&ds.class_names()[y]);
        for v in ds.features().row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

pub fn write_csv_dataset(ds: &LabeledDataset, path: &Path) -> Result<()> {
    std::fs::write(path, to_csv_string(ds)).map_err(|e| Error::io(path, e))
}
