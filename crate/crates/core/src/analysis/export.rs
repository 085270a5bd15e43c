use std::fmt::Write as _;
use std::path::Path;

use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::Network;
use crate::numerics::{Matrix, Scalar};

/// CSV `class,f0,...` of backbone features, one row per record. Values use
/// shortest round-trip formatting.
pub fn embeddings_csv<T: Scalar>(net: &Network<T>, ds: &LabeledDataset) -> Result<String> {
    let dim = net.config().feature_dim;
    let mut out = String::from("class");
    for k in 0..dim {
        let _ = write!(out, ",f{k}");
    }
    out.push('\n');
    if ds.is_empty() {
        return Ok(out);
    }
    let z = net.embed(&ds.features().cast())?;
    for (i, &y) in ds.labels().iter().enumerate() {
        out.push_str(&ds.class_names()[y]);
        for v in z.row(i) {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn export_embeddings<T: Scalar>(net: &Network<T>, ds: &LabeledDataset, path: &Path) -> Result<()> {
    let text = embeddings_csv(net, ds)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an embeddings CSV back as `(class names per row, features)`.
pub fn read_embeddings(path: &Path) -> Result<(Vec<String>, Matrix<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let name = path.display().to_string();
    let err = |line: usize, message: String| Error::Parse {
        path: name.clone(),
        line,
        message,
    };
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| err(1, "missing header".into()))?;
    let dim = header.split(',').count() - 1;
    if !header.starts_with("class") {
        return Err(err(1, format!("unexpected header '{header}'")));
    }
    let mut classes = Vec::new();
    let mut data = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        classes.push(fields.next().unwrap_or_default().to_string());
        let before = data.len();
        for f in fields {
            data.push(
                f.parse::<f64>()
                    .map_err(|_| err(i + 2, format!("invalid number '{f}'")))?,
            );
        }
        if data.len() - before != dim {
            return Err(err(i + 2, format!("expected {dim} values")));
        }
    }
    Ok((classes.clone(), Matrix::from_vec(classes.len(), dim, data)?))
}
