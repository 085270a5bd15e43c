//! Plain-text checkpoint format.
//!
//! ```text
//! negmargin-checkpoint 1
//! input_dim 196
//! hidden_dims 64,32
//! feature_dim 2
//! activation relu
//! similarity cosine
//! classes 7
//! tensor layer0.weight 196 64
//! <one line per row, space separated>
//! ...
//! ```
//!
//! `hidden_dims` is `-` when the backbone has no hidden layer. Values are
//! written with Rust's shortest round-trip formatting, so reading a
//! checkpoint back reproduces every parameter bit for bit. Tensors appear
//! in [`Network::named_parameters`] order.

use std::fmt::Write as _;
use std::path::Path;

use super::{Activation, BackboneConfig, Network, SimilarityKind};
use crate::error::{Error, Result};
use crate::numerics::{Matrix, Scalar};
use crate::optim::Parameters;

const MAGIC: &str = "negmargin-checkpoint";
const VERSION: u32 = 1;

pub fn to_checkpoint_string<T: Scalar>(net: &Network<T>) -> String {
    let cfg = net.config();
    let hidden = if cfg.hidden_dims.is_empty() {
        "-".to_string()
    } else {
        cfg.hidden_dims
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>()
            .join(",")
    };
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "input_dim {}", cfg.input_dim);
    let _ = writeln!(out, "hidden_dims {hidden}");
    let _ = writeln!(out, "feature_dim {}", cfg.feature_dim);
    let _ = writeln!(out, "activation {}", cfg.activation);
    let _ = writeln!(out, "similarity {}", net.similarity());
    let _ = writeln!(out, "classes {}", net.num_classes());
    for (name, m) in net.named_parameters() {
        let _ = writeln!(out, "tensor {name} {} {}", m.rows(), m.cols());
        for r in 0..m.rows() {
            let row: Vec<String> = m.row(r).iter().map(ToString::to_string).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
    }
    out
}

struct Lines<'a> {
    path: &'a str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<&'a str> {
        match self.inner.next() {
            Some((i, l)) => {
                self.line = i + 1;
                Ok(l)
            }
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_string(),
            line: self.line,
            message: message.into(),
        }
    }

    fn field(&mut self, key: &str) -> Result<&'a str> {
        let line = self.next_line()?;
        match line.split_once(' ') {
            Some((k, v)) if k == key => Ok(v.trim()),
            _ => Err(self.err(format!("expected '{key} <value>', found '{line}'"))),
        }
    }

    fn parse<V: std::str::FromStr>(&mut self, key: &str) -> Result<V> {
        let raw = self.field(key)?;
        raw.parse()
            .map_err(|_| self.err(format!("invalid value '{raw}' for {key}")))
    }
}

/// Parses a checkpoint; `path` only labels error messages.
pub fn from_checkpoint_str<T: Scalar>(text: &str, path: &str) -> Result<Network<T>> {
    let mut lines = Lines {
        path,
        inner: text.lines().enumerate(),
        line: 0,
    };
    let header = lines.next_line()?;
    if header != format!("{MAGIC} {VERSION}") {
        return Err(lines.err(format!("not a version {VERSION} checkpoint: '{header}'")));
    }
    let input_dim: usize = lines.parse("input_dim")?;
    let hidden_raw = lines.field("hidden_dims")?;
    let hidden_dims = if hidden_raw == "-" {
        Vec::new()
    } else {
        hidden_raw
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| lines.err(format!("invalid hidden_dims '{hidden_raw}'")))?
    };
    let feature_dim: usize = lines.parse("feature_dim")?;
    let activation_raw = lines.field("activation")?;
    let activation: Activation = activation_raw.parse().map_err(|e: Error| lines.err(e.to_string()))?;
    let similarity_raw = lines.field("similarity")?;
    let similarity: SimilarityKind =
        similarity_raw.parse().map_err(|e: Error| lines.err(e.to_string()))?;
    let classes: usize = lines.parse("classes")?;

    let config = BackboneConfig {
        input_dim,
        hidden_dims,
        feature_dim,
        activation,
    };
    let mut net = Network::<T>::zeros(config, classes, similarity)?;
    let mut failure: Option<Error> = None;
    net.visit_parameters(&mut |name, param, _grad| {
        if failure.is_some() {
            return Ok(());
        }
        let result = (|| -> Result<()> {
            let head = lines.next_line()?;
            let expected = format!("tensor {name} {} {}", param.rows(), param.cols());
            if head.trim() != expected {
                return Err(lines.err(format!("expected '{expected}', found '{head}'")));
            }
            let mut data = Vec::with_capacity(param.rows() * param.cols());
            for _ in 0..param.rows() {
                let row = lines.next_line()?;
                let before = data.len();
                for tok in row.split_whitespace() {
                    let v: T = tok
                        .parse()
                        .map_err(|_| lines.err(format!("invalid number '{tok}'")))?;
                    data.push(v);
                }
                if data.len() - before != param.cols() {
                    return Err(lines.err(format!(
                        "row of {name} has {} values, expected {}",
                        data.len() - before,
                        param.cols()
                    )));
                }
            }
            *param = Matrix::from_vec(param.rows(), param.cols(), data)?;
            Ok(())
        })();
        if let Err(e) = result {
            failure = Some(e);
        }
        Ok(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(net)
}

pub fn save_checkpoint<T: Scalar>(net: &Network<T>, path: &Path) -> Result<()> {
    std::fs::write(path, to_checkpoint_string(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Network<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    from_checkpoint_str(&text, &path.display().to_string())
}
