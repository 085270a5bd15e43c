use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::error::{ensure, Error, Result};
use crate::numerics::Matrix;

/// Which side of the class split a dataset belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SplitTag {
    Base,
    Val,
    Novel,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Base => "base",
            SplitTag::Val => "val",
            SplitTag::Novel => "novel",
        }
    }
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(SplitTag::Base),
            "val" => Ok(SplitTag::Val),
            "novel" => Ok(SplitTag::Novel),
            other => Err(Error::contract(format!("unknown split '{other}'"))),
        }
    }
}

/// Feature vectors with class ids.
///
/// Class ids index `class_names`; names carry the identity of a class
/// across relabelled subsets (the open-set check compares names).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    features: Matrix<f64>,
    labels: Vec<usize>,
    class_names: Vec<String>,
    split: SplitTag,
}

impl LabeledDataset {
    /// Validates that every label indexes `class_names` and that every
    /// class has at least one record.
    pub fn new(
        features: Matrix<f64>,
        labels: Vec<usize>,
        class_names: Vec<String>,
        split: SplitTag,
    ) -> Result<Self> {
        ensure!(
            features.rows() == labels.len(),
            "{} feature rows but {} labels",
            features.rows(),
            labels.len()
        );
        let mut seen = vec![false; class_names.len()];
        for (i, &y) in labels.iter().enumerate() {
            ensure!(
                y < class_names.len(),
                "record {i} has class id {y} but only {} classes are named",
                class_names.len()
            );
            seen[y] = true;
        }
        if !labels.is_empty() {
            if let Some(c) = seen.iter().position(|s| !s) {
                return Err(Error::contract(format!(
                    "class '{}' has no records",
                    class_names[c]
                )));
            }
        }
        let unique: BTreeSet<&String> = class_names.iter().collect();
        ensure!(unique.len() == class_names.len(), "duplicate class names");
        Ok(Self {
            features,
            labels,
            class_names,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Matrix<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn split(&self) -> SplitTag {
        self.split
    }

    pub fn with_split(mut self, split: SplitTag) -> Self {
        self.split = split;
        self
    }

    /// Record indices grouped by class id.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_classes()];
        for (i, &y) in self.labels.iter().enumerate() {
            out[y].push(i);
        }
        out
    }

    /// Records at `indices`, keeping only the classes that still occur and
    /// relabelling them `0..` in original class order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        ensure!(
            indices.iter().all(|&i| i < self.len()),
            "subset index out of range"
        );
        let present: BTreeSet<usize> = indices.iter().map(|&i| self.labels[i]).collect();
        let mut remap = vec![usize::MAX; self.num_classes()];
        let mut names = Vec::with_capacity(present.len());
        for (new, &old) in present.iter().enumerate() {
            remap[old] = new;
            names.push(self.class_names[old].clone());
        }
        let labels = indices.iter().map(|&i| remap[self.labels[i]]).collect();
        Self::new(self.features.select_rows(indices), labels, names, self.split)
    }

    /// Records of the named classes, relabelled in the order given.
    pub fn select_classes(&self, names: &[String], split: SplitTag) -> Result<Self> {
        let mut remap = vec![usize::MAX; self.num_classes()];
        for (new, name) in names.iter().enumerate() {
            let old = self
                .class_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::contract(format!("dataset has no class named '{name}'")))?;
            remap[old] = new;
        }
        let indices: Vec<usize> = (0..self.len())
            .filter(|&i| remap[self.labels[i]] != usize::MAX)
            .collect();
        let labels = indices.iter().map(|&i| remap[self.labels[i]]).collect();
        Self::new(
            self.features.select_rows(&indices),
            labels,
            names.to_vec(),
            split,
        )
    }

    /// Same records with features replaced, e.g. by backbone embeddings.
    pub fn with_features(&self, features: Matrix<f64>) -> Result<Self> {
        ensure!(
            features.rows() == self.len(),
            "replacement features have {} rows, dataset has {}",
            features.rows(),
            self.len()
        );
        Ok(Self {
            features,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
            split: self.split,
        })
    }

    /// Mean-pools square images of side `side` over `factor × factor`
    /// blocks. `side` must be divisible by `factor`.
    pub fn pool_images(&self, side: usize, factor: usize) -> Result<Self> {
        ensure!(factor >= 1, "pooling factor must be at least 1");
        ensure!(
            side * side == self.dim(),
            "features of width {} are not {side}x{side} images",
            self.dim()
        );
        ensure!(side % factor == 0, "image side {side} not divisible by {factor}");
        if factor == 1 {
            return Ok(self.clone());
        }
        let out_side = side / factor;
        let norm = 1.0 / (factor * factor) as f64;
        let mut data = Vec::with_capacity(self.len() * out_side * out_side);
        for r in 0..self.len() {
            let img = self.features.row(r);
            for by in 0..out_side {
                for bx in 0..out_side {
                    let mut acc = 0.0;
                    for dy in 0..factor {
                        for dx in 0..factor {
                            acc += img[(by * factor + dy) * side + bx * factor + dx];
                        }
                    }
                    data.push(acc * norm);
                }
            }
        }
        self.with_features(Matrix::from_vec(self.len(), out_side * out_side, data)?)
    }
}
