//! Dataset manifests: where the records live and how classes are split.
//!
//! ```text
//! format = idx
//! images = images-idx3-ubyte.gz     # relative to the manifest
//! labels = labels-idx1-ubyte.gz
//! pool = 2                          # optional mean pooling of square images
//! base_classes = 0,1,2,3,4,5,6
//! val_classes =
//! novel_classes = 7,8,9
//! holdout_fraction = 0.1
//! split_seed = 0
//! ```
//!
//! `format = csv` takes `path`; `format = synthetic` takes the
//! [`SyntheticConfig`] fields (`n_classes`, `per_class`, `dim`,
//! `cluster_std`, `confusability`, `seed`, optional `n_base`) and defaults
//! the class split to the generator's base/novel partition.

use std::path::{Path, PathBuf};

use super::{gen_synthetic, load_csv_dataset, load_idx, LabeledDataset, SplitSpec, Splits, SyntheticConfig};
use crate::error::{Error, Result};
use crate::kv::{parse_kv, Entry};

#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Idx { images: PathBuf, labels: PathBuf },
    Csv { path: PathBuf },
    Synthetic(SyntheticConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DataManifest {
    pub source: DataSource,
    /// Mean-pooling factor for square images; 1 leaves features untouched.
    pub pool: usize,
    pub split: SplitSpec,
}

/// A loaded dataset together with its class splits.
#[derive(Clone, Debug)]
pub struct LoadedData {
    pub full: LabeledDataset,
    pub splits: Splits,
}

const KEYS: &[&str] = &[
    "format",
    "images",
    "labels",
    "path",
    "pool",
    "n_classes",
    "per_class",
    "dim",
    "cluster_std",
    "confusability",
    "seed",
    "n_base",
    "base_classes",
    "val_classes",
    "novel_classes",
    "holdout_fraction",
    "split_seed",
];

struct Fields<'a> {
    path: &'a str,
    entries: Vec<Entry>,
}

impl Fields<'_> {
    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }

    fn required(&self, key: &str) -> Result<&Entry> {
        self.get(key).ok_or_else(|| Error::Parse {
            path: self.path.to_string(),
            line: 0,
            message: format!("missing key '{key}'"),
        })
    }

    fn parse_or<V: std::str::FromStr>(&self, key: &str, default: V) -> Result<V> {
        match self.get(key) {
            Some(e) => e.parse(self.path),
            None => Ok(default),
        }
    }
}

impl DataManifest {
    /// Parses manifest text; relative paths resolve against `base_dir`.
    pub fn parse(text: &str, path: &str, base_dir: &Path) -> Result<Self> {
        let entries = parse_kv(text, path)?;
        for e in &entries {
            if !KEYS.contains(&e.key.as_str()) {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: e.line,
                    message: format!("unknown key '{}'", e.key),
                });
            }
        }
        let f = Fields { path, entries };
        let format = f.required("format")?;
        let source = match format.value.as_str() {
            "idx" => DataSource::Idx {
                images: base_dir.join(&f.required("images")?.value),
                labels: base_dir.join(&f.required("labels")?.value),
            },
            "csv" => DataSource::Csv {
                path: base_dir.join(&f.required("path")?.value),
            },
            "synthetic" => DataSource::Synthetic(SyntheticConfig {
                n_classes: f.required("n_classes")?.parse(path)?,
                per_class: f.required("per_class")?.parse(path)?,
                dim: f.required("dim")?.parse(path)?,
                cluster_std: f.parse_or("cluster_std", 0.1)?,
                confusability: f.parse_or("confusability", 0.0)?,
                seed: f.parse_or("seed", 0)?,
                n_base: match f.get("n_base") {
                    Some(e) => Some(e.parse(path)?),
                    None => None,
                },
            }),
            other => {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: format.line,
                    message: format!("unknown format '{other}' (expected idx, csv or synthetic)"),
                })
            }
        };
        let list = |key: &str| f.get(key).map(Entry::list);
        let (base, novel) = match (&source, list("base_classes"), list("novel_classes")) {
            (_, Some(b), Some(n)) => (b, n),
            (DataSource::Synthetic(cfg), b, n) => {
                let (db, dn) = cfg.class_partition();
                (b.unwrap_or(db), n.unwrap_or(dn))
            }
            _ => {
                return Err(Error::Parse {
                    path: path.to_string(),
                    line: 0,
                    message: "base_classes and novel_classes are required for file datasets".into(),
                })
            }
        };
        Ok(Self {
            source,
            pool: f.parse_or("pool", 1)?,
            split: SplitSpec {
                base,
                val: list("val_classes").unwrap_or_default(),
                novel,
                holdout_fraction: f.parse_or("holdout_fraction", 0.1)?,
                seed: f.parse_or("split_seed", 0)?,
            },
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base_dir = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, &path.display().to_string(), base_dir)
    }

    /// Reads the records, applies pooling and splits by class.
    pub fn load_data(&self) -> Result<LoadedData> {
        let mut full = match &self.source {
            DataSource::Idx { images, labels } => load_idx(images, labels)?,
            DataSource::Csv { path } => load_csv_dataset(path)?,
            DataSource::Synthetic(cfg) => gen_synthetic(cfg)?,
        };
        if self.pool > 1 {
            let side = (full.dim() as f64).sqrt().round() as usize;
            full = full.pool_images(side, self.pool)?;
        }
        let splits = self.split.apply(&full)?;
        Ok(LoadedData { full, splits })
    }
}
