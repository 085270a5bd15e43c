use std::collections::{BTreeMap, BTreeSet};

use super::{LabeledDataset, SplitTag};
use crate::error::{ensure, Error, Result};
use crate::numerics::Rng;

/// Class-level assignment to base / val / novel plus the fraction of each
/// base class's records held out for base-class evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitSpec {
    pub base: Vec<String>,
    pub val: Vec<String>,
    pub novel: Vec<String>,
    pub holdout_fraction: f64,
    pub seed: u64,
}

/// Datasets produced by [`SplitSpec::apply`].
#[derive(Clone, Debug)]
pub struct Splits {
    /// Base-class records used for pretraining.
    pub base_train: LabeledDataset,
    /// Held-out records of the same base classes.
    pub base_holdout: LabeledDataset,
    pub val: LabeledDataset,
    pub novel: LabeledDataset,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let mut owner: BTreeMap<&str, &str> = BTreeMap::new();
        for (tag, names) in [("base", &self.base), ("val", &self.val), ("novel", &self.novel)] {
            for n in names {
                if let Some(prev) = owner.insert(n.as_str(), tag) {
                    return Err(Error::contract(format!(
                        "class '{n}' is assigned to both {prev} and {tag}"
                    )));
                }
            }
        }
        ensure!(!self.base.is_empty(), "split has no base classes");
        ensure!(
            (0.0..1.0).contains(&self.holdout_fraction),
            "holdout fraction must lie in [0, 1), got {}",
            self.holdout_fraction
        );
        Ok(())
    }

    pub fn apply(&self, ds: &LabeledDataset) -> Result<Splits> {
        self.validate()?;
        let base_all = ds.select_classes(&self.base, SplitTag::Base)?;
        let val = ds.select_classes(&self.val, SplitTag::Val)?;
        let novel = ds.select_classes(&self.novel, SplitTag::Novel)?;

        let mut rng = Rng::new(self.seed).child("holdout");
        let mut train_idx = Vec::new();
        let mut hold_idx = Vec::new();
        for mut members in base_all.indices_by_class() {
            rng.shuffle(&mut members);
            let n = members.len();
            let mut k = (self.holdout_fraction * n as f64).round() as usize;
            if self.holdout_fraction > 0.0 {
                // Every base class keeps at least one record on each side so
                // class ids agree between the two halves.
                ensure!(n >= 2, "base class with {n} record(s) cannot be held out");
                k = k.clamp(1, n - 1);
            }
            hold_idx.extend_from_slice(&members[..k]);
            train_idx.extend_from_slice(&members[k..]);
        }
        train_idx.sort_unstable();
        hold_idx.sort_unstable();
        let base_train = base_all.subset(&train_idx)?;
        let base_holdout = base_all.subset(&hold_idx)?;
        Ok(Splits {
            base_train,
            base_holdout,
            val,
            novel,
        })
    }
}

/// Fails when any class name appears in both datasets.
pub fn ensure_class_disjoint(a: &LabeledDataset, b: &LabeledDataset) -> Result<()> {
    let left: BTreeSet<&String> = a.class_names().iter().collect();
    let shared: Vec<&String> = b.class_names().iter().filter(|n| left.contains(n)).collect();
    if shared.is_empty() {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "open-set violation: classes {shared:?} occur in both {} and {} data",
            a.split(),
            b.split()
        )))
    }
}
