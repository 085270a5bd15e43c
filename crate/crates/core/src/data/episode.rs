use super::LabeledDataset;
use crate::error::{ensure, Error, Result};
use crate::numerics::{Matrix, Rng};

/// One N-way K-shot task. Class ids are relabelled `0..way` in the order
/// the classes were drawn.
#[derive(Clone, Debug, PartialEq)]
pub struct Episode {
    pub way: usize,
    pub shot: usize,
    pub query_per_class: usize,
    pub support: Matrix<f64>,
    pub support_labels: Vec<usize>,
    pub query: Matrix<f64>,
    pub query_labels: Vec<usize>,
    /// Dataset class id of each episode class.
    pub classes: Vec<usize>,
    /// Dataset record indices behind `support` and `query`.
    pub support_indices: Vec<usize>,
    pub query_indices: Vec<usize>,
}

/// Draws `way` classes and, for each, `shot + query` distinct records,
/// all uniformly without replacement.
pub fn sample_episode(
    ds: &LabeledDataset,
    way: usize,
    shot: usize,
    query: usize,
    rng: &mut Rng,
) -> Result<Episode> {
    ensure!(way >= 1 && shot >= 1 && query >= 1, "way, shot and query must be at least 1");
    ensure!(
        ds.num_classes() >= way,
        "{way}-way episode needs {way} classes, dataset has {}",
        ds.num_classes()
    );
    let by_class = ds.indices_by_class();
    let classes = rng.choose_distinct(ds.num_classes(), way);
    let mut support_indices = Vec::with_capacity(way * shot);
    let mut query_indices = Vec::with_capacity(way * query);
    let mut support_labels = Vec::with_capacity(way * shot);
    let mut query_labels = Vec::with_capacity(way * query);
    for (new, &c) in classes.iter().enumerate() {
        let members = &by_class[c];
        if members.len() < shot + query {
            return Err(Error::contract(format!(
                "class '{}' has {} records, episode needs {}",
                ds.class_names()[c],
                members.len(),
                shot + query
            )));
        }
        let picks = rng.choose_distinct(members.len(), shot + query);
        for (j, &p) in picks.iter().enumerate() {
            if j < shot {
                support_indices.push(members[p]);
                support_labels.push(new);
            } else {
                query_indices.push(members[p]);
                query_labels.push(new);
            }
        }
    }
    Ok(Episode {
        way,
        shot,
        query_per_class: query,
        support: ds.features().select_rows(&support_indices),
        support_labels,
        query: ds.features().select_rows(&query_indices),
        query_labels,
        classes,
        support_indices,
        query_indices,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{gen_synthetic, SyntheticConfig};
    use std::collections::BTreeSet;

    fn ds(per_class: usize) -> LabeledDataset {
        gen_synthetic(&SyntheticConfig {
            n_classes: 6,
            per_class,
            dim: 3,
            cluster_std: 0.3,
            confusability: 0.0,
            seed: 2,
            n_base: None,
        })
        .unwrap()
    }

    #[test]
    fn standard_sizes() {
        let d = ds(30);
        let mut rng = Rng::new(0);
        let e = sample_episode(&d, 5, 1, 16, &mut rng).unwrap();
        assert_eq!((e.support.rows(), e.query.rows()), (5, 80));
        let e = sample_episode(&d, 5, 5, 16, &mut rng).unwrap();
        assert_eq!((e.support.rows(), e.query.rows()), (25, 80));
    }

    #[test]
    fn exhaustive_episode_uses_every_record_once() {
        let d = ds(4);
        let e = sample_episode(&d, 6, 1, 3, &mut Rng::new(1)).unwrap();
        let all: BTreeSet<usize> = e.support_indices.iter().chain(&e.query_indices).copied().collect();
        assert_eq!(all.len(), d.len());
    }

    #[test]
    fn labels_follow_source_classes() {
        let d = ds(10);
        let e = sample_episode(&d, 3, 2, 2, &mut Rng::new(5)).unwrap();
        for (i, &idx) in e.support_indices.iter().enumerate() {
            assert_eq!(e.classes[e.support_labels[i]], d.labels()[idx]);
        }
        for (i, &idx) in e.query_indices.iter().enumerate() {
            assert_eq!(e.classes[e.query_labels[i]], d.labels()[idx]);
        }
    }

    #[test]
    fn insufficient_records_name_the_class() {
        let d = ds(3);
        match sample_episode(&d, 2, 2, 2, &mut Rng::new(0)) {
            Err(Error::Contract(msg)) => assert!(msg.contains("class 'c")),
            other => panic!("expected contract error, got {other:?}"),
        }
        assert!(sample_episode(&d, 7, 1, 1, &mut Rng::new(0)).is_err());
    }
}
