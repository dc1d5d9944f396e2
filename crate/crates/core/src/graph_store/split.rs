use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::rng_from;

/// Transductive train/validation/test node sets. Each set is sorted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub per_class_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            per_class_train: 20,
            n_val: 500,
            n_test: 1000,
        }
    }
}

/// Draws `per_class_train` training nodes from every class, then `n_val`
/// and `n_test` nodes uniformly without replacement from the remainder.
pub fn make_split(ds: &Dataset, spec: &SplitSpec, seed: u64) -> Result<Split> {
    let need = spec.per_class_train * ds.n_classes + spec.n_val + spec.n_test;
    if need > ds.n_nodes {
        return Err(Error::Invalid(format!(
            "split needs {need} nodes, dataset has {}",
            ds.n_nodes
        )));
    }
    let mut rng = rng_from(seed);
    let mut in_train = vec![false; ds.n_nodes];
    let mut train_idx = Vec::with_capacity(spec.per_class_train * ds.n_classes);
    for (class, mut members) in ds.class_members().into_iter().enumerate() {
        if members.len() < spec.per_class_train {
            return Err(Error::InsufficientClass {
                class,
                available: members.len(),
                required: spec.per_class_train,
            });
        }
        members.shuffle(&mut rng);
        for &i in &members[..spec.per_class_train] {
            in_train[i] = true;
            train_idx.push(i);
        }
    }
    let mut rest: Vec<usize> = (0..ds.n_nodes).filter(|&i| !in_train[i]).collect();
    rest.shuffle(&mut rng);
    let mut val_idx = rest[..spec.n_val].to_vec();
    let mut test_idx = rest[spec.n_val..spec.n_val + spec.n_test].to_vec();
    train_idx.sort_unstable();
    val_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok(Split {
        train_idx,
        val_idx,
        test_idx,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ndcompute::Matrix;
    use std::collections::HashSet;

    fn fixture(labels: Vec<usize>, n_classes: usize) -> Dataset {
        let n = labels.len();
        Dataset {
            n_nodes: n,
            n_features: 1,
            n_classes,
            features: Matrix::zeros(n, 1),
            labels,
            label_names: (0..n_classes).map(|c| format!("c{c}")).collect(),
            node_ids: (0..n).map(|i| i.to_string()).collect(),
            edges: vec![],
        }
    }

    #[test]
    fn small_split_sizes_and_disjointness() {
        let ds = fixture(vec![0, 1, 0, 1, 0, 1], 2);
        let spec = SplitSpec {
            per_class_train: 1,
            n_val: 1,
            n_test: 1,
        };
        let s = make_split(&ds, &spec, 7).unwrap();
        assert_eq!(
            (s.train_idx.len(), s.val_idx.len(), s.test_idx.len()),
            (2, 1, 1)
        );
        let all: HashSet<_> = s
            .train_idx
            .iter()
            .chain(&s.val_idx)
            .chain(&s.test_idx)
            .collect();
        assert_eq!(all.len(), 4);
        let train_labels: Vec<_> = s.train_idx.iter().map(|&i| ds.labels[i]).collect();
        assert!(train_labels.contains(&0) && train_labels.contains(&1));
        assert_eq!(make_split(&ds, &spec, 7).unwrap(), s);
    }

    #[test]
    fn seeds_change_membership_not_sizes() {
        let ds = fixture((0..60).map(|i| i % 3).collect(), 3);
        let spec = SplitSpec {
            per_class_train: 4,
            n_val: 10,
            n_test: 20,
        };
        let a = make_split(&ds, &spec, 1).unwrap();
        let b = make_split(&ds, &spec, 2).unwrap();
        assert_ne!(a, b);
        assert_eq!(a.train_idx.len(), b.train_idx.len());
        assert_eq!(a.test_idx.len(), b.test_idx.len());
    }

    #[test]
    fn insufficient_class_is_named() {
        let ds = fixture(vec![0, 0, 0, 1], 2);
        let spec = SplitSpec {
            per_class_train: 2,
            n_val: 0,
            n_test: 0,
        };
        assert!(matches!(
            make_split(&ds, &spec, 0),
            Err(Error::InsufficientClass {
                class: 1,
                available: 1,
                required: 2
            })
        ));
        let spec = SplitSpec {
            per_class_train: 1,
            n_val: 2,
            n_test: 1,
        };
        assert!(matches!(make_split(&ds, &spec, 0), Err(Error::Invalid(_))));
    }
}
