//! Generated citation graphs.
//!
//! [`cora_like`] matches the public Cora statistics (2708 nodes, 1433 binary
//! word features, 7 classes with Cora's class sizes, 5278 undirected edges,
//! about 18 words per document, edge homophily about 0.81) and is what the
//! test-suite trains on when the real files are not present. Features follow
//! a topic model: each class owns a small vocabulary subset that a document
//! draws from with probability `topic_prob`, and the rest of its words are
//! uniform over the vocabulary.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{make_split, Dataset, Split, SplitSpec};
use crate::ndcompute::Matrix;
use crate::rng::rng_from;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub class_sizes: Vec<usize>,
    pub n_features: usize,
    /// Inclusive range of word draws per document (duplicates collapse).
    pub doc_len: (usize, usize),
    pub topic_size: usize,
    pub topic_prob: f64,
    pub n_edges: usize,
    pub homophily: f64,
    /// Pareto tail index of the per-node attachment weights.
    pub degree_tail: f64,
    pub max_weight: f64,
}

impl SyntheticSpec {
    pub fn n_nodes(&self) -> usize {
        self.class_sizes.iter().sum()
    }
}

/// Cora-sized generator settings.
pub fn cora_like() -> SyntheticSpec {
    SyntheticSpec {
        class_sizes: vec![818, 426, 418, 351, 298, 217, 180],
        n_features: 1433,
        doc_len: (10, 27),
        topic_size: 150,
        topic_prob: 0.2,
        n_edges: 5278,
        homophily: 0.81,
        degree_tail: 2.0,
        max_weight: 40.0,
    }
}

fn weighted_pick(rng: &mut ChaCha8Rng, nodes: &[usize], cum: &[f64]) -> usize {
    let total = *cum.last().unwrap();
    let u = rng.gen::<f64>() * total;
    let k = cum.partition_point(|&c| c <= u).min(nodes.len() - 1);
    nodes[k]
}

fn cumulative(nodes: &[usize], w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    nodes
        .iter()
        .map(|&i| {
            acc += w[i];
            acc
        })
        .collect()
}

pub fn generate(spec: &SyntheticSpec, seed: u64) -> Dataset {
    let mut rng = rng_from(seed);
    let n = spec.n_nodes();
    let n_classes = spec.class_sizes.len();
    let f = spec.n_features;

    let mut labels: Vec<usize> = spec
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &s)| std::iter::repeat(c).take(s))
        .collect();
    labels.shuffle(&mut rng);

    let vocab: Vec<usize> = (0..f).collect();
    let topics: Vec<Vec<usize>> = (0..n_classes)
        .map(|_| {
            vocab
                .choose_multiple(&mut rng, spec.topic_size.min(f))
                .copied()
                .collect()
        })
        .collect();

    let mut features = Matrix::zeros(n, f);
    for i in 0..n {
        let len = rng.gen_range(spec.doc_len.0..=spec.doc_len.1);
        let row = features.row_mut(i);
        for _ in 0..len {
            let w = if rng.gen_bool(spec.topic_prob) {
                *topics[labels[i]].choose(&mut rng).unwrap()
            } else {
                rng.gen_range(0..f)
            };
            row[w] = 1.0;
        }
    }

    let weights: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(f64::EPSILON..1.0);
            u.powf(-1.0 / spec.degree_tail).min(spec.max_weight)
        })
        .collect();
    let all: Vec<usize> = (0..n).collect();
    let all_cum = cumulative(&all, &weights);
    let members: Vec<Vec<usize>> = (0..n_classes)
        .map(|c| (0..n).filter(|&i| labels[i] == c).collect())
        .collect();
    let member_cum: Vec<Vec<f64>> = members.iter().map(|m| cumulative(m, &weights)).collect();

    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(spec.n_edges * 2);
    let mut edges = Vec::with_capacity(spec.n_edges);
    let mut degree = vec![0usize; n];
    let partner = |rng: &mut ChaCha8Rng, i: usize| -> usize {
        let c = labels[i];
        if rng.gen_bool(spec.homophily) && members[c].len() > 1 {
            weighted_pick(rng, &members[c], &member_cum[c])
        } else {
            loop {
                let j = weighted_pick(rng, &all, &all_cum);
                if labels[j] != c || n_classes == 1 {
                    break j;
                }
            }
        }
    };
    let mut add = |i: usize, j: usize, edges: &mut Vec<(usize, usize)>, degree: &mut [usize]| {
        if i == j || !seen.insert((i.min(j), i.max(j))) {
            return false;
        }
        edges.push((i, j));
        degree[i] += 1;
        degree[j] += 1;
        true
    };

    // every node cites at least once
    let mut order = all.clone();
    order.shuffle(&mut rng);
    for &i in &order {
        if edges.len() >= spec.n_edges {
            break;
        }
        while degree[i] == 0 {
            let j = partner(&mut rng, i);
            add(i, j, &mut edges, &mut degree);
        }
    }
    while edges.len() < spec.n_edges {
        let i = weighted_pick(&mut rng, &all, &all_cum);
        let j = partner(&mut rng, i);
        add(i, j, &mut edges, &mut degree);
    }

    Dataset {
        n_nodes: n,
        n_features: f,
        n_classes,
        features,
        labels,
        label_names: (0..n_classes).map(|c| format!("topic_{c}")).collect(),
        node_ids: (0..n).map(|i| format!("{}", 10_000 + i)).collect(),
        edges,
    }
}

/// A graph together with a split sized for it.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub dataset: Dataset,
    pub split: Split,
}

/// Twenty nodes in two disjoint, fully connected clusters of ten. Cluster
/// `c` carries label `c` and the prototype features `4c..4c+4` plus one
/// random shared feature. Two training nodes per class.
pub fn two_cluster_fixture(seed: u64) -> Fixture {
    let mut rng = rng_from(seed);
    let n = 20;
    let f = 10;
    let labels: Vec<usize> = (0..n).map(|i| i / 10).collect();
    let mut features = Matrix::zeros(n, f);
    for i in 0..n {
        let c = labels[i];
        for k in 0..4 {
            features.set(i, 4 * c + k, 1.0);
        }
        features.set(i, 8 + rng.gen_range(0..2), 1.0);
    }
    let mut edges = Vec::new();
    for c in 0..2 {
        for a in 0..10 {
            for b in a + 1..10 {
                edges.push((10 * c + a, 10 * c + b));
            }
        }
    }
    let dataset = Dataset {
        n_nodes: n,
        n_features: f,
        n_classes: 2,
        features,
        labels,
        label_names: vec!["left".into(), "right".into()],
        node_ids: (0..n).map(|i| format!("n{i}")).collect(),
        edges,
    };
    let spec = SplitSpec {
        per_class_train: 2,
        n_val: 4,
        n_test: 12,
    };
    let split = make_split(&dataset, &spec, seed).expect("fixture is large enough");
    Fixture { dataset, split }
}
