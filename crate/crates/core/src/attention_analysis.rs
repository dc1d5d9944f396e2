//! Attention diagnostics: per-node entropy and the share of attention that
//! clean nodes spend on injected neighbours.
//!
//! Layers are numbered from 1 and heads from 0, both here and in the CSV.

use std::path::Path;

use crate::error::{Error, Result};
use crate::gat_model::AttentionMap;
use crate::graph_store::CsrAdjacency;
use crate::ndcompute::EdgeVector;

pub const HIST_BINS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct NodeEntropy {
    /// Shannon entropy of each attention row, in nats.
    pub entropy: Vec<f64>,
    /// Entropy divided by `ln(degree)`; 0 for degree-1 rows.
    pub norm_entropy: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RogueMass {
    /// Mean over clean nodes with at least one rogue neighbour; 0 when
    /// there are none.
    pub mean: f64,
    /// Number of such clean nodes.
    pub count: usize,
    /// Per node attention on rogue neighbours (0 for rogue and unexposed
    /// nodes).
    pub per_node: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AttentionStats {
    pub layer_id: usize,
    pub head_id: usize,
    pub per_node_entropy: Vec<f64>,
    pub per_node_norm_entropy: Vec<f64>,
    pub mean_rogue_mass: f64,
    pub rogue_adjacent: usize,
    /// Mean normalized entropy of labeled nodes per class; NaN for a class
    /// with no nodes.
    pub per_class_entropy_means: Vec<f64>,
    /// Counts of normalized entropy in 20 equal bins over `[0, 1]`; the
    /// last bin is closed.
    pub histogram: [usize; HIST_BINS],
}

fn head<'a>(
    attn: &'a AttentionMap,
    adj: &CsrAdjacency,
    layer: usize,
    h: usize,
) -> Result<&'a EdgeVector> {
    let a = layer
        .checked_sub(1)
        .and_then(|l| attn.layers.get(l))
        .and_then(|hs| hs.get(h))
        .ok_or_else(|| Error::Invalid(format!("no attention map for layer {layer} head {h}")))?;
    a.check_aligned(adj, "attention map")?;
    Ok(a)
}

fn row_entropy(row: &[f64]) -> f64 {
    -row.iter()
        .filter(|&&a| a > 0.0)
        .map(|&a| a * a.ln())
        .sum::<f64>()
}

pub fn attention_entropy(
    attn: &AttentionMap,
    adj: &CsrAdjacency,
    layer: usize,
    head_id: usize,
) -> Result<NodeEntropy> {
    let a = head(attn, adj, layer, head_id)?;
    let mut entropy = Vec::with_capacity(adj.n());
    let mut norm_entropy = Vec::with_capacity(adj.n());
    for i in 0..adj.n() {
        let h = row_entropy(&a[adj.row_range(i)]);
        let d = adj.degree(i);
        entropy.push(h);
        norm_entropy.push(if d > 1 { h / (d as f64).ln() } else { 0.0 });
    }
    Ok(NodeEntropy {
        entropy,
        norm_entropy,
    })
}

fn rogue_flags(n: usize, rogue_ids: &[usize]) -> Result<Vec<bool>> {
    let mut is_rogue = vec![false; n];
    for &r in rogue_ids {
        *is_rogue
            .get_mut(r)
            .ok_or_else(|| Error::Invalid(format!("rogue id {r} outside 0..{n}")))? = true;
    }
    Ok(is_rogue)
}

fn mass_with_flags(a: &EdgeVector, adj: &CsrAdjacency, is_rogue: &[bool]) -> RogueMass {
    let mut per_node = vec![0.0; adj.n()];
    let (mut total, mut count) = (0.0, 0);
    for i in (0..adj.n()).filter(|&i| !is_rogue[i]) {
        let r = adj.row_range(i);
        let mut exposed = false;
        let mut m = 0.0;
        for (&j, &x) in adj.col_idx()[r.clone()].iter().zip(&a[r]) {
            if is_rogue[j] {
                exposed = true;
                m += x;
            }
        }
        if exposed {
            per_node[i] = m;
            total += m;
            count += 1;
        }
    }
    RogueMass {
        mean: if count > 0 { total / count as f64 } else { 0.0 },
        count,
        per_node,
    }
}

pub fn rogue_attention_mass(
    attn: &AttentionMap,
    adj: &CsrAdjacency,
    rogue_ids: &[usize],
    layer: usize,
    head_id: usize,
) -> Result<RogueMass> {
    let a = head(attn, adj, layer, head_id)?;
    Ok(mass_with_flags(a, adj, &rogue_flags(adj.n(), rogue_ids)?))
}

fn bin(x: f64) -> usize {
    ((x * HIST_BINS as f64).floor().max(0.0) as usize).min(HIST_BINS - 1)
}

/// Statistics for every (layer, head). `labels` covers the clean nodes
/// `0..labels.len()`; rows past it contribute to the histogram but to no
/// class mean.
pub fn stats_report(
    attn: &AttentionMap,
    adj: &CsrAdjacency,
    rogue_ids: &[usize],
    labels: &[usize],
) -> Result<Vec<AttentionStats>> {
    let n_classes = labels.iter().max().map_or(0, |&m| m + 1);
    let is_rogue = rogue_flags(adj.n(), rogue_ids)?;
    let mut out = Vec::with_capacity(attn.n_maps());
    for (l, k, _) in attn.iter() {
        let ent = attention_entropy(attn, adj, l + 1, k)?;
        let mass = mass_with_flags(head(attn, adj, l + 1, k)?, adj, &is_rogue);
        let mut histogram = [0usize; HIST_BINS];
        for &x in &ent.norm_entropy {
            histogram[bin(x)] += 1;
        }
        let mut sums = vec![0.0; n_classes];
        let mut counts = vec![0usize; n_classes];
        for (i, &c) in labels.iter().enumerate() {
            sums[c] += ent.norm_entropy[i];
            counts[c] += 1;
        }
        out.push(AttentionStats {
            layer_id: l + 1,
            head_id: k,
            per_node_entropy: ent.entropy,
            per_node_norm_entropy: ent.norm_entropy,
            mean_rogue_mass: mass.mean,
            rogue_adjacent: mass.count,
            per_class_entropy_means: sums
                .iter()
                .zip(&counts)
                .map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN })
                .collect(),
            histogram,
        });
    }
    Ok(out)
}

/// Mean normalized entropy over every (layer, head) and clean node
/// `0..n_clean`.
pub fn mean_norm_entropy(attn: &AttentionMap, adj: &CsrAdjacency, n_clean: usize) -> Result<f64> {
    if n_clean == 0 || n_clean > adj.n() || attn.n_maps() == 0 {
        return Err(Error::Invalid(
            "mean_norm_entropy needs clean nodes and maps".into(),
        ));
    }
    let mut total = 0.0;
    for (l, k, _) in attn.iter() {
        total += attention_entropy(attn, adj, l + 1, k)?.norm_entropy[..n_clean]
            .iter()
            .sum::<f64>();
    }
    Ok(total / (attn.n_maps() * n_clean) as f64)
}

/// Mean over (layer, head) of [`rogue_attention_mass`].
pub fn mean_rogue_mass(
    attn: &AttentionMap,
    adj: &CsrAdjacency,
    rogue_ids: &[usize],
) -> Result<f64> {
    if attn.n_maps() == 0 {
        return Err(Error::Invalid("empty attention map".into()));
    }
    let is_rogue = rogue_flags(adj.n(), rogue_ids)?;
    let mut total = 0.0;
    for (l, k, _) in attn.iter() {
        total += mass_with_flags(head(attn, adj, l + 1, k)?, adj, &is_rogue).mean;
    }
    Ok(total / attn.n_maps() as f64)
}

pub const CSV_HEADER: [&str; 8] = [
    "layer",
    "head",
    "node",
    "degree",
    "entropy",
    "norm_entropy",
    "is_rogue_adjacent",
    "rogue_mass",
];

/// One row per (layer, head, node), ascending in that order.
pub fn write_attention_csv(
    path: &Path,
    attn: &AttentionMap,
    adj: &CsrAdjacency,
    rogue_ids: &[usize],
) -> Result<usize> {
    let io = |e: csv::Error| Error::Io {
        path: path.to_path_buf(),
        source: e.into(),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(CSV_HEADER).map_err(io)?;
    let is_rogue = rogue_flags(adj.n(), rogue_ids)?;
    let mut rows = 0;
    for (l, k, a) in attn.iter() {
        let ent = attention_entropy(attn, adj, l + 1, k)?;
        let mass = mass_with_flags(a, adj, &is_rogue);
        for i in 0..adj.n() {
            let exposed = !is_rogue[i] && adj.neighbors(i).iter().any(|&j| is_rogue[j]);
            w.write_record([
                (l + 1).to_string(),
                k.to_string(),
                i.to_string(),
                adj.degree(i).to_string(),
                ent.entropy[i].to_string(),
                ent.norm_entropy[i].to_string(),
                exposed.to_string(),
                mass.per_node[i].to_string(),
            ])
            .map_err(io)?;
            rows += 1;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(rows)
}
