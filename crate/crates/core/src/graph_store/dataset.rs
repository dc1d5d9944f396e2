use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ndcompute::Matrix;

/// A node-classification graph: binary bag-of-words features, integer labels
/// and an undirected edge list.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub features: Matrix,
    pub labels: Vec<usize>,
    /// Label strings; `label_names[c]` is the original name of class `c`.
    pub label_names: Vec<String>,
    pub node_ids: Vec<String>,
    pub edges: Vec<(usize, usize)>,
}

impl Dataset {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(format!("dataset: {m}")));
        if self.features.shape() != (self.n_nodes, self.n_features) {
            return bad(format!(
                "features are {:?}, expected {}x{}",
                self.features.shape(),
                self.n_nodes,
                self.n_features
            ));
        }
        if self.labels.len() != self.n_nodes || self.node_ids.len() != self.n_nodes {
            return bad("labels/node_ids length differs from n_nodes".into());
        }
        if self.label_names.len() != self.n_classes {
            return bad("label_names length differs from n_classes".into());
        }
        if let Some(l) = self.labels.iter().find(|&&l| l >= self.n_classes) {
            return bad(format!("label {l} outside 0..{}", self.n_classes));
        }
        if let Some(e) = self
            .edges
            .iter()
            .find(|&&(a, b)| a >= self.n_nodes || b >= self.n_nodes)
        {
            return bad(format!("edge {e:?} outside 0..{}", self.n_nodes));
        }
        let mut seen = HashMap::with_capacity(self.n_nodes);
        for (i, id) in self.node_ids.iter().enumerate() {
            if let Some(j) = seen.insert(id.as_str(), i) {
                return bad(format!("node id {id:?} appears at {j} and {i}"));
            }
        }
        if self
            .features
            .data()
            .iter()
            .any(|&x| !(x >= 0.0) || !x.is_finite())
        {
            return bad("negative or non-finite feature".into());
        }
        Ok(())
    }

    /// Node indices per class, ascending.
    pub fn class_members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_classes];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    /// Mean fraction of nonzero features per row.
    pub fn feature_density(&self) -> f64 {
        if self.n_nodes == 0 || self.n_features == 0 {
            return 0.0;
        }
        let nnz = self.features.data().iter().filter(|&&x| x != 0.0).count();
        nnz as f64 / (self.n_nodes * self.n_features) as f64
    }
}

/// Outcome of [`load_planetoid`].
#[derive(Clone, Debug)]
pub struct PlanetoidLoad {
    pub dataset: Dataset,
    /// Citation lines naming an id absent from the content file.
    pub skipped_cites: usize,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

/// Reads a `.content` / `.cites` pair.
///
/// Content lines are `<id>\t<f_1>…\t<f_d>\t<label>` with literal `0`/`1`
/// features; cite lines are `<cited_id>\t<citing_id>`. Labels are numbered by
/// first appearance. Citations naming unknown ids are skipped and counted.
pub fn load_planetoid(content_path: &Path, cites_path: &Path) -> Result<PlanetoidLoad> {
    let content = read_text(content_path)?;
    let perr = |path: &Path, line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut n_features = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut node_ids = Vec::new();
    let mut label_names: Vec<String> = Vec::new();
    let mut label_index: HashMap<String, usize> = HashMap::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();

    for (ln, line) in lines(&content) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() < 3 {
            return Err(perr(
                content_path,
                ln,
                format!(
                    "expected id, features and label, found {} columns",
                    cols.len()
                ),
            ));
        }
        let d = cols.len() - 2;
        match n_features {
            None => n_features = Some(d),
            Some(expected) if expected != d => {
                return Err(perr(
                    content_path,
                    ln,
                    format!("{d} features, previous lines have {expected}"),
                ))
            }
            _ => {}
        }
        let id = cols[0].to_string();
        if id_index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(perr(content_path, ln, format!("duplicate node id {id:?}")));
        }
        for tok in &cols[1..=d] {
            features.push(match *tok {
                "0" => 0.0,
                "1" => 1.0,
                other => {
                    return Err(perr(
                        content_path,
                        ln,
                        format!("feature token {other:?} is not 0 or 1"),
                    ))
                }
            });
        }
        let name = cols[d + 1];
        let next = label_names.len();
        let label = *label_index.entry(name.to_string()).or_insert_with(|| {
            label_names.push(name.to_string());
            next
        });
        labels.push(label);
        node_ids.push(id);
    }

    let Some(n_features) = n_features else {
        return Err(Error::Parse {
            path: content_path.to_path_buf(),
            line: 0,
            msg: "content file has no node lines".into(),
        });
    };

    let cites = read_text(cites_path)?;
    let mut edges = Vec::new();
    let mut skipped = 0;
    for (ln, line) in lines(&cites) {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(perr(
                cites_path,
                ln,
                format!("expected 2 columns, found {}", cols.len()),
            ));
        }
        match (id_index.get(cols[0]), id_index.get(cols[1])) {
            (Some(&a), Some(&b)) => edges.push((a, b)),
            _ => skipped += 1,
        }
    }

    let n_nodes = node_ids.len();
    let dataset = Dataset {
        n_nodes,
        n_features,
        n_classes: label_names.len(),
        features: Matrix::from_vec(n_nodes, n_features, features)?,
        labels,
        label_names,
        node_ids,
        edges,
    };
    Ok(PlanetoidLoad {
        dataset,
        skipped_cites: skipped,
    })
}

/// Writes `ds` in the format read by [`load_planetoid`]. Features are
/// written as `1` where nonzero.
pub fn write_planetoid(ds: &Dataset, content_path: &Path, cites_path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(ds.n_nodes * (2 * ds.n_features + 32));
    for i in 0..ds.n_nodes {
        out.extend_from_slice(ds.node_ids[i].as_bytes());
        for &x in ds.features.row(i) {
            out.extend_from_slice(if x != 0.0 { b"\t1" } else { b"\t0" });
        }
        out.push(b'\t');
        out.extend_from_slice(ds.label_names[ds.labels[i]].as_bytes());
        out.push(b'\n');
    }
    fs::write(content_path, out).map_err(|e| Error::io(content_path, e))?;

    let mut f = fs::File::create(cites_path).map_err(|e| Error::io(cites_path, e))?;
    let mut buf = String::new();
    for &(a, b) in &ds.edges {
        buf.push_str(&ds.node_ids[a]);
        buf.push('\t');
        buf.push_str(&ds.node_ids[b]);
        buf.push('\n');
    }
    f.write_all(buf.as_bytes())
        .map_err(|e| Error::io(cites_path, e))
}

/// Divides each row with a positive sum by that sum. All-zero rows are left
/// as they are.
pub fn row_normalize(features: &Matrix) -> Matrix {
    let mut out = features.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let s: f64 = row.iter().sum();
        if s > 0.0 {
            for x in row.iter_mut() {
                *x /= s;
            }
        }
    }
    out
}
