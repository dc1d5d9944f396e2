use std::ops::Range;

use crate::error::{Error, Result};

/// Symmetric, self-looped neighbourhood structure in compressed sparse rows.
///
/// Row `i` lists `neigh(i)` in strictly increasing order and always contains
/// `i`. Per-edge quantities ([`EdgeVector`](crate::ndcompute::EdgeVector))
/// are laid out along `col_idx`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CsrAdjacency {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

/// Symmetrises `edges`, drops duplicates, adds a self-loop to every node and
/// sorts each row.
pub fn build_csr(edges: &[(usize, usize)], n: usize) -> Result<CsrAdjacency> {
    let mut rows: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::Invalid(format!(
                "edge ({a}, {b}) has an endpoint outside 0..{n}"
            )));
        }
        rows[a].push(b);
        rows[b].push(a);
    }
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n + 2 * edges.len());
    row_ptr.push(0);
    for mut r in rows {
        r.sort_unstable();
        r.dedup();
        col_idx.extend_from_slice(&r);
        row_ptr.push(col_idx.len());
    }
    Ok(CsrAdjacency {
        n,
        row_ptr,
        col_idx,
    })
}

impl CsrAdjacency {
    /// Rebuilds from raw arrays, validating every invariant.
    pub fn from_parts(n: usize, row_ptr: Vec<usize>, col_idx: Vec<usize>) -> Result<Self> {
        let bad = |m: String| Err(Error::Invalid(format!("csr: {m}")));
        if row_ptr.len() != n + 1 || row_ptr[0] != 0 || row_ptr[n] != col_idx.len() {
            return bad("row_ptr does not frame col_idx".into());
        }
        let adj = Self {
            n,
            row_ptr,
            col_idx,
        };
        for i in 0..n {
            if adj.row_ptr[i] > adj.row_ptr[i + 1] {
                return bad(format!("row {i} has negative length"));
            }
            let row = adj.neighbors(i);
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return bad(format!("row {i} is not strictly increasing"));
            }
            if row.last().is_some_and(|&j| j >= n) {
                return bad(format!("row {i} references a node outside 0..{n}"));
            }
            if !adj.contains(i, i) {
                return bad(format!("row {i} lacks its self-loop"));
            }
            if let Some(&j) = row.iter().find(|&&j| !adj.contains(j, i)) {
                return bad(format!("edge ({i}, {j}) has no reverse"));
            }
        }
        Ok(adj)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries, self-loops included.
    #[inline]
    pub fn n_edges(&self) -> usize {
        self.col_idx.len()
    }

    /// Distinct undirected edges, self-loops excluded.
    pub fn n_undirected_edges(&self) -> usize {
        (self.col_idx.len() - self.n) / 2
    }

    #[inline]
    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    #[inline]
    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    #[inline]
    pub fn row_range(&self, i: usize) -> Range<usize> {
        self.row_ptr[i]..self.row_ptr[i + 1]
    }

    #[inline]
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.col_idx[self.row_range(i)]
    }

    /// `|neigh(i)|`, counting the self-loop.
    #[inline]
    pub fn degree(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Position of the self-loop `(i, i)` in `col_idx`.
    pub fn self_loop_index(&self, i: usize) -> usize {
        let pos = self
            .neighbors(i)
            .binary_search(&i)
            .expect("every row carries its self-loop");
        self.row_ptr[i] + pos
    }

    /// Row index of every stored entry, aligned with `col_idx`.
    pub fn edge_rows(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_edges());
        for i in 0..self.n {
            out.extend(std::iter::repeat(i).take(self.degree(i)));
        }
        out
    }

    /// Undirected edges `(i, j)` with `i < j`, in row order.
    pub fn edge_list(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_undirected_edges());
        for i in 0..self.n {
            out.extend(
                self.neighbors(i)
                    .iter()
                    .filter(|&&j| j > i)
                    .map(|&j| (i, j)),
            );
        }
        out
    }

    /// Subgraph induced by nodes `0..m`.
    pub fn induced_prefix(&self, m: usize) -> CsrAdjacency {
        assert!(m <= self.n);
        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for i in 0..m {
            col_idx.extend(self.neighbors(i).iter().copied().filter(|&j| j < m));
            row_ptr.push(col_idx.len());
        }
        CsrAdjacency {
            n: m,
            row_ptr,
            col_idx,
        }
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> CsrAdjacency {
        let edges: Vec<_> = self
            .edge_list()
            .into_iter()
            .map(|(i, j)| (perm[i], perm[j]))
            .collect();
        build_csr(&edges, self.n).expect("permutation keeps endpoints in range")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn self_loops_only() {
        let a = build_csr(&[], 3).unwrap();
        for i in 0..3 {
            assert_eq!(a.neighbors(i), &[i]);
        }
        assert_eq!(a.n_undirected_edges(), 0);
    }

    #[test]
    fn dedup_and_symmetry() {
        let a = build_csr(&[(0, 1), (1, 0), (0, 1)], 2).unwrap();
        assert_eq!(a.neighbors(0), &[0, 1]);
        assert_eq!(a.neighbors(1), &[0, 1]);
    }

    #[test]
    fn path_layout() {
        let a = build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        assert_eq!(a.row_ptr(), &[0, 2, 5, 7]);
        assert_eq!(a.col_idx(), &[0, 1, 0, 1, 2, 1, 2]);
        assert_eq!(a.self_loop_index(1), 3);
        assert_eq!(a.edge_rows(), vec![0, 0, 1, 1, 1, 2, 2]);
    }

    #[test]
    fn out_of_range_endpoint() {
        assert!(matches!(build_csr(&[(0, 3)], 3), Err(Error::Invalid(_))));
    }

    #[test]
    fn from_parts_validates() {
        let a = build_csr(&[(0, 1), (1, 2)], 3).unwrap();
        let ok = CsrAdjacency::from_parts(3, a.row_ptr().to_vec(), a.col_idx().to_vec()).unwrap();
        assert_eq!(ok, a);
        // drop the reverse of (1, 2)
        assert!(CsrAdjacency::from_parts(3, vec![0, 2, 5, 6], vec![0, 1, 0, 1, 2, 2]).is_err());
        // missing self-loop
        assert!(CsrAdjacency::from_parts(2, vec![0, 1, 2], vec![1, 0]).is_err());
    }

    #[test]
    fn induced_prefix_drops_tail_nodes() {
        let a = build_csr(&[(0, 1), (1, 2), (0, 2)], 3).unwrap();
        assert_eq!(a.induced_prefix(2), build_csr(&[(0, 1)], 2).unwrap());
    }

    proptest! {
        #[test]
        fn invariants_and_idempotence(n in 1usize..30, raw in proptest::collection::vec((0usize..30, 0usize..30), 0..80)) {
            let edges: Vec<_> = raw.into_iter().map(|(a, b)| (a % n, b % n)).collect();
            let a = build_csr(&edges, n).unwrap();
            for i in 0..n {
                prop_assert!(a.contains(i, i));
                prop_assert!(a.degree(i) >= 1);
                prop_assert!(a.neighbors(i).windows(2).all(|w| w[0] < w[1]));
                for &j in a.neighbors(i) {
                    prop_assert!(a.contains(j, i));
                }
            }
            prop_assert_eq!(build_csr(&a.edge_list(), n).unwrap(), a);
        }
    }
}
