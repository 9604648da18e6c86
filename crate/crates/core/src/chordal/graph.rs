use std::collections::BTreeSet;
use std::fmt::Write as _;

use crate::linalg::{LinalgError, SparseSymmetric};
use crate::scalar::Real;

use super::ChordalError;

/// Simple undirected graph with optional edge weights (default 1.0).
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize, f64)>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            adj: vec![Vec::new(); n],
            edges: Vec::new(),
        }
    }

    /// Builds from 0-based `(u, v, weight)` triples.
    pub fn from_weighted_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self, ChordalError> {
        let mut g = Self::new(n);
        for (u, v, w) in edges {
            g.add_edge(u, v, w)?;
        }
        Ok(g)
    }

    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ChordalError> {
        Self::from_weighted_edges(n, edges.into_iter().map(|(u, v)| (u, v, 1.0)))
    }

    /// Adds `{u, v}`; rejects self loops and repeated edges.
    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) -> Result<(), ChordalError> {
        if u >= self.n || v >= self.n {
            return Err(ChordalError::VertexOutOfRange {
                vertex: u.max(v),
                n: self.n,
            });
        }
        if u == v {
            return Err(ChordalError::SelfLoop(u));
        }
        match self.adj[u].binary_search(&v) {
            Ok(_) => Err(ChordalError::DuplicateEdge(u.min(v), u.max(v))),
            Err(pos) => {
                self.adj[u].insert(pos, v);
                let pos_v = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos_v, u);
                self.edges.push((u.min(v), u.max(v), weight));
                Ok(())
            }
        }
    }

    #[inline]
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Sorted neighbor list.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// Edges as `(u, v, weight)` with `u < v`, in insertion order.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    pub fn is_complete(&self) -> bool {
        self.edges.len() == self.n * self.n.saturating_sub(1) / 2
    }

    pub fn empty(n: usize) -> Self {
        Self::new(n)
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i))).expect("path edges are simple")
    }

    pub fn cycle(n: usize) -> Self {
        let mut g = Self::path(n);
        if n >= 3 {
            g.add_edge(n - 1, 0, 1.0).expect("closing edge is new");
        }
        g
    }

    /// Star with `leaves` leaves; the hub is the last vertex.
    pub fn star(leaves: usize) -> Self {
        Self::from_edges(leaves + 1, (0..leaves).map(|i| (i, leaves))).expect("star edges are simple")
    }

    pub fn complete(n: usize) -> Self {
        Self::from_edges(n, (0..n).flat_map(|i| (0..i).map(move |j| (j, i))))
            .expect("complete graph edges are simple")
    }

    /// Parses the edge-list format: a header `n m`, then `m` lines `u v [w]`
    /// with 1-based vertices. Blank lines and lines starting with `#` are skipped.
    pub fn parse(text: &str) -> Result<Self, ChordalError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or(ChordalError::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 2 {
            return Err(ChordalError::Parse {
                line: hline,
                message: "header must be `n m`".into(),
            });
        }
        let parse_usize = |s: &str, line: usize| {
            s.parse::<usize>().map_err(|_| ChordalError::Parse {
                line,
                message: format!("expected a nonnegative integer, found `{s}`"),
            })
        };
        let n = parse_usize(head[0], hline)?;
        let m = parse_usize(head[1], hline)?;
        let mut g = Self::new(n);
        let mut seen = 0;
        for (lno, line) in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 && f.len() != 3 {
                return Err(ChordalError::Parse {
                    line: lno,
                    message: "edge line must be `u v` or `u v w`".into(),
                });
            }
            let u = parse_usize(f[0], lno)?;
            let v = parse_usize(f[1], lno)?;
            if u == 0 || v == 0 || u > n || v > n {
                return Err(ChordalError::Parse {
                    line: lno,
                    message: format!("vertex out of range 1..={n}"),
                });
            }
            let w = match f.get(2) {
                Some(s) => s.parse::<f64>().map_err(|_| ChordalError::Parse {
                    line: lno,
                    message: format!("bad weight `{s}`"),
                })?,
                None => 1.0,
            };
            g.add_edge(u - 1, v - 1, w).map_err(|e| ChordalError::Parse {
                line: lno,
                message: e.to_string(),
            })?;
            seen += 1;
        }
        if seen != m {
            return Err(ChordalError::Parse {
                line: hline,
                message: format!("header announces {m} edges, found {seen}"),
            });
        }
        Ok(g)
    }

    /// Inverse of [`parse`](Self::parse); weights are written only when some edge is not 1.
    pub fn to_text(&self) -> String {
        let weighted = self.edges.iter().any(|e| e.2 != 1.0);
        let mut s = format!("{} {}\n", self.n, self.edges.len());
        for &(u, v, w) in &self.edges {
            if weighted {
                let _ = writeln!(s, "{} {} {}", u + 1, v + 1, w);
            } else {
                let _ = writeln!(s, "{} {}", u + 1, v + 1);
            }
        }
        s
    }
}

/// Union of the off-diagonal structural nonzeros of `matrices`.
pub fn sparsity_graph<T: Real>(matrices: &[&SparseSymmetric<T>]) -> Result<Graph, LinalgError> {
    let n = matrices.first().map_or(0, |m| m.order());
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for m in matrices {
        if m.order() != n {
            return Err(LinalgError::DimensionMismatch {
                expected: n,
                found: m.order(),
            });
        }
        for &(r, c, _) in m.triplets() {
            if r != c {
                adj[c].insert(r);
            }
        }
    }
    let mut g = Graph::new(n);
    for (c, rows) in adj.iter().enumerate() {
        for &r in rows {
            g.add_edge(c, r, 1.0).expect("deduplicated");
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_gives_edgeless_graph() {
        let m = SparseSymmetric::from_triplets(4, (0..4).map(|i| (i, i, 1.0f64))).unwrap();
        let g = sparsity_graph(&[&m]).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 0);
    }

    #[test]
    fn tridiagonal_gives_path_and_arrow_gives_star() {
        let n = 6;
        let mut t = SparseSymmetric::<f64>::new(n);
        let mut a = SparseSymmetric::<f64>::new(n);
        for i in 0..n {
            t.insert(i, i, 2.0).unwrap();
            a.insert(i, i, 1.0).unwrap();
            if i > 0 {
                t.insert(i, i - 1, -1.0).unwrap();
            }
            if i + 1 < n {
                a.insert(n - 1, i, 0.0).unwrap();
            }
        }
        t.canonicalize();
        a.canonicalize();
        assert_eq!(sparsity_graph(&[&t]).unwrap(), Graph::path(n));
        let star = sparsity_graph(&[&a]).unwrap();
        assert_eq!(star.edge_count(), n - 1);
        assert_eq!(star.degree(n - 1), n - 1);
    }

    #[test]
    fn mismatched_orders_rejected() {
        let a = SparseSymmetric::<f64>::new(2);
        let b = SparseSymmetric::<f64>::new(3);
        assert!(matches!(
            sparsity_graph(&[&a, &b]),
            Err(LinalgError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let g = Graph::parse("3 2\n1 2\n2 3 2.5\n").unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0), (1, 2, 2.5)]);
        assert_eq!(Graph::parse(&g.to_text()).unwrap(), g);
        assert!(matches!(
            Graph::parse("3 2\n1 2\n"),
            Err(ChordalError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            Graph::parse("3 1\n1 4\n"),
            Err(ChordalError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            Graph::parse("3 1\n2 2\n"),
            Err(ChordalError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn builders() {
        assert_eq!(Graph::cycle(5).edge_count(), 5);
        assert!(Graph::complete(4).is_complete());
        assert_eq!(Graph::star(3).neighbors(3), &[0, 1, 2]);
        assert!(Graph::path(3).has_edge(1, 2));
    }
}
