use std::fmt::Write as _;

use super::{ChordalError, Graph};

/// Tree decomposition: sorted bags plus a parent map with a single root
/// (`parent[root] == root`).
#[derive(Clone, Debug, PartialEq)]
pub struct TreeDecomposition {
    bags: Vec<Vec<usize>>,
    parent: Vec<usize>,
    children: Vec<Vec<usize>>,
    postorder: Vec<usize>,
    root: usize,
}

/// Violated property reported by [`validate`]. Vertices are 0-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    VertexNotCovered(usize),
    EdgeNotCovered(usize, usize),
    RunningIntersection(usize),
    VertexOutOfRange(usize),
}

impl TreeDecomposition {
    /// Checks that `parent` describes one rooted tree; bags are sorted and deduplicated.
    pub fn new(mut bags: Vec<Vec<usize>>, parent: Vec<usize>) -> Result<Self, ChordalError> {
        let l = bags.len();
        if parent.len() != l || l == 0 {
            return Err(ChordalError::InvalidTree(format!(
                "{} bags but {} parent entries",
                l,
                parent.len()
            )));
        }
        for b in &mut bags {
            b.sort_unstable();
            b.dedup();
        }
        let roots: Vec<usize> = (0..l).filter(|&j| parent[j] == j).collect();
        if roots.len() != 1 {
            return Err(ChordalError::InvalidTree(format!(
                "expected one root, found {}",
                roots.len()
            )));
        }
        if let Some(j) = parent.iter().position(|&p| p >= l) {
            return Err(ChordalError::InvalidTree(format!("bag {j} has no valid parent")));
        }
        let root = roots[0];
        let mut children = vec![Vec::new(); l];
        for j in 0..l {
            if j != root {
                children[parent[j]].push(j);
            }
        }
        let postorder = postorder(root, &children);
        if postorder.len() != l {
            return Err(ChordalError::InvalidTree("parent map contains a cycle".into()));
        }
        Ok(Self {
            bags,
            parent,
            children,
            postorder,
            root,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.bags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bags.is_empty()
    }

    #[inline]
    pub fn bags(&self) -> &[Vec<usize>] {
        &self.bags
    }

    #[inline]
    pub fn bag(&self, j: usize) -> &[usize] {
        &self.bags[j]
    }

    /// Parent of `j`, or `None` at the root.
    #[inline]
    pub fn parent(&self, j: usize) -> Option<usize> {
        (j != self.root).then(|| self.parent[j])
    }

    /// Raw parent map (the root points to itself).
    pub fn parents(&self) -> &[usize] {
        &self.parent
    }

    #[inline]
    pub fn root(&self) -> usize {
        self.root
    }

    #[inline]
    pub fn children(&self, j: usize) -> &[usize] {
        &self.children[j]
    }

    /// Depth-first postorder visiting the smallest child first: children always
    /// precede parents.
    #[inline]
    pub fn topological_order(&self) -> &[usize] {
        &self.postorder
    }

    /// Largest bag size.
    pub fn omega(&self) -> usize {
        self.bags.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// `omega - 1`.
    pub fn width(&self) -> usize {
        self.omega().saturating_sub(1)
    }

    pub fn total_bag_size(&self) -> usize {
        self.bags.iter().map(Vec::len).sum()
    }

    /// Largest vertex id plus one.
    pub fn vertex_count(&self) -> usize {
        self.bags
            .iter()
            .filter_map(|b| b.last())
            .max()
            .map_or(0, |&v| v + 1)
    }

    /// Sorted intersection of bag `j` with its parent's bag (empty at the root).
    pub fn separator(&self, j: usize) -> Vec<usize> {
        match self.parent(j) {
            None => Vec::new(),
            Some(p) => intersect(&self.bags[j], &self.bags[p]),
        }
    }

    /// One line per bag, `j p(j) |J_j| : members`, all 1-based.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for (j, bag) in self.bags.iter().enumerate() {
            let _ = write!(s, "{} {} {} :", j + 1, self.parent[j] + 1, bag.len());
            for v in bag {
                let _ = write!(s, " {}", v + 1);
            }
            s.push('\n');
        }
        s
    }
}

fn postorder(root: usize, children: &[Vec<usize>]) -> Vec<usize> {
    let mut out = Vec::with_capacity(children.len());
    let mut stack = vec![(root, 0usize)];
    let mut visited = vec![false; children.len()];
    visited[root] = true;
    while let Some((node, next)) = stack.pop() {
        if next < children[node].len() {
            stack.push((node, next + 1));
            let c = children[node][next];
            if !visited[c] {
                visited[c] = true;
                stack.push((c, 0));
            }
        } else {
            out.push(node);
        }
    }
    out
}

pub(crate) fn intersect(a: &[usize], b: &[usize]) -> Vec<usize> {
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out
}

fn is_subset(a: &[usize], b: &[usize]) -> bool {
    a.len() <= b.len() && intersect(a, b).len() == a.len()
}

/// Elimination-tree decomposition from the symbolic Cholesky pattern of the
/// permuted adjacency-plus-identity matrix. Bag `k` is the column pattern of
/// the `k`-th eliminated vertex; roots of a forest are chained so that the
/// last eliminated vertex roots the tree.
pub fn symbolic_factor(g: &Graph, perm: &[usize]) -> Result<TreeDecomposition, ChordalError> {
    let n = g.vertex_count();
    let mut pos = vec![usize::MAX; n];
    if perm.len() != n {
        return Err(ChordalError::InvalidPermutation);
    }
    for (k, &v) in perm.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return Err(ChordalError::InvalidPermutation);
        }
        pos[v] = k;
    }
    if n == 0 {
        return Err(ChordalError::InvalidTree("empty graph".into()));
    }
    let mut pattern: Vec<Vec<usize>> = Vec::with_capacity(n);
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut parent = vec![usize::MAX; n];
    let mut mark = vec![usize::MAX; n];
    for k in 0..n {
        let mut col = vec![k];
        mark[k] = k;
        for &u in g.neighbors(perm[k]) {
            let pu = pos[u];
            if pu > k && mark[pu] != k {
                mark[pu] = k;
                col.push(pu);
            }
        }
        for &c in &children[k] {
            for &i in &pattern[c] {
                if i > k && mark[i] != k {
                    mark[i] = k;
                    col.push(i);
                }
            }
        }
        col.sort_unstable();
        if let Some(&p) = col.get(1) {
            parent[k] = p;
            children[p].push(k);
        }
        pattern.push(col);
    }
    let roots: Vec<usize> = (0..n).filter(|&k| parent[k] == usize::MAX).collect();
    for w in roots.windows(2) {
        parent[w[0]] = w[1];
    }
    let last = *roots.last().expect("at least one root");
    parent[last] = last;
    let bags = pattern
        .into_iter()
        .map(|col| {
            let mut b: Vec<usize> = col.into_iter().map(|k| perm[k]).collect();
            b.sort_unstable();
            b
        })
        .collect();
    TreeDecomposition::new(bags, parent)
}

/// Merges bags along tree edges until no bag is contained in a neighbor:
/// a child contained in its parent is absorbed, and a parent contained in a
/// child is replaced by that child (the largest-index one when several qualify).
/// Bag order is preserved, so a decomposition with `p(j) > j` keeps it.
pub fn supernode_merge(td: &TreeDecomposition) -> TreeDecomposition {
    let l = td.len();
    let mut bags = td.bags.clone();
    let mut parent = td.parent.clone();
    let mut children: Vec<Vec<usize>> = td.children.clone();
    let mut alive = vec![true; l];
    let root = td.root;
    let order = td.postorder.clone();
    loop {
        let mut changed = false;
        for &j in &order {
            if !alive[j] || j == root {
                continue;
            }
            let p = parent[j];
            let absorb = if is_subset(&bags[j], &bags[p]) {
                true
            } else if is_subset(&bags[p], &bags[j]) {
                let larger_sibling = children[p]
                    .iter()
                    .any(|&c| c > j && alive[c] && is_subset(&bags[p], &bags[c]));
                if larger_sibling {
                    continue;
                }
                bags[p] = std::mem::take(&mut bags[j]);
                true
            } else {
                false
            };
            if absorb {
                alive[j] = false;
                children[p].retain(|&c| c != j);
                let moved = std::mem::take(&mut children[j]);
                for &c in &moved {
                    parent[c] = p;
                }
                children[p].extend(moved);
                children[p].sort_unstable();
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let mut new_index = vec![usize::MAX; l];
    let mut k = 0;
    for j in 0..l {
        if alive[j] {
            new_index[j] = k;
            k += 1;
        }
    }
    let new_bags: Vec<Vec<usize>> = (0..l)
        .filter(|&j| alive[j])
        .map(|j| std::mem::take(&mut bags[j]))
        .collect();
    let new_parent: Vec<usize> = (0..l)
        .filter(|&j| alive[j])
        .map(|j| new_index[parent[j]])
        .collect();
    TreeDecomposition::new(new_bags, new_parent).expect("merging preserves the tree")
}

/// Every violated tree-decomposition property of `td` with respect to `g`.
pub fn validate(td: &TreeDecomposition, g: &Graph) -> Vec<Violation> {
    let n = g.vertex_count();
    let mut out = Vec::new();
    // number of bags containing v whose parent bag does not contain v
    let mut tops = vec![0usize; n];
    let mut covered = vec![false; n];
    for j in 0..td.len() {
        let bag = td.bag(j);
        for &v in bag {
            if v >= n {
                out.push(Violation::VertexOutOfRange(v));
                continue;
            }
            covered[v] = true;
            let in_parent = td
                .parent(j)
                .is_some_and(|p| td.bag(p).binary_search(&v).is_ok());
            if !in_parent {
                tops[v] += 1;
            }
        }
    }
    for v in 0..n {
        if !covered[v] {
            out.push(Violation::VertexNotCovered(v));
        } else if tops[v] != 1 {
            out.push(Violation::RunningIntersection(v));
        }
    }
    // edge cover via the bags containing each vertex
    let mut bags_of: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (j, bag) in td.bags().iter().enumerate() {
        for &v in bag {
            if v < n {
                bags_of[v].push(j);
            }
        }
    }
    for &(u, v, _) in g.edges() {
        let (a, b) = if bags_of[u].len() <= bags_of[v].len() {
            (u, v)
        } else {
            (v, u)
        };
        if !bags_of[a]
            .iter()
            .any(|&j| td.bag(j).binary_search(&b).is_ok())
        {
            out.push(Violation::EdgeNotCovered(u, v));
        }
    }
    out
}
