use std::collections::BTreeSet;

use super::Graph;

/// Classic minimum-degree elimination order on the elimination graph; ties go
/// to the smallest vertex id. Returns `perm` with `perm[k]` the vertex
/// eliminated at step `k`.
pub fn min_degree_order(g: &Graph) -> Vec<usize> {
    let n = g.vertex_count();
    let mut adj: Vec<BTreeSet<usize>> = (0..n)
        .map(|v| g.neighbors(v).iter().copied().collect())
        .collect();
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &u in &nbrs {
            queue.remove(&(adj[u].len(), u));
            adj[u].remove(&v);
        }
        for (a, &u) in nbrs.iter().enumerate() {
            for &w in &nbrs[a + 1..] {
                if adj[u].insert(w) {
                    adj[w].insert(u);
                }
            }
        }
        for &u in &nbrs {
            queue.insert((adj[u].len(), u));
        }
    }
    perm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_starts_at_an_endpoint() {
        let perm = min_degree_order(&Graph::path(3));
        assert_eq!(perm[0], 0);
        assert_eq!(perm, vec![0, 1, 2]);
    }

    #[test]
    fn star_eliminates_hub_last() {
        let perm = min_degree_order(&Graph::star(5));
        assert_eq!(*perm.last().unwrap(), 5);
    }

    #[test]
    fn is_a_permutation() {
        let perm = min_degree_order(&Graph::cycle(7));
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..7).collect::<Vec<_>>());
    }
}
