//! Minimum-cardinality splitting of data matrices over the bags of a tree
//! decomposition.

use crate::chordal::TreeDecomposition;
use crate::linalg::{DenseSym, SparseSymmetric};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    /// 1-based entry that no bag contains.
    #[error("entry ({row}, {col}) is not contained in any bag")]
    UncoverableEntry { row: usize, col: usize },
    #[error("vertex {0} is not covered by the decomposition")]
    UncoveredVertex(usize),
}

/// `U_j = J_j \ J_p(j)` for every bag, plus the owner of every vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct UniquePartition {
    pub unique_sets: Vec<Vec<usize>>,
    pub owner: Vec<usize>,
    /// position of each bag in the topological order
    pub(crate) rank: Vec<usize>,
}

impl UniquePartition {
    #[inline]
    pub fn owner(&self, v: usize) -> usize {
        self.owner[v]
    }
}

/// Nonzero blocks `A_j` over the local indices of bag `J_j`, sorted by bag.
#[derive(Clone, Debug, PartialEq)]
pub struct Split<T> {
    pub blocks: Vec<(usize, DenseSym<T>)>,
}

impl<T: Real> Split<T> {
    /// Bags receiving a nonzero block.
    pub fn cover(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.0).collect()
    }

    /// Definition of partial separability: at most one nonzero block.
    pub fn is_partially_separable(&self) -> bool {
        self.blocks.len() <= 1
    }

    /// `Σ_j A_j • X[J_j, J_j]` for a full symmetric `X`.
    pub fn apply(&self, td: &TreeDecomposition, x: &crate::linalg::Mat<T>) -> T {
        let mut s = T::zero();
        for (j, blk) in &self.blocks {
            let bag = td.bag(*j);
            for (a, &va) in bag.iter().enumerate() {
                for (b, &vb) in bag.iter().enumerate().take(a + 1) {
                    let w = blk.get(a, b) * x[(va, vb)];
                    s = s + if a == b { w } else { w + w };
                }
            }
        }
        s
    }
}

/// One flag per matrix: whether its split touches at most one bag.
pub fn is_partially_separable<T: Real>(splits: &[Split<T>]) -> Vec<bool> {
    splits.iter().map(Split::is_partially_separable).collect()
}

/// Owners via the topmost bag containing each vertex; `O(Σ|J_j|)`.
pub fn build_unique_partition(td: &TreeDecomposition) -> Result<UniquePartition, SplitError> {
    let n = td.vertex_count();
    let mut owner = vec![usize::MAX; n];
    let mut unique_sets = Vec::with_capacity(td.len());
    for j in 0..td.len() {
        let bag = td.bag(j);
        let u: Vec<usize> = match td.parent(j) {
            None => bag.to_vec(),
            Some(p) => {
                let pb = td.bag(p);
                bag.iter()
                    .copied()
                    .filter(|v| pb.binary_search(v).is_err())
                    .collect()
            }
        };
        for &v in &u {
            owner[v] = j;
        }
        unique_sets.push(u);
    }
    if let Some(v) = owner.iter().position(|&o| o == usize::MAX) {
        return Err(SplitError::UncoveredVertex(v + 1));
    }
    let mut rank = vec![0; td.len()];
    for (k, &j) in td.topological_order().iter().enumerate() {
        rank[j] = k;
    }
    Ok(UniquePartition {
        unique_sets,
        owner,
        rank,
    })
}

/// Splits `m` over the fewest bags: bags are visited children-first, and a bag
/// is taken when an uncovered entry has its deeper endpoint owned there. Taking
/// a bag assigns to it every still-uncovered entry inside `J_j × J_j`.
pub fn split<T: Real>(
    m: &SparseSymmetric<T>,
    td: &TreeDecomposition,
    up: &UniquePartition,
) -> Result<Split<T>, SplitError> {
    let trip = m.triplets();
    if trip.is_empty() {
        return Ok(Split { blocks: Vec::new() });
    }
    let mut trigger = Vec::with_capacity(trip.len());
    for &(r, c, _) in trip {
        if r >= up.owner.len() || c >= up.owner.len() {
            return Err(SplitError::UncoverableEntry {
                row: r + 1,
                col: c + 1,
            });
        }
        let (or, oc) = (up.owner[r], up.owner[c]);
        let k = if up.rank[or] <= up.rank[oc] { or } else { oc };
        let bag = td.bag(k);
        if bag.binary_search(&r).is_err() || bag.binary_search(&c).is_err() {
            return Err(SplitError::UncoverableEntry {
                row: r + 1,
                col: c + 1,
            });
        }
        trigger.push(k);
    }
    // incidence lists for the vertices touched by this matrix
    let mut verts: Vec<usize> = trip.iter().flat_map(|t| [t.0, t.1]).collect();
    verts.sort_unstable();
    verts.dedup();
    let local = |v: usize| verts.binary_search(&v).expect("touched vertex");
    let mut inc: Vec<Vec<usize>> = vec![Vec::new(); verts.len()];
    for (e, &(r, c, _)) in trip.iter().enumerate() {
        inc[local(r)].push(e);
        if r != c {
            inc[local(c)].push(e);
        }
    }
    let mut order: Vec<(usize, usize)> = trigger.iter().enumerate().map(|(e, &k)| (up.rank[k], e)).collect();
    order.sort_unstable();
    let mut assigned = vec![usize::MAX; trip.len()];
    let mut blocks = Vec::new();
    for &(_, e) in &order {
        if assigned[e] != usize::MAX {
            continue;
        }
        let j = trigger[e];
        let bag = td.bag(j);
        let mut blk = DenseSym::zeros(bag.len());
        for (la, &a) in bag.iter().enumerate() {
            let Ok(li) = verts.binary_search(&a) else {
                continue;
            };
            for &f in &inc[li] {
                if assigned[f] != usize::MAX {
                    continue;
                }
                let (r, c, v) = trip[f];
                let other = if r == a { c } else { r };
                if let Ok(lb) = bag.binary_search(&other) {
                    assigned[f] = j;
                    blk.add_to(la, lb, v);
                }
            }
        }
        blocks.push((j, blk));
    }
    blocks.sort_by_key(|b| b.0);
    Ok(Split { blocks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{decompose, symbolic_factor, Graph};
    use crate::linalg::Mat;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn path_td() -> TreeDecomposition {
        crate::chordal::supernode_merge(&symbolic_factor(&Graph::path(3), &[0, 1, 2]).unwrap())
    }

    #[test]
    fn unique_partition_on_path() {
        let up = build_unique_partition(&path_td()).unwrap();
        assert_eq!(up.unique_sets, vec![vec![0], vec![1, 2]]);
        assert_eq!(up.owner, vec![0, 1, 1]);
    }

    #[test]
    fn unique_partition_single_bag_and_star() {
        let td = TreeDecomposition::new(vec![vec![0, 1, 2]], vec![0]).unwrap();
        let up = build_unique_partition(&td).unwrap();
        assert_eq!(up.unique_sets, vec![vec![0, 1, 2]]);
        let td = decompose(&Graph::star(4));
        let up = build_unique_partition(&td).unwrap();
        assert!(up.unique_sets[td.root()].contains(&4));
        let mut all: Vec<usize> = up.unique_sets.concat();
        all.sort();
        assert_eq!(all, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn path_examples() {
        let td = path_td();
        let up = build_unique_partition(&td).unwrap();
        let one = SparseSymmetric::from_triplets(3, [(0, 0, 1.0)]).unwrap();
        assert_eq!(split(&one, &td, &up).unwrap().cover(), vec![0]);

        let two = SparseSymmetric::from_triplets(3, [(0, 0, 1.0), (2, 2, 5.0)]).unwrap();
        let s = split(&two, &td, &up).unwrap();
        assert_eq!(s.cover(), vec![0, 1]);
        assert_eq!(s.blocks[0].1.get(0, 0), 1.0);
        assert_eq!(s.blocks[1].1.get(1, 1), 5.0);
        assert!(!s.is_partially_separable());

        let mid = SparseSymmetric::from_triplets(3, [(1, 1, 1.0)]).unwrap();
        let s = split(&mid, &td, &up).unwrap();
        assert_eq!(s.cover(), vec![1]);
        assert!(s.is_partially_separable());

        let zero = SparseSymmetric::<f64>::new(3);
        assert!(split(&zero, &td, &up).unwrap().is_partially_separable());
    }

    #[test]
    fn uncoverable_entry_detected() {
        let td = path_td();
        let up = build_unique_partition(&td).unwrap();
        let m = SparseSymmetric::from_triplets(3, [(2, 0, 1.0)]).unwrap();
        assert_eq!(
            split(&m, &td, &up),
            Err(SplitError::UncoverableEntry { row: 3, col: 1 })
        );
    }

    fn random_coverable(
        td: &TreeDecomposition,
        n: usize,
        rng: &mut impl Rng,
        nnz: usize,
    ) -> SparseSymmetric<f64> {
        let mut m = SparseSymmetric::new(n);
        for _ in 0..nnz {
            let bag = td.bag(rng.gen_range(0..td.len()));
            let a = bag[rng.gen_range(0..bag.len())];
            let b = bag[rng.gen_range(0..bag.len())];
            m.insert(a, b, rng.gen_range(-1.0..1.0)).unwrap();
        }
        m.canonicalize();
        m
    }

    fn brute_force_cover(m: &SparseSymmetric<f64>, td: &TreeDecomposition) -> usize {
        let l = td.len();
        let mut best = usize::MAX;
        for mask in 0u32..(1 << l) {
            let ok = m.triplets().iter().all(|&(r, c, _)| {
                (0..l).any(|j| {
                    mask & (1 << j) != 0
                        && td.bag(j).binary_search(&r).is_ok()
                        && td.bag(j).binary_search(&c).is_ok()
                })
            });
            if ok {
                best = best.min(mask.count_ones() as usize);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn cover_is_optimal_and_reconstructs(
            n in 2usize..12,
            edges in proptest::collection::vec((0usize..12, 0usize..12), 0..30),
            seed in any::<u64>(),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut g = Graph::new(n);
            for (u, v) in edges {
                let (u, v) = (u % n, v % n);
                if u != v && !g.has_edge(u, v) {
                    g.add_edge(u, v, 1.0).unwrap();
                }
            }
            let td = decompose(&g);
            prop_assume!(td.len() <= 12);
            let up = build_unique_partition(&td).unwrap();
            let nnz = rng.gen_range(0..8);
            let m = random_coverable(&td, n, &mut rng, nnz);
            let s = split(&m, &td, &up).unwrap();
            prop_assert_eq!(s.blocks.len(), brute_force_cover(&m, &td));
            for _ in 0..20 {
                let mut x = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
                x.symmetrize();
                let want = m.dot_dense(&x);
                let got = s.apply(&td, &x);
                prop_assert!((want - got).abs() <= 1e-12 * (1.0 + want.abs()));
            }
        }
    }
}
