//! Test-problem families.

use crate::chordal::Graph;
use crate::linalg::SparseSymmetric;
use crate::problem::{ObjectiveSense, SdpProblem, Sense};
use crate::scalar::Real;

fn entry<T: Real>(n: usize, i: usize, j: usize, v: T) -> SparseSymmetric<T> {
    SparseSymmetric::from_triplets(n, [(i.max(j), i.min(j), v)]).expect("index in range")
}

/// Weighted Laplacian `diag(Y 1) − Y`.
pub fn laplacian<T: Real>(g: &Graph) -> SparseSymmetric<T> {
    let n = g.vertex_count();
    let mut t = Vec::with_capacity(n + g.edge_count());
    let mut deg = vec![0.0; n];
    for &(u, v, w) in g.edges() {
        deg[u] += w;
        deg[v] += w;
        t.push((v.max(u), v.min(u), T::lit(-w)));
    }
    for (i, d) in deg.into_iter().enumerate() {
        if d != 0.0 {
            t.push((i, i, T::lit(d)));
        }
    }
    SparseSymmetric::from_triplets(n, t).expect("indices in range")
}

/// `max (k−1)/(2k) L•X  s.t.  X[i,i] = 1,  X[i,j] ≥ −1/(k−1) on edges (k > 2)`.
pub fn maxkcut<T: Real>(g: &Graph, k: usize) -> SdpProblem<T> {
    assert!(k >= 2, "k must be at least 2");
    let n = g.vertex_count();
    let c = laplacian::<T>(g).scaled(T::lit((k as f64 - 1.0) / (2.0 * k as f64)));
    let mut a: Vec<_> = (0..n).map(|i| entry(n, i, i, T::one())).collect();
    let mut senses = vec![Sense::Eq; n];
    let mut b = vec![T::one(); n];
    if k > 2 {
        for &(u, v, _) in g.edges() {
            a.push(entry(n, u, v, T::lit(0.5)));
            senses.push(Sense::Ge);
            b.push(T::lit(-1.0 / (k as f64 - 1.0)));
        }
    }
    SdpProblem::new(ObjectiveSense::Maximize, c, a, senses, b).expect("consistent shapes")
}

pub fn maxcut<T: Real>(g: &Graph) -> SdpProblem<T> {
    maxkcut(g, 2)
}

/// Order-`n+1` sparse theta formulation; the optimal value is `ϑ(G)`.
/// Stated as `max −[I 1; 1ᵀ 0] • X` so that the value is positive.
pub fn lovasz_theta<T: Real>(g: &Graph) -> SdpProblem<T> {
    let n = g.vertex_count();
    let mut t = Vec::with_capacity(2 * n);
    for i in 0..n {
        t.push((i, i, -T::one()));
        t.push((n, i, -T::one()));
    }
    let c = SparseSymmetric::from_triplets(n + 1, t).expect("in range");
    let mut a: Vec<_> = g
        .edges()
        .iter()
        .map(|&(u, v, _)| entry(n + 1, u, v, T::lit(0.5)))
        .collect();
    a.push(entry(n + 1, n, n, T::one()));
    let mut b = vec![T::zero(); g.edge_count()];
    b.push(T::one());
    let senses = vec![Sense::Eq; b.len()];
    SdpProblem::new(ObjectiveSense::Maximize, c, a, senses, b).expect("consistent shapes")
}

/// `min tr(X)  s.t.  X[i, n+1] = b_i`; the optimum is `2‖b‖`.
pub fn star<T: Real>(b: &[T]) -> SdpProblem<T> {
    let n = b.len();
    let c = SparseSymmetric::from_triplets(n + 1, (0..=n).map(|i| (i, i, T::one()))).expect("in range");
    let a = (0..n).map(|i| entry(n + 1, n, i, T::lit(0.5))).collect();
    SdpProblem::minimize(c, a, b.to_vec()).expect("consistent shapes")
}

/// Tridiagonal `(A, C)` of order `n` with `A ≻ 0`.
pub fn rayleigh_data<T: Real>(n: usize) -> (SparseSymmetric<T>, SparseSymmetric<T>) {
    let mut a = Vec::new();
    let mut c = Vec::new();
    for i in 0..n {
        let f = i as f64;
        a.push((i, i, T::lit(2.0 + 0.25 * (f * 0.7).sin())));
        c.push((i, i, T::lit((f * 1.3).cos())));
        if i + 1 < n {
            a.push((i + 1, i, T::lit(-0.5 + 0.1 * (f * 0.9).cos())));
            c.push((i + 1, i, T::lit(0.5 + 0.2 * (f * 0.4).sin())));
        }
    }
    (
        SparseSymmetric::from_triplets(n, a).expect("in range"),
        SparseSymmetric::from_triplets(n, c).expect("in range"),
    )
}

/// `min C•X  s.t.  A•X = 1` on a path; the optimum is the smallest eigenvalue
/// of the pencil `(C, A)`.
pub fn path_rayleigh<T: Real>(n: usize) -> SdpProblem<T> {
    let (a, c) = rayleigh_data(n);
    SdpProblem::minimize(c, vec![a], vec![T::one()]).expect("consistent shapes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::decompose;
    use crate::converter::split_problem;

    #[test]
    fn maxkcut_shapes() {
        let g = Graph::complete(3);
        let p = maxkcut::<f64>(&g, 3);
        assert_eq!(p.m(), 3 + 3);
        assert_eq!(p.senses()[4], Sense::Ge);
        assert!((p.b()[4] + 0.5).abs() < 1e-15);
        let p = maxcut::<f64>(&g);
        assert_eq!(p.m(), 3);
        assert!(!p.has_inequalities());
        let l = laplacian::<f64>(&g);
        assert_eq!(l.get(0, 0), 2.0);
        assert_eq!(l.get(1, 0), -1.0);
    }

    #[test]
    fn generators_are_partially_separable() {
        for g in [Graph::path(7), Graph::cycle(6), Graph::star(5), Graph::complete(4)] {
            for p in [maxcut::<f64>(&g), maxkcut(&g, 3), lovasz_theta(&g)] {
                let mats: Vec<_> = std::iter::once(p.c()).chain(p.constraints()).collect();
                let td = decompose(&crate::chordal::sparsity_graph(&mats).unwrap());
                let s = split_problem(&p, &td).unwrap();
                assert!(s.a.iter().all(|x| x.is_partially_separable()));
            }
        }
    }

    #[test]
    fn theta_objective_at_known_point() {
        // empty graph: X = [1 1ᵀ; ...] with v = −1 gives −C•X = n
        let n = 3;
        let p = lovasz_theta::<f64>(&Graph::new(n));
        let mut u = crate::linalg::Mat::zeros(n + 1, 1);
        for i in 0..n {
            u[(i, 0)] = -1.0;
        }
        u[(n, 0)] = 1.0;
        assert!((p.objective_value(&u) - n as f64).abs() < 1e-14);
        assert!(p.violations(&u).iter().all(|v| v.abs() < 1e-14));
    }
}
