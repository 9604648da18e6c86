//! Low-rank PSD completion from bag blocks and DIMACS accuracy metrics.

use serde::{Deserialize, Serialize};

use crate::chordal::{min_degree_order, sparsity_graph, symbolic_factor, TreeDecomposition};
use crate::linalg::{DenseSym, Mat, SparseSymmetric, SymEigen};
use crate::problem::{SdpProblem, Sense};
use crate::scalar::{norm2, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RecoveryError {
    #[error("block {block} has eigenvalue {min_eig:e}")]
    BlockNotPsd { block: usize, min_eig: f64 },
    #[error("blocks {child} and {parent} disagree on their overlap by {gap:e}")]
    OverlapMismatch { child: usize, parent: usize, gap: f64 },
    #[error("expected {expected} blocks, found {found}")]
    BlockCount { expected: usize, found: usize },
}

const PSD_TOL: f64 = 1e-8;
const OVERLAP_TOL: f64 = 1e-6;
const PINV_CUTOFF: f64 = 1e-10;

/// `base`, floored at `k·ε` so that single precision gets usable bounds.
fn tol<T: Real>(base: f64, k: f64) -> T {
    T::lit(base).max(T::lit(k) * T::epsilon())
}

fn check_psd<T: Real>(j: usize, e: &SymEigen<T>, norm: T) -> Result<(), RecoveryError> {
    let lmin = e.min_value();
    if lmin < -tol::<T>(PSD_TOL, 1e4) * (T::one() + norm) {
        return Err(RecoveryError::BlockNotPsd {
            block: j,
            min_eig: lmin.to_f64_lossy(),
        });
    }
    Ok(())
}

/// `V Λ^{1/2}` over the eigenvalues above `cutoff`.
fn psd_factor<T: Real>(e: &SymEigen<T>, cutoff: T) -> Mat<T> {
    let n = e.values.len();
    let keep: Vec<usize> = (0..n).filter(|&k| e.values[k] > cutoff).collect();
    Mat::from_fn(n, keep.len(), |i, c| {
        let k = keep[c];
        e.vectors[(i, k)] * e.values[k].sqrt()
    })
}

/// Completes bag blocks `X_j` to `X = U Uᵀ ⪰ 0` with at most `ω` columns,
/// visiting bags parent-first.
pub fn complete_low_rank<T: Real>(
    blocks: &[DenseSym<T>],
    td: &TreeDecomposition,
) -> Result<Mat<T>, RecoveryError> {
    if blocks.len() != td.len() {
        return Err(RecoveryError::BlockCount {
            expected: td.len(),
            found: blocks.len(),
        });
    }
    let n = td.vertex_count();
    // rows of U, filled as vertices are reached
    let mut rows: Vec<Option<Vec<T>>> = vec![None; n];
    let mut r = 0usize;
    for &j in td.topological_order().iter().rev() {
        let bag = td.bag(j);
        let xj = blocks[j].to_mat();
        let norm = xj.frobenius_norm();
        let ej = SymEigen::new(&xj);
        check_psd(j, &ej, norm)?;
        let (b_loc, r_loc): (Vec<usize>, Vec<usize>) =
            (0..bag.len()).partition(|&a| rows[bag[a]].is_some());
        if b_loc.is_empty() {
            // no overlap: any orthonormal directions will do, so reuse the first columns
            let cutoff = tol::<T>(PINV_CUTOFF, 10.0) * ej.max_value().max(T::zero());
            let f = psd_factor(&ej, cutoff);
            let k = f.cols();
            if k > r {
                for row in rows.iter_mut().flatten() {
                    row.resize(k, T::zero());
                }
                r = k;
            }
            for (a, &v) in bag.iter().enumerate() {
                let mut row = vec![T::zero(); r];
                row[..k].copy_from_slice(f.row(a));
                rows[v] = Some(row);
            }
            continue;
        }
        let ub = Mat::from_fn(b_loc.len(), r, |i, c| rows[bag[b_loc[i]]].as_ref().unwrap()[c]);
        let xbb = Mat::from_fn(b_loc.len(), b_loc.len(), |a, b| xj[(b_loc[a], b_loc[b])]);
        let diff = ub.matmul_t(&ub).sub(&xbb).frobenius_norm();
        if diff > tol::<T>(OVERLAP_TOL, 1e4) * (T::one() + xbb.frobenius_norm()) {
            let parent = td.parent(j).unwrap_or(j);
            return Err(RecoveryError::OverlapMismatch {
                child: j,
                parent,
                gap: diff.to_f64_lossy(),
            });
        }
        if r_loc.is_empty() {
            continue;
        }
        // U_R0 = X_RB U_B G⁺ with G = U_Bᵀ U_B
        let g = ub.transpose().matmul(&ub);
        let eg = SymEigen::new(&g);
        let gmax = eg.max_value().max(T::zero());
        let cut = tol::<T>(PINV_CUTOFF, 10.0) * gmax;
        let ginv = eg.map(|l| if l > cut { T::one() / l } else { T::zero() });
        let xrb = Mat::from_fn(r_loc.len(), b_loc.len(), |a, b| xj[(r_loc[a], b_loc[b])]);
        let ur0 = xrb.matmul(&ub).matmul(&ginv);
        let xrr = Mat::from_fn(r_loc.len(), r_loc.len(), |a, b| xj[(r_loc[a], r_loc[b])]);
        let mut z = xrr.sub(&ur0.matmul_t(&ur0));
        z.symmetrize();
        let ez = SymEigen::new(&z);
        let zcut = tol::<T>(PINV_CUTOFF, 10.0) * (T::one() + norm);
        let f = psd_factor(&ez, zcut);
        let k = f.cols();
        // orthonormal directions free of U_B: null space of G, then new columns
        let mut free: Vec<Vec<T>> = (0..r)
            .filter(|&c| eg.values[c] <= cut)
            .map(|c| (0..r).map(|i| eg.vectors[(i, c)]).collect())
            .collect();
        free.truncate(k);
        let extra = k - free.len();
        if extra > 0 {
            for row in rows.iter_mut().flatten() {
                row.resize(r + extra, T::zero());
            }
            for q in free.iter_mut() {
                q.resize(r + extra, T::zero());
            }
            for e in 0..extra {
                let mut q = vec![T::zero(); r + extra];
                q[r + e] = T::one();
                free.push(q);
            }
            r += extra;
        }
        for (a, &la) in r_loc.iter().enumerate() {
            let mut row = vec![T::zero(); r];
            row[..ur0.cols()].copy_from_slice(ur0.row(a));
            for (c, q) in free.iter().enumerate() {
                let fa = f[(a, c)];
                for (t, &qv) in row.iter_mut().zip(q) {
                    *t = *t + fa * qv;
                }
            }
            rows[bag[la]] = Some(row);
        }
    }
    let mut u = Mat::zeros(n, r);
    for (i, row) in rows.into_iter().enumerate() {
        if let Some(row) = row {
            u.row_mut(i)[..row.len()].copy_from_slice(&row);
        }
    }
    Ok(u)
}

/// DIMACS scores in decimal digits, capped at 16.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub pinf: f64,
    pub dinf: f64,
    pub gap: f64,
    #[serde(rename = "L")]
    pub l: f64,
    pub iters: usize,
    pub time_per_iter_s: f64,
    pub omega: usize,
    pub ell: usize,
}

const DIGIT_CAP: f64 = 16.0;

pub fn digits(ratio: f64) -> f64 {
    if ratio <= 0.0 || ratio.is_nan() {
        if ratio.is_nan() {
            0.0
        } else {
            DIGIT_CAP
        }
    } else {
        (-ratio.log10()).min(DIGIT_CAP)
    }
}

/// Sparse `LDLᵀ` of `shift·I + sign·M` along a fixed elimination order; counts negative pivots.
struct Inertia<'a, T> {
    m: &'a SparseSymmetric<T>,
    order: Vec<usize>,
    pos: Vec<usize>,
    /// column patterns (vertex ids, sorted), excluding the pivot
    cols: Vec<Vec<usize>>,
}

impl<'a, T: Real> Inertia<'a, T> {
    fn new(m: &'a SparseSymmetric<T>) -> Self {
        let n = m.order();
        let g = sparsity_graph(&[m]).expect("single matrix");
        let order = min_degree_order(&g);
        let td = symbolic_factor(&g, &order).expect("permutation");
        let mut pos = vec![0; n];
        for (k, &v) in order.iter().enumerate() {
            pos[v] = k;
        }
        // bag k of the unmerged elimination tree is {order[k]} ∪ later neighbours
        let cols = (0..n)
            .map(|k| {
                td.bag(k)
                    .iter()
                    .copied()
                    .filter(|&v| v != order[k])
                    .collect()
            })
            .collect();
        Self { m, order, pos, cols }
    }

    /// Number of eigenvalues of `sign·M` greater than `t`, i.e. negative pivots of `t I − sign·M`.
    fn count_above(&self, t: T, sign: T) -> usize {
        let n = self.order.len();
        let mut diag = vec![t; n];
        let mut vals: Vec<Vec<T>> = self.cols.iter().map(|c| vec![T::zero(); c.len()]).collect();
        for &(r, c, v) in self.m.triplets() {
            if r == c {
                diag[r] = diag[r] - sign * v;
            } else {
                let (a, b) = if self.pos[r] < self.pos[c] { (r, c) } else { (c, r) };
                let k = self.pos[a];
                let idx = self.cols[k].binary_search(&b).expect("pattern covers entry");
                vals[k][idx] = vals[k][idx] - sign * v;
            }
        }
        let scale = diag.iter().fold(T::one(), |a, &d| a.max(d.abs()));
        let mut neg = 0;
        for k in 0..n {
            let v = self.order[k];
            let mut d = diag[v];
            if d.abs() < T::epsilon() * scale {
                d = -T::epsilon() * scale;
            }
            if d < T::zero() {
                neg += 1;
            }
            let col = std::mem::take(&mut vals[k]);
            let l: Vec<T> = col.iter().map(|&x| x / d).collect();
            let pat = &self.cols[k];
            for a in 0..pat.len() {
                let va = pat[a];
                diag[va] = diag[va] - l[a] * col[a];
                for b in 0..a {
                    let vb = pat[b];
                    let upd = l[a] * col[b];
                    let (x, y) = if self.pos[va] < self.pos[vb] { (va, vb) } else { (vb, va) };
                    let kk = self.pos[x];
                    let idx = self.cols[kk].binary_search(&y).expect("fill closed");
                    vals[kk][idx] = vals[kk][idx] - upd;
                }
            }
        }
        neg
    }

    fn gershgorin(&self) -> T {
        let mut row = vec![T::zero(); self.order.len()];
        for &(r, c, v) in self.m.triplets() {
            row[r] = row[r] + v.abs();
            if r != c {
                row[c] = row[c] + v.abs();
            }
        }
        row.into_iter().fold(T::zero(), T::max)
    }

    /// `max(0, λ_max(sign·M))`, to high relative accuracy.
    fn positive_part_max(&self, sign: T) -> T {
        let hi0 = self.gershgorin();
        if hi0 == T::zero() {
            return T::zero();
        }
        let mut lo = T::lit(1e-30) * hi0;
        if self.count_above(lo, sign) == 0 {
            return T::zero();
        }
        let mut hi = hi0 * T::lit(1.01) + T::lit(1e-300);
        for _ in 0..200 {
            let mid = (lo * hi).sqrt();
            if self.count_above(mid, sign) > 0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo < T::one() + T::lit(1e-9) {
                break;
            }
        }
        hi
    }
}

/// `λ_max` of a sparse symmetric matrix (clipped below at zero).
pub fn lambda_max_positive<T: Real>(m: &SparseSymmetric<T>) -> T {
    Inertia::new(m).positive_part_max(T::one())
}

/// Spectral norm of a sparse symmetric matrix.
pub fn spectral_norm<T: Real>(m: &SparseSymmetric<T>) -> T {
    let inr = Inertia::new(m);
    inr.positive_part_max(T::one()).max(inr.positive_part_max(-T::one()))
}

/// DIMACS metrics of `X = U Uᵀ` with multipliers `y` of the minimization form
/// (`S = C_min − Σ y_i A_i`).
pub fn dimacs_metrics<T: Real>(sdp: &SdpProblem<T>, u: &Mat<T>, y: &[T]) -> Metrics {
    let viol = sdp.violations(u);
    let pinf = digits((norm2(&viol) / (T::one() + norm2(sdp.b()))).to_f64_lossy());
    let c = sdp.c_min();
    let n = sdp.n();
    let mut terms: Vec<(T, &SparseSymmetric<T>)> = vec![(-T::one(), &c)];
    terms.extend(y.iter().zip(sdp.constraints()).map(|(&yi, a)| (yi, a)));
    let aty_c = SparseSymmetric::linear_combination(n, &terms).expect("shared order");
    let lmax = lambda_max_positive(&aty_c);
    let sign_viol: Vec<T> = y
        .iter()
        .zip(sdp.senses())
        .map(|(&yi, s)| match s {
            Sense::Eq => T::zero(),
            Sense::Ge => (-yi).max(T::zero()),
            Sense::Le => yi.max(T::zero()),
        })
        .collect();
    let cnorm = spectral_norm(&c);
    let dinf = digits(((lmax + norm2(&sign_viol)) / (T::one() + cnorm)).to_f64_lossy());
    let cx = c.dot_factor(u);
    let by = sdp.b().iter().zip(y).fold(T::zero(), |a, (&b, &yi)| a + b * yi);
    let gap = digits(((cx - by).abs() / (T::one() + cx.abs() + by.abs())).to_f64_lossy());
    Metrics {
        pinf,
        dinf,
        gap,
        l: pinf.min(dinf).min(gap),
        ..Default::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{decompose, supernode_merge, Graph};
    use rand::{Rng, SeedableRng};

    fn ones(n: usize) -> DenseSym<f64> {
        DenseSym::from_mat(&Mat::from_fn(n, n, |_, _| 1.0))
    }

    #[test]
    fn path_all_ones() {
        let td = supernode_merge(&symbolic_factor(&Graph::path(3), &[0, 1, 2]).unwrap());
        let u = complete_low_rank(&[ones(2), ones(2)], &td).unwrap();
        assert_eq!(u.cols(), 1);
        let x = u.matmul_t(&u);
        assert!(x.sub(&Mat::from_fn(3, 3, |_, _| 1.0)).max_abs() < 1e-12);
    }

    #[test]
    fn single_bag_factor() {
        let td = TreeDecomposition::new(vec![vec![0, 1]], vec![0]).unwrap();
        let x = DenseSym::from_lower(2, vec![2.0, 1.0, 2.0]).unwrap();
        let u = complete_low_rank(std::slice::from_ref(&x), &td).unwrap();
        assert!(u.matmul_t(&u).sub(&x.to_mat()).max_abs() < 1e-12);
    }

    #[test]
    fn overlap_mismatch() {
        let td = supernode_merge(&symbolic_factor(&Graph::path(3), &[0, 1, 2]).unwrap());
        let x1 = DenseSym::from_lower(2, vec![1.0, 0.0, 1.0]).unwrap();
        let x2 = DenseSym::from_lower(2, vec![2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            complete_low_rank(&[x1, x2], &td),
            Err(RecoveryError::OverlapMismatch { .. })
        ));
        let bad = DenseSym::from_lower(2, vec![1.0, 0.0, -1.0]).unwrap();
        let td = TreeDecomposition::new(vec![vec![0, 1]], vec![0]).unwrap();
        assert!(matches!(
            complete_low_rank(&[bad], &td),
            Err(RecoveryError::BlockNotPsd { .. })
        ));
    }

    #[test]
    fn random_chordal_completion() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let n = rng.gen_range(2..15);
            let mut g = Graph::new(n);
            for _ in 0..2 * n {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if a != b && !g.has_edge(a, b) {
                    g.add_edge(a, b, 1.0).unwrap();
                }
            }
            let td = decompose(&g);
            let f = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let x = f.matmul_t(&f);
            let blocks: Vec<DenseSym<f64>> = (0..td.len())
                .map(|j| DenseSym::from_mat(&x).submatrix(td.bag(j)))
                .collect();
            let u = complete_low_rank(&blocks, &td).unwrap();
            assert!(u.cols() <= td.omega());
            let xc = u.matmul_t(&u);
            for (j, blk) in blocks.iter().enumerate() {
                let got = DenseSym::from_mat(&xc).submatrix(td.bag(j));
                assert!(got.to_mat().sub(&blk.to_mat()).frobenius_norm() <= 1e-6 * (1.0 + blk.frobenius_norm()));
            }
        }
    }

    #[test]
    fn lambda_max_matches_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let n = rng.gen_range(1..12);
            let mut m = SparseSymmetric::<f64>::new(n);
            for i in 0..n {
                m.insert(i, i, rng.gen_range(-2.0..1.0)).unwrap();
            }
            for _ in 0..n {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if a != b {
                    m.insert(a, b, rng.gen_range(-1.0..1.0)).unwrap();
                }
            }
            m.canonicalize();
            let e: SymEigen<f64> = SymEigen::new(&m.to_dense());
            let want = e.max_value().max(0.0);
            let got = lambda_max_positive(&m);
            assert!((got - want).abs() <= 1e-8 * (1.0 + want), "{got} {want}");
            let norm = e.max_value().abs().max(e.min_value().abs());
            assert!((spectral_norm(&m) - norm).abs() <= 1e-8 * (1.0 + norm));
        }
    }

    #[test]
    fn digits_formula() {
        assert!((digits(1e-3) - 3.0).abs() < 1e-12);
        assert_eq!(digits(0.0), 16.0);
        assert_eq!(digits(1e-20), 16.0);
    }

    #[test]
    fn metrics_of_exact_toy() {
        // min x s.t. x = 1: X = 1, y = 1
        let c = SparseSymmetric::from_triplets(1, [(0, 0, 1.0)]).unwrap();
        let a = SparseSymmetric::from_triplets(1, [(0, 0, 1.0)]).unwrap();
        let p = SdpProblem::minimize(c, vec![a], vec![1.0]).unwrap();
        let u = Mat::from_fn(1, 1, |_, _| 1.0);
        let m = dimacs_metrics(&p, &u, &[1.0]);
        assert!(m.pinf >= 12.0 && m.dinf >= 12.0 && m.gap >= 12.0);
        // perturbed so that |A(X) − b| = 1e-3 (1 + |b|)
        let u = Mat::from_fn(1, 1, |_, _| (1.0f64 + 2e-3).sqrt());
        let m = dimacs_metrics(&p, &u, &[1.0]);
        assert!((m.pinf - 3.0).abs() < 1e-9);
    }
}
