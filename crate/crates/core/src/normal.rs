//! Normal-equation solvers for `K = M D⁻¹ Mᵀ`: a dense baseline and the
//! block-tree factorization of the dualized converted program.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::chordal::TreeDecomposition;
use crate::cone::{ConicProblem, Scaling, Segment, SegmentScaling};
use crate::converter::ConvertedProblem;
use crate::linalg::{cholesky_semidefinite, solve_lower_in_place, solve_lower_t_in_place, tri_len, Mat};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NormalError {
    #[error("pivot block {0} is not positive definite")]
    IndefinitePivot(usize),
    #[error("rank-one update denominator underflow")]
    DenominatorUnderflow,
    #[error("row {0} couples blocks that are not adjacent in the tree")]
    StructureViolation(usize),
    #[error("solve called before factor")]
    NotFactored,
}

/// Block-pattern statistics of the last factorization.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct NormalStats {
    pub blocks: usize,
    pub offdiag_blocks: usize,
    pub factor_offdiag_blocks: usize,
    /// scalars held by H and L blocks
    pub stored: usize,
    pub flops: f64,
}

pub trait NormalSolver<T: Real> {
    /// Factors `M D⁻¹ Mᵀ` for the scaling `D = ∇²F(w)`.
    fn factor(&mut self, problem: &ConicProblem<T>, scaling: &Scaling<T>) -> Result<(), NormalError>;
    fn solve(&self, rhs: &[T]) -> Result<Vec<T>, NormalError>;
    fn stats(&self) -> NormalStats {
        NormalStats::default()
    }
}

/// Pivots within this multiple of ε of their diagonal mark dependent rows.
fn dependent_pivot<T: Real>() -> T {
    T::lit(64.0) * T::epsilon()
}

/// Diagonal shifts tried in turn until the Cholesky factorization succeeds.
fn regularizations<T: Real>(max_diag: T) -> impl Iterator<Item = T> {
    let base = T::epsilon() * (T::one() + max_diag);
    (0..4).map(move |k| base * T::lit(1e3f64.powi(k)))
}

/// Explicit `K`, factored by dense Cholesky.
#[derive(Clone, Debug, Default)]
pub struct DenseNormal<T> {
    l: Option<Mat<T>>,
    stats: NormalStats,
}

impl<T: Real> DenseNormal<T> {
    pub fn new() -> Self {
        Self {
            l: None,
            stats: NormalStats::default(),
        }
    }
}

/// Explicit `M D⁻¹ Mᵀ`.
pub fn dense_normal_matrix<T: Real>(problem: &ConicProblem<T>, scaling: &Scaling<T>) -> Mat<T> {
    let m = &problem.m;
    let cone = &problem.cone;
    let r = m.rows();
    // columns z_j = D⁻¹ M_jᵀ, computed segment by segment
    let seg_of = {
        let mut s = Vec::with_capacity(cone.len());
        for k in 0..cone.segments().len() {
            s.extend(std::iter::repeat(k).take(cone.segments()[k].len()));
        }
        s
    };
    let mut k_mat = Mat::zeros(r, r);
    let mut z = vec![T::zero(); cone.len()];
    for j in 0..r {
        let (cols, vals) = m.row(j);
        let mut segs: Vec<usize> = cols.iter().map(|&c| seg_of[c]).collect();
        segs.dedup();
        for &s in &segs {
            let rg = cone.range(s);
            let mut local = vec![T::zero(); rg.len()];
            for (&c, &v) in cols.iter().zip(vals) {
                if rg.contains(&c) {
                    local[c - rg.start] = v;
                }
            }
            scaling.apply_dinv_segment(s, &local, &mut z[rg]);
        }
        for i in 0..=j {
            let (ci, vi) = m.row(i);
            let mut acc = T::zero();
            for (&c, &v) in ci.iter().zip(vi) {
                acc = acc + v * z[c];
            }
            k_mat[(i, j)] = acc;
            k_mat[(j, i)] = acc;
        }
        for &s in &segs {
            z[cone.range(s)].iter_mut().for_each(|v| *v = T::zero());
        }
    }
    k_mat
}

impl<T: Real> NormalSolver<T> for DenseNormal<T> {
    fn factor(&mut self, problem: &ConicProblem<T>, scaling: &Scaling<T>) -> Result<(), NormalError> {
        let mut k = dense_normal_matrix(problem, scaling);
        let n = k.rows();
        let maxd = (0..n).fold(T::zero(), |a, i| a.max(k[(i, i)]));
        let mut applied = T::zero();
        self.l = None;
        for reg in regularizations(maxd) {
            for i in 0..n {
                k[(i, i)] = k[(i, i)] + reg - applied;
            }
            applied = reg;
            self.l = cholesky_semidefinite(&k, dependent_pivot()).map(|(l, _)| l);
            if self.l.is_some() {
                break;
            }
        }
        if self.l.is_none() {
            return Err(NormalError::IndefinitePivot(0));
        }
        let nf = n as f64;
        self.stats = NormalStats {
            blocks: 1,
            offdiag_blocks: 0,
            factor_offdiag_blocks: 0,
            stored: 2 * n * n,
            flops: nf * nf * nf / 3.0,
        };
        Ok(())
    }

    fn solve(&self, rhs: &[T]) -> Result<Vec<T>, NormalError> {
        let l = self.l.as_ref().ok_or(NormalError::NotFactored)?;
        let mut x = rhs.to_vec();
        crate::linalg::cholesky_solve_in_place(l, &mut x);
        Ok(x)
    }

    fn stats(&self) -> NormalStats {
        self.stats.clone()
    }
}

/// Children-before-parents block order (depth-first postorder, smallest child first).
pub fn topological_permutation(td: &TreeDecomposition) -> Vec<usize> {
    td.topological_order().to_vec()
}

/// Dense block `W ⊗ₛ W` in the svec basis.
pub fn sym_kron_block<T: Real>(w: &Mat<T>) -> Mat<T> {
    let n = w.rows();
    let d = tri_len(n);
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let inv_r2 = T::one() / r2;
    let mut out = Mat::zeros(d, d);
    let mut p = 0;
    for i in 0..n {
        for j in 0..=i {
            let sij = if i == j { T::one() } else { r2 };
            let mut q = 0;
            for k in 0..n {
                for l in 0..=k {
                    out[(p, q)] = if k == l {
                        sij * w[(i, k)] * w[(j, k)]
                    } else {
                        sij * (w[(i, k)] * w[(j, l)] + w[(i, l)] * w[(j, k)]) * inv_r2
                    };
                    q += 1;
                }
            }
            p += 1;
        }
    }
    out
}

/// Block-tree normal solver for the dualized converted program:
/// `H = blockdiag(D_K⁻¹) + σ BᵀB` with `B = [A; N]`, plus the rank-one term `q qᵀ`.
#[derive(Clone, Debug)]
pub struct TreeNormal<T> {
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    order: Vec<usize>,
    dims: Vec<usize>,
    offsets: Vec<usize>,
    psd_order: Vec<usize>,
    slacks: Vec<usize>,
    /// cone segment of each block's PSD part and of its slacks
    psd_seg: Vec<usize>,
    nn_seg: Vec<Option<usize>>,
    /// rows of B as (block, local index, value)
    rows: Vec<Vec<(usize, usize, T)>>,
    g_diag: Vec<Mat<T>>,
    /// `G_{p(c), c}` for each non-root block `c`
    g_off: Vec<Option<Mat<T>>>,
    l_diag: Vec<Mat<T>>,
    l_off: Vec<Option<Mat<T>>>,
    h: Vec<T>,
    q: Vec<T>,
    denom: T,
    factored: bool,
    stats: NormalStats,
}

impl<T: Real> TreeNormal<T> {
    /// Checks that every row couples at most two tree-adjacent blocks and
    /// precomputes `BᵀB` by blocks.
    pub fn new(p: &ConvertedProblem<T>) -> Result<Self, NormalError> {
        let td = &p.td;
        let nb = p.blocks.len();
        let parent: Vec<Option<usize>> = (0..nb).map(|j| td.parent(j)).collect();
        let children: Vec<Vec<usize>> = (0..nb).map(|j| td.children(j).to_vec()).collect();
        let dims: Vec<usize> = p.blocks.iter().map(|b| b.len()).collect();
        let offsets = p.offsets();
        let mut psd_seg = Vec::with_capacity(nb);
        let mut nn_seg = Vec::with_capacity(nb);
        let mut s = 1;
        for b in &p.blocks {
            psd_seg.push(s);
            s += 1;
            if b.slacks > 0 {
                nn_seg.push(Some(s));
                s += 1;
            } else {
                nn_seg.push(None);
            }
        }
        let mut rows = Vec::with_capacity(p.row_count());
        for (r, row) in p.rows().enumerate() {
            let entries: Vec<(usize, usize, T)> = row
                .coefs
                .iter()
                .map(|c| (c.block, p.blocks[c.block].index(c.slot), c.value))
                .collect();
            let bl = row.blocks();
            if bl.len() > 2
                || (bl.len() == 2 && parent[bl[0]] != Some(bl[1]) && parent[bl[1]] != Some(bl[0]))
            {
                return Err(NormalError::StructureViolation(r));
            }
            rows.push(entries);
        }
        let mut g_diag: Vec<Mat<T>> = dims.iter().map(|&d| Mat::zeros(d, d)).collect();
        let mut g_off: Vec<Option<Mat<T>>> = (0..nb)
            .map(|c| parent[c].map(|pp| Mat::zeros(dims[pp], dims[c])))
            .collect();
        for entries in &rows {
            for &(b1, i1, v1) in entries {
                for &(b2, i2, v2) in entries {
                    let v = v1 * v2;
                    if b1 == b2 {
                        g_diag[b1][(i1, i2)] = g_diag[b1][(i1, i2)] + v;
                    } else if parent[b2] == Some(b1) {
                        let g = g_off[b2].as_mut().expect("non-root");
                        g[(i1, i2)] = g[(i1, i2)] + v;
                    }
                }
            }
        }
        let offdiag = g_off
            .iter()
            .filter(|g| g.as_ref().is_some_and(|m| m.max_abs() > T::zero()))
            .count();
        Ok(Self {
            parent,
            children,
            order: topological_permutation(td),
            dims,
            offsets,
            psd_order: p.blocks.iter().map(|b| b.order).collect(),
            slacks: p.blocks.iter().map(|b| b.slacks).collect(),
            psd_seg,
            nn_seg,
            rows,
            g_diag,
            g_off,
            l_diag: Vec::new(),
            l_off: Vec::new(),
            h: Vec::new(),
            q: Vec::new(),
            denom: T::one(),
            factored: false,
            stats: NormalStats {
                blocks: nb,
                offdiag_blocks: offdiag,
                ..Default::default()
            },
        })
    }

    /// Off-diagonal blocks of `H` that are structurally nonzero, as `(parent, child)`.
    pub fn h_offdiag_pattern(&self) -> Vec<(usize, usize)> {
        (0..self.dims.len())
            .filter_map(|c| {
                let g = self.g_off[c].as_ref()?;
                (g.max_abs() > T::zero()).then(|| (self.parent[c].unwrap(), c))
            })
            .collect()
    }

    /// Dense `H + q qᵀ`, for testing.
    pub fn dense_h(&self, problem: &ConicProblem<T>, scaling: &Scaling<T>) -> Mat<T> {
        let (diag, off, q) = self.assemble(problem, scaling);
        let n: usize = self.dims.iter().sum();
        let mut h = Mat::zeros(n, n);
        for j in 0..self.dims.len() {
            let o = self.offsets[j];
            for a in 0..self.dims[j] {
                for b in 0..self.dims[j] {
                    h[(o + a, o + b)] = diag[j][(a, b)];
                }
            }
            if let (Some(pp), Some(m)) = (self.parent[j], off[j].as_ref()) {
                let op = self.offsets[pp];
                for a in 0..self.dims[pp] {
                    for b in 0..self.dims[j] {
                        h[(op + a, o + b)] = m[(a, b)];
                        h[(o + b, op + a)] = m[(a, b)];
                    }
                }
            }
        }
        for i in 0..n {
            for k in 0..n {
                h[(i, k)] = h[(i, k)] + q[i] * q[k];
            }
        }
        h
    }

    #[allow(clippy::type_complexity)]
    fn assemble(
        &self,
        problem: &ConicProblem<T>,
        scaling: &Scaling<T>,
    ) -> (Vec<Mat<T>>, Vec<Option<Mat<T>>>, Vec<T>) {
        let SegmentScaling::SecondOrder { w, det, nu } = &scaling.segments[0] else {
            panic!("dualized cone starts with a second-order segment");
        };
        debug_assert!(matches!(problem.cone.segments()[0], Segment::SecondOrder(_)));
        let sigma = *det / *nu;
        let qs = (T::lit(2.0) / *nu).sqrt();
        let n: usize = self.dims.iter().sum();
        let mut q = vec![T::zero(); n];
        for (r, entries) in self.rows.iter().enumerate() {
            let wr = w[1 + r];
            for &(b, i, v) in entries {
                q[self.offsets[b] + i] = q[self.offsets[b] + i] + qs * wr * v;
            }
        }
        let mut diag = Vec::with_capacity(self.dims.len());
        for j in 0..self.dims.len() {
            let mut hj = self.g_diag[j].scaled(sigma);
            if let SegmentScaling::Psd { w, .. } = &scaling.segments[self.psd_seg[j]] {
                let kb = sym_kron_block(w);
                for a in 0..kb.rows() {
                    for b in 0..kb.cols() {
                        hj[(a, b)] = hj[(a, b)] + kb[(a, b)];
                    }
                }
            }
            if let Some(s) = self.nn_seg[j] {
                if let SegmentScaling::NonNeg { w2 } = &scaling.segments[s] {
                    let base = tri_len(self.psd_order[j]);
                    for k in 0..self.slacks[j] {
                        hj[(base + k, base + k)] = hj[(base + k, base + k)] + w2[k];
                    }
                }
            }
            diag.push(hj);
        }
        let off = self
            .g_off
            .iter()
            .map(|g| g.as_ref().map(|m| m.scaled(sigma)))
            .collect();
        (diag, off, q)
    }

    #[allow(clippy::type_complexity)]
    fn factor_blocks(
        &self,
        diag: &[Mat<T>],
        off: &[Option<Mat<T>>],
        reg: T,
    ) -> Result<(Vec<Mat<T>>, Vec<Option<Mat<T>>>, f64, usize, usize), NormalError> {
        let nb = self.dims.len();
        let mut l_diag: Vec<Mat<T>> = vec![Mat::zeros(0, 0); nb];
        let mut l_off: Vec<Option<Mat<T>>> = vec![None; nb];
        let mut flops = 0.0;
        let mut stored = 0;
        let mut fact_off = 0;
        for &j in &self.order {
            let d = self.dims[j];
            let mut s = diag[j].clone();
            for i in 0..d {
                s[(i, i)] = s[(i, i)] + reg;
            }
            for &c in &self.children[j] {
                if let Some(lc) = &l_off[c] {
                    let upd = lc.matmul_t(lc);
                    for a in 0..d {
                        for b in 0..d {
                            s[(a, b)] = s[(a, b)] - upd[(a, b)];
                        }
                    }
                    flops += (d * d * self.dims[c]) as f64;
                }
            }
            let (lj, _) = cholesky_semidefinite(&s, dependent_pivot()).ok_or(NormalError::IndefinitePivot(j))?;
            flops += (d * d * d) as f64 / 3.0;
            stored += 2 * d * d;
            if let (Some(pp), Some(hpj)) = (self.parent[j], &off[j]) {
                if hpj.max_abs() > T::zero() {
                    // L_{p,j} = H_{p,j} L_jj⁻ᵀ, row by row
                    let mut lpj = hpj.clone();
                    for a in 0..self.dims[pp] {
                        solve_lower_in_place(&lj, lpj.row_mut(a));
                    }
                    flops += (self.dims[pp] * d * d) as f64;
                    stored += 2 * self.dims[pp] * d;
                    fact_off += 1;
                    l_off[j] = Some(lpj);
                }
            }
            l_diag[j] = lj;
        }
        Ok((l_diag, l_off, flops, stored, fact_off))
    }

    fn solve_h(&self, rhs: &[T]) -> Vec<T> {
        let mut x = rhs.to_vec();
        for &j in &self.order {
            let o = self.offsets[j];
            let d = self.dims[j];
            for &c in &self.children[j] {
                if let Some(lc) = &self.l_off[c] {
                    let oc = self.offsets[c];
                    let zc = x[oc..oc + self.dims[c]].to_vec();
                    let t = lc.matvec(&zc);
                    for a in 0..d {
                        x[o + a] = x[o + a] - t[a];
                    }
                }
            }
            solve_lower_in_place(&self.l_diag[j], &mut x[o..o + d]);
        }
        for &j in self.order.iter().rev() {
            let o = self.offsets[j];
            let d = self.dims[j];
            if let (Some(pp), Some(lj)) = (self.parent[j], &self.l_off[j]) {
                let op = self.offsets[pp];
                let xp = x[op..op + self.dims[pp]].to_vec();
                let t = lj.matvec_t(&xp);
                for a in 0..d {
                    x[o + a] = x[o + a] - t[a];
                }
            }
            solve_lower_t_in_place(&self.l_diag[j], &mut x[o..o + d]);
        }
        x
    }
}

impl<T: Real> NormalSolver<T> for TreeNormal<T> {
    fn factor(&mut self, problem: &ConicProblem<T>, scaling: &Scaling<T>) -> Result<(), NormalError> {
        let (diag, off, q) = self.assemble(problem, scaling);
        let maxd = diag
            .iter()
            .flat_map(|m| (0..m.rows()).map(move |i| m[(i, i)]))
            .fold(T::zero(), T::max);
        let mut last = NormalError::IndefinitePivot(0);
        let mut done = None;
        for reg in regularizations(maxd) {
            match self.factor_blocks(&diag, &off, reg) {
                Ok(f) => {
                    done = Some(f);
                    break;
                }
                Err(e) => last = e,
            }
        }
        let (l_diag, l_off, flops, stored, fact_off) = done.ok_or(last)?;
        self.l_diag = l_diag;
        self.l_off = l_off;
        self.factored = true;
        let h = self.solve_h(&q);
        let denom = T::one() + dot(&q, &h);
        if !(denom > T::lit(1e-14)) {
            self.factored = false;
            return Err(NormalError::DenominatorUnderflow);
        }
        self.h = h;
        self.q = q;
        self.denom = denom;
        self.stats.factor_offdiag_blocks = fact_off;
        self.stats.stored = stored + self.q.len() + self.h.len();
        self.stats.flops = flops;
        Ok(())
    }

    fn solve(&self, rhs: &[T]) -> Result<Vec<T>, NormalError> {
        if !self.factored {
            return Err(NormalError::NotFactored);
        }
        let mut x = self.solve_h(rhs);
        let t = dot(&self.q, &x) / self.denom;
        for (xi, &hi) in x.iter_mut().zip(&self.h) {
            *xi = *xi - t * hi;
        }
        Ok(x)
    }

    fn stats(&self) -> NormalStats {
        self.stats.clone()
    }
}

/// Sherman–Morrison solve of `(H + q qᵀ) x = rhs` given a solver for `H`.
pub fn solve_with_rank1<T: Real>(
    solve_h: impl Fn(&[T]) -> Vec<T>,
    q: &[T],
    rhs: &[&[T]],
) -> Result<Vec<Vec<T>>, NormalError> {
    let h = solve_h(q);
    let denom = T::one() + dot(q, &h);
    if !(denom > T::lit(1e-14)) {
        return Err(NormalError::DenominatorUnderflow);
    }
    Ok(rhs
        .iter()
        .map(|r| {
            let mut x = solve_h(r);
            let t = dot(q, &x) / denom;
            for (xi, &hi) in x.iter_mut().zip(&h) {
                *xi = *xi - t * hi;
            }
            x
        })
        .collect())
}

/// Pairs of overlap row-blocks coupled in the undualized normal matrix
/// `B D⁻¹ Bᵀ` (row-blocks keyed by child bag). Two row-blocks couple when
/// they touch a common bag.
pub fn plain_overlap_coupling<T: Real>(p: &ConvertedProblem<T>) -> Vec<(usize, usize)> {
    let nb = p.blocks.len();
    let mut by_bag: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nb];
    for (r, &c) in p.n_rows.iter().zip(&p.n_row_child) {
        for b in r.blocks() {
            by_bag[b].insert(c);
        }
    }
    let mut pairs = BTreeSet::new();
    for set in &by_bag {
        let v: Vec<usize> = set.iter().copied().collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                pairs.insert((v[i], v[j]));
            }
        }
    }
    pairs.into_iter().collect()
}

/// Block elimination game: given the off-diagonal block pattern of a symmetric
/// matrix and an elimination order, returns the lower off-diagonal block count of
/// the permuted matrix and of its Cholesky factor.
pub fn symbolic_block_fill(n: usize, edges: &[(usize, usize)], order: &[usize]) -> (usize, usize) {
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for &(a, b) in edges {
        if a != b {
            adj[a].insert(b);
            adj[b].insert(a);
        }
    }
    let original = adj.iter().map(BTreeSet::len).sum::<usize>() / 2;
    let mut done = vec![false; n];
    let mut factor = 0;
    for &v in order {
        let nb: Vec<usize> = adj[v].iter().copied().filter(|&u| !done[u]).collect();
        factor += nb.len();
        for i in 0..nb.len() {
            for j in i + 1..nb.len() {
                adj[nb[i]].insert(nb[j]);
                adj[nb[j]].insert(nb[i]);
            }
        }
        done[v] = true;
    }
    (original, factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{decompose, Graph};
    use crate::cone::NuConvention;
    use crate::converter::{convert, dualize, separate_with_aux};
    use crate::linalg::{sym_kron_apply, DenseSym, SparseSymmetric};
    use crate::problem::SdpProblem;
    use rand::{Rng, SeedableRng};

    #[test]
    fn kron_block_matches_operator() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let mut w = Mat::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
        w.symmetrize();
        let kb = sym_kron_block(&w);
        let ws = DenseSym::from_mat(&w);
        for _ in 0..5 {
            let v: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let want = sym_kron_apply(&ws, &ws, &v).unwrap();
            let got = kb.matvec(&v);
            for (a, b) in want.iter().zip(&got) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn rank1_examples() {
        let q = [1.0, 0.0];
        let r = [1.0, 0.0];
        let x = solve_with_rank1(|v: &[f64]| v.to_vec(), &q, &[&r]).unwrap();
        assert_eq!(x[0], vec![0.5, 0.0]);
        let z = [0.0, 0.0];
        let x = solve_with_rank1(|v: &[f64]| v.to_vec(), &z, &[&r]).unwrap();
        assert_eq!(x[0], vec![1.0, 0.0]);
        let bad = [0.0, 0.0];
        assert_eq!(
            solve_with_rank1(|v: &[f64]| v.iter().map(|t| -t).collect(), &[1.0, 0.0], &[&bad]),
            Err(NormalError::DenominatorUnderflow)
        );
    }

    #[test]
    fn rank1_random_dense() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for n in [1, 5, 20] {
            let a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let mut h = a.matmul_t(&a);
            for i in 0..n {
                h[(i, i)] += 1.0;
            }
            let l = crate::linalg::cholesky(&h, 0.0).unwrap();
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let x = solve_with_rank1(
                |v: &[f64]| {
                    let mut t = v.to_vec();
                    crate::linalg::cholesky_solve_in_place(&l, &mut t);
                    t
                },
                &q,
                &[&r],
            )
            .unwrap();
            let mut full = h.clone();
            for i in 0..n {
                for j in 0..n {
                    full[(i, j)] += q[i] * q[j];
                }
            }
            let res = full.matvec(&x[0]);
            for (a, b) in res.iter().zip(&r) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    fn path_maxcut(n: usize) -> SdpProblem<f64> {
        crate::generators::maxcut(&Graph::path(n))
    }

    fn random_interior(cone: &crate::cone::ConeSpec, rng: &mut impl Rng) -> Vec<f64> {
        let mut v = cone.identity::<f64>();
        for t in v.iter_mut() {
            *t += rng.gen_range(-0.2..0.2) / (cone.len() as f64).sqrt();
        }
        assert!(cone.is_interior(&v));
        v
    }

    fn check_tree_vs_dense(sdp: &SdpProblem<f64>, aux: bool, seed: u64) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = crate::chordal::sparsity_graph(
            &std::iter::once(sdp.c()).chain(sdp.constraints()).collect::<Vec<_>>(),
        )
        .unwrap();
        let td = decompose(&g);
        let mut ctc = crate::converter::add_inequality_slacks(convert(sdp, &td).unwrap());
        if aux {
            ctc = separate_with_aux(ctc).unwrap();
        }
        let d = dualize(&ctc, NuConvention::UnitSoc);
        let x = random_interior(&d.conic.cone, &mut rng);
        let s = random_interior(&d.conic.cone, &mut rng);
        let sc = d.conic.cone.scaling(&x, &s).unwrap();
        let mut tree = TreeNormal::new(&ctc).unwrap();
        tree.factor(&d.conic, &sc).unwrap();
        let k = dense_normal_matrix(&d.conic, &sc);
        let h = tree.dense_h(&d.conic, &sc);
        assert!(k.sub(&h).max_abs() < 1e-10 * (1.0 + k.max_abs()));
        let r: Vec<f64> = (0..k.rows()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sol = tree.solve(&r).unwrap();
        let res = k.matvec(&sol);
        let scale = k.max_abs() * sol.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (a, b) in res.iter().zip(&r) {
            assert!((a - b).abs() < 1e-8 * (1.0 + scale), "{a} {b}");
        }
        assert_eq!(tree.stats().factor_offdiag_blocks, tree.h_offdiag_pattern().len());
    }

    #[test]
    fn tree_normal_matches_dense() {
        check_tree_vs_dense(&path_maxcut(6), false, 1);
        check_tree_vs_dense(&crate::generators::maxkcut(&Graph::cycle(5), 3), false, 2);
        check_tree_vs_dense(&crate::generators::lovasz_theta(&Graph::cycle(6)), false, 3);
        check_tree_vs_dense(&crate::generators::path_rayleigh(6), true, 4);
    }

    #[test]
    fn structure_violation_detected() {
        // a constraint coupling two non-adjacent bags
        let td = TreeDecomposition::new(vec![vec![0, 1], vec![1, 2], vec![2, 3]], vec![1, 2, 2]).unwrap();
        let a = SparseSymmetric::from_triplets(4, [(0, 0, 1.0), (3, 3, 1.0)]).unwrap();
        let sdp = SdpProblem::minimize(SparseSymmetric::new(4), vec![a], vec![1.0]).unwrap();
        let ctc = convert(&sdp, &td).unwrap();
        assert_eq!(TreeNormal::new(&ctc).unwrap_err(), NormalError::StructureViolation(0));
        assert!(TreeNormal::new(&separate_with_aux(ctc).unwrap()).is_ok());
    }

    #[test]
    fn topological_orders() {
        let td = TreeDecomposition::new(vec![vec![0, 1], vec![1, 2]], vec![1, 1]).unwrap();
        assert_eq!(topological_permutation(&td), vec![0, 1]);
        let td = decompose(&Graph::star(4));
        let order = topological_permutation(&td);
        assert_eq!(*order.last().unwrap(), td.root());
    }

    #[test]
    fn star_fill_negative_control() {
        let l = 6;
        let edges: Vec<(usize, usize)> = (0..l - 1).map(|c| (c, l - 1)).collect();
        let leaves_first: Vec<usize> = (0..l).collect();
        assert_eq!(symbolic_block_fill(l, &edges, &leaves_first), (l - 1, l - 1));
        let hub_first: Vec<usize> = std::iter::once(l - 1).chain(0..l - 1).collect();
        let (h, f) = symbolic_block_fill(l, &edges, &hub_first);
        assert_eq!(h, l - 1);
        assert_eq!(f, (l - 1) + (l - 1) * (l - 2) / 2);
        assert!(f > h);
    }
}
