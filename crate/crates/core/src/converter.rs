//! Clique tree conversion: per-bag blocks, overlap rows, inequality slacks,
//! auxiliary-variable separation and dualization.

use crate::chordal::{Graph, TreeDecomposition};
use crate::cone::{ConeSpec, ConicProblem, NuConvention, Segment};
use crate::linalg::{packed_index, tri_len, CsrMatrix, DenseSym, SparseSymmetric};
use crate::problem::{SdpProblem, Sense};
use crate::scalar::Real;
use crate::splitter::{build_unique_partition, split, Split, SplitError, UniquePartition};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConvertError {
    /// `constraint` is 1-based; 0 denotes the objective.
    #[error("split of matrix {constraint} does not reconstruct it")]
    InvalidSplit { constraint: usize },
    #[error("support of constraint {constraint} cannot be connected in the tree")]
    DisconnectedSupport { constraint: usize },
    #[error("matrix is not a network-flow constraint")]
    NotNetworkFlow,
    #[error("auxiliary variables are free and need the dualized form")]
    FreeVariables,
    #[error(transparent)]
    Split(#[from] SplitError),
}

/// Position of a scalar inside its block segment `[svec(X_j); slacks; aux]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Svec(usize),
    Slack(usize),
    Aux(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Coef<T> {
    pub block: usize,
    pub slot: Slot,
    pub value: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row<T> {
    pub coefs: Vec<Coef<T>>,
    pub rhs: T,
    pub sense: Sense,
}

impl<T: Real> Row<T> {
    /// Distinct blocks with a coefficient in this row, sorted.
    pub fn blocks(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.coefs.iter().map(|c| c.block).collect();
        b.sort_unstable();
        b.dedup();
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct BlockLayout {
    pub order: usize,
    pub slacks: usize,
    pub aux: usize,
}

impl BlockLayout {
    pub fn len(&self) -> usize {
        tri_len(self.order) + self.slacks + self.aux
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, slot: Slot) -> usize {
        match slot {
            Slot::Svec(k) => k,
            Slot::Slack(k) => tri_len(self.order) + k,
            Slot::Aux(k) => tri_len(self.order) + self.slacks + k,
        }
    }
}

/// Connected subtree `W_i` carrying one separated constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct AuxSubtree {
    pub root: usize,
    /// sorted bag ids
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct AuxPlan {
    /// `None` for constraints left as a single row.
    pub subtrees: Vec<Option<AuxSubtree>>,
    /// auxiliary scalars appended to each block
    pub gamma: Vec<usize>,
}

/// Splits of the objective and of every constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Splits<T> {
    pub c: Split<T>,
    pub a: Vec<Split<T>>,
}

/// Runs the optimal splitter on `C` (minimization form) and each `A_i`.
pub fn split_problem<T: Real>(
    sdp: &SdpProblem<T>,
    td: &TreeDecomposition,
) -> Result<Splits<T>, SplitError> {
    let up = build_unique_partition(td)?;
    let c = split(&sdp.c_min(), td, &up)?;
    let a = sdp
        .constraints()
        .iter()
        .map(|m| split(m, td, &up))
        .collect::<Result<_, _>>()?;
    Ok(Splits { c, a })
}

/// Converted conic program over the bags of a tree decomposition.
#[derive(Clone, Debug)]
pub struct ConvertedProblem<T> {
    pub td: TreeDecomposition,
    pub blocks: Vec<BlockLayout>,
    pub objective: Vec<Coef<T>>,
    pub a_rows: Vec<Row<T>>,
    /// original constraint of each A row
    pub row_constraint: Vec<usize>,
    /// row holding the multiplier of each original constraint
    pub root_row: Vec<usize>,
    pub n_rows: Vec<Row<T>>,
    /// child bag of each overlap row
    pub n_row_child: Vec<usize>,
    pub aux_plan: AuxPlan,
    /// order of the original matrix variable
    pub n: usize,
    rank: Vec<usize>,
}

fn svec_coefs<T: Real>(block: usize, m: &DenseSym<T>) -> Vec<Coef<T>> {
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let k = m.order();
    let mut out = Vec::new();
    for i in 0..k {
        for j in 0..=i {
            let v = m.get(i, j);
            if v != T::zero() {
                out.push(Coef {
                    block,
                    slot: Slot::Svec(packed_index(i, j)),
                    value: if i == j { v } else { v * r2 },
                });
            }
        }
    }
    out
}

/// Deterministic probe entry in `[-1, 1]`.
fn probe<T: Real>(i: usize, j: usize) -> T {
    let (a, b) = if i >= j { (i, j) } else { (j, i) };
    let mut z = (a as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (b as u64).wrapping_add(0x632B_E59B_D9B4_E019);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    T::lit((z >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0)
}

fn reconstructs<T: Real>(m: &SparseSymmetric<T>, s: &Split<T>, td: &TreeDecomposition) -> bool {
    let mut want = T::zero();
    let mut scale = T::zero();
    for &(r, c, v) in m.triplets() {
        let t = v * probe::<T>(r, c);
        want = want + if r == c { t } else { t + t };
        scale = scale + v.abs();
    }
    let mut got = T::zero();
    for (j, blk) in &s.blocks {
        let bag = td.bag(*j);
        for a in 0..bag.len() {
            for b in 0..=a {
                let v = blk.get(a, b);
                if v != T::zero() {
                    let t = v * probe::<T>(bag[a], bag[b]);
                    got = got + if a == b { t } else { t + t };
                    scale = scale + v.abs();
                }
            }
        }
    }
    (want - got).abs() <= T::lit(1e3) * T::epsilon() * (T::one() + scale)
}

/// Builds the converted program from splits of `C` and of every `A_i`.
pub fn build_ctc<T: Real>(
    sdp: &SdpProblem<T>,
    td: &TreeDecomposition,
    splits: &Splits<T>,
) -> Result<ConvertedProblem<T>, ConvertError> {
    if splits.a.len() != sdp.m() {
        return Err(ConvertError::InvalidSplit {
            constraint: splits.a.len().min(sdp.m()) + 1,
        });
    }
    if !reconstructs(&sdp.c_min(), &splits.c, td) {
        return Err(ConvertError::InvalidSplit { constraint: 0 });
    }
    for (i, (m, s)) in sdp.constraints().iter().zip(&splits.a).enumerate() {
        if !reconstructs(m, s, td) {
            return Err(ConvertError::InvalidSplit { constraint: i + 1 });
        }
    }
    let l = td.len();
    let blocks: Vec<BlockLayout> = (0..l)
        .map(|j| BlockLayout {
            order: td.bag(j).len(),
            ..Default::default()
        })
        .collect();
    let objective = splits
        .c
        .blocks
        .iter()
        .flat_map(|(j, m)| svec_coefs(*j, m))
        .collect();
    let a_rows: Vec<Row<T>> = splits
        .a
        .iter()
        .zip(sdp.b())
        .zip(sdp.senses())
        .map(|((s, &b), &sense)| Row {
            coefs: s.blocks.iter().flat_map(|(j, m)| svec_coefs(*j, m)).collect(),
            rhs: b,
            sense,
        })
        .collect();
    let mut n_rows = Vec::new();
    let mut n_row_child = Vec::new();
    for j in 0..l {
        let Some(p) = td.parent(j) else { continue };
        let sep = td.separator(j);
        let (bj, bp) = (td.bag(j), td.bag(p));
        let loc_j: Vec<usize> = sep.iter().map(|v| bj.binary_search(v).unwrap()).collect();
        let loc_p: Vec<usize> = sep.iter().map(|v| bp.binary_search(v).unwrap()).collect();
        for a in 0..sep.len() {
            for b in 0..=a {
                n_rows.push(Row {
                    coefs: vec![
                        Coef {
                            block: j,
                            slot: Slot::Svec(packed_index(loc_j[a], loc_j[b])),
                            value: T::one(),
                        },
                        Coef {
                            block: p,
                            slot: Slot::Svec(packed_index(loc_p[a], loc_p[b])),
                            value: -T::one(),
                        },
                    ],
                    rhs: T::zero(),
                    sense: Sense::Eq,
                });
                n_row_child.push(j);
            }
        }
    }
    let mut rank = vec![0; l];
    for (k, &j) in td.topological_order().iter().enumerate() {
        rank[j] = k;
    }
    let m = sdp.m();
    Ok(ConvertedProblem {
        td: td.clone(),
        blocks,
        objective,
        a_rows,
        row_constraint: (0..m).collect(),
        root_row: (0..m).collect(),
        n_rows,
        n_row_child,
        aux_plan: AuxPlan {
            subtrees: vec![None; m],
            gamma: vec![0; l],
        },
        n: sdp.n(),
        rank,
    })
}

/// Splits with the optimal splitter, then builds the converted program.
pub fn convert<T: Real>(
    sdp: &SdpProblem<T>,
    td: &TreeDecomposition,
) -> Result<ConvertedProblem<T>, ConvertError> {
    let splits = split_problem(sdp, td)?;
    build_ctc(sdp, td, &splits)
}

/// Turns every inequality row into an equality with one nonnegative slack,
/// placed in the touched block latest in topological order.
pub fn add_inequality_slacks<T: Real>(mut p: ConvertedProblem<T>) -> ConvertedProblem<T> {
    for r in 0..p.a_rows.len() {
        let sense = p.a_rows[r].sense;
        if sense == Sense::Eq {
            continue;
        }
        let block = p.a_rows[r]
            .coefs
            .iter()
            .map(|c| c.block)
            .max_by_key(|&b| p.rank[b])
            .unwrap_or(p.td.root());
        let k = p.blocks[block].slacks;
        p.blocks[block].slacks += 1;
        let row = &mut p.a_rows[r];
        row.coefs.push(Coef {
            block,
            slot: Slot::Slack(k),
            value: if sense == Sense::Ge { -T::one() } else { T::one() },
        });
        row.sense = Sense::Eq;
    }
    p
}

impl<T: Real> ConvertedProblem<T> {
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }

    /// Start of each block segment in the flat variable vector.
    pub fn offsets(&self) -> Vec<usize> {
        let mut o = Vec::with_capacity(self.blocks.len());
        let mut s = 0;
        for b in &self.blocks {
            o.push(s);
            s += b.len();
        }
        o
    }

    pub fn n_vars(&self) -> usize {
        self.blocks.iter().map(BlockLayout::len).sum()
    }

    pub fn global_index(&self, offsets: &[usize], c: &Coef<T>) -> usize {
        offsets[c.block] + self.blocks[c.block].index(c.slot)
    }

    /// `f`, the number of rows of `[A; N]`.
    pub fn row_count(&self) -> usize {
        self.a_rows.len() + self.n_rows.len()
    }

    /// Rows of `[A; N]` in order.
    pub fn rows(&self) -> impl Iterator<Item = &Row<T>> {
        self.a_rows.iter().chain(&self.n_rows)
    }

    /// Bags touched by each A row.
    pub fn block_of_row(&self) -> Vec<Vec<usize>> {
        self.a_rows.iter().map(Row::blocks).collect()
    }

    pub fn aux_count(&self) -> usize {
        self.blocks.iter().map(|b| b.aux).sum()
    }

    /// `[A; N]` as a sparse matrix over the flat variables.
    pub fn constraint_matrix(&self) -> CsrMatrix<T> {
        let off = self.offsets();
        let rows = self
            .rows()
            .map(|r| {
                r.coefs
                    .iter()
                    .map(|c| (self.global_index(&off, c), c.value))
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(self.n_vars(), rows)
    }

    /// `[b; 0]`.
    pub fn rhs(&self) -> Vec<T> {
        self.rows().map(|r| r.rhs).collect()
    }

    /// Split objective as a flat vector.
    pub fn c_vector(&self) -> Vec<T> {
        let off = self.offsets();
        let mut c = vec![T::zero(); self.n_vars()];
        for e in &self.objective {
            let k = self.global_index(&off, e);
            c[k] = c[k] + e.value;
        }
        c
    }

    /// Product of the per-block cones; auxiliaries are not part of it.
    pub fn block_cone_segments(&self) -> Vec<Segment> {
        let mut segs = Vec::new();
        for b in &self.blocks {
            segs.push(Segment::Psd(b.order));
            if b.slacks > 0 {
                segs.push(Segment::NonNeg(b.slacks));
            }
        }
        segs
    }

    /// Cone coordinate of each flat variable (`None` for auxiliaries).
    pub fn cone_index(&self) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(self.n_vars());
        let mut k = 0;
        for b in &self.blocks {
            for _ in 0..tri_len(b.order) + b.slacks {
                out.push(Some(k));
                k += 1;
            }
            out.extend(std::iter::repeat(None).take(b.aux));
        }
        out
    }

    /// Per-bag matrices `X_j` read from a flat variable vector.
    pub fn extract_blocks(&self, x: &[T]) -> Vec<DenseSym<T>> {
        let off = self.offsets();
        self.blocks
            .iter()
            .zip(off)
            .map(|(b, o)| {
                crate::linalg::smat(&x[o..o + tri_len(b.order)]).expect("triangular segment")
            })
            .collect()
    }

    /// Multipliers of the original constraints from row multipliers of `[A; N]`.
    pub fn constraint_multipliers(&self, y: &[T]) -> Vec<T> {
        self.root_row.iter().map(|&r| y[r]).collect()
    }

    /// Primal conic program over the blocks, for the undualized baseline.
    pub fn primal_conic(&self, convention: NuConvention) -> Result<ConicProblem<T>, ConvertError> {
        if self.aux_count() > 0 {
            return Err(ConvertError::FreeVariables);
        }
        Ok(ConicProblem {
            m: self.constraint_matrix(),
            c: self.c_vector(),
            b: self.rhs(),
            cone: ConeSpec::new(self.block_cone_segments(), convention),
        })
    }

    /// Sum of all rows of constraint `i`, merged by slot; auxiliaries cancel.
    pub fn eliminate_aux(&self, i: usize) -> Row<T> {
        let mut coefs: Vec<Coef<T>> = Vec::new();
        let mut rhs = T::zero();
        let mut sense = Sense::Eq;
        for (r, row) in self.a_rows.iter().enumerate() {
            if self.row_constraint[r] != i {
                continue;
            }
            rhs = rhs + row.rhs;
            if row.sense != Sense::Eq {
                sense = row.sense;
            }
            coefs.extend_from_slice(&row.coefs);
        }
        coefs.sort_by_key(|c| (c.block, c.slot));
        let mut merged: Vec<Coef<T>> = Vec::with_capacity(coefs.len());
        for c in coefs {
            match merged.last_mut() {
                Some(last) if last.block == c.block && last.slot == c.slot => {
                    last.value = last.value + c.value
                }
                _ => merged.push(c),
            }
        }
        merged.retain(|c| !(matches!(c.slot, Slot::Aux(_)) && c.value == T::zero()));
        Row {
            coefs: merged,
            rhs,
            sense,
        }
    }

    fn depth(&self) -> Vec<usize> {
        let mut d = vec![0; self.blocks.len()];
        for &j in self.td.topological_order().iter().rev() {
            if let Some(p) = self.td.parent(j) {
                d[j] = d[p] + 1;
            }
        }
        d
    }
}

/// Union of tree paths between `touched` bags, with its topmost member.
fn steiner_subtree(
    td: &TreeDecomposition,
    depth: &[usize],
    touched: &[usize],
    mark: &mut [usize],
    stamp: usize,
) -> Option<AuxSubtree> {
    let lca = |mut a: usize, mut b: usize| -> Option<usize> {
        while depth[a] > depth[b] {
            a = td.parent(a)?;
        }
        while depth[b] > depth[a] {
            b = td.parent(b)?;
        }
        while a != b {
            a = td.parent(a)?;
            b = td.parent(b)?;
        }
        Some(a)
    };
    let mut top = touched[0];
    for &t in &touched[1..] {
        top = lca(top, t)?;
    }
    let mut members = vec![top];
    mark[top] = stamp;
    for &t in touched {
        let mut v = t;
        while mark[v] != stamp {
            mark[v] = stamp;
            members.push(v);
            v = td.parent(v)?;
        }
    }
    members.sort_unstable();
    Some(AuxSubtree { root: top, members })
}

/// Replaces each multi-block row by one row per bag of its connecting subtree,
/// chained by auxiliary scalars `u_k` (one per non-root member `k`, stored in block `k`).
pub fn separate_with_aux<T: Real>(
    mut p: ConvertedProblem<T>,
) -> Result<ConvertedProblem<T>, ConvertError> {
    let depth = p.depth();
    let mut mark = vec![usize::MAX; p.blocks.len()];
    let m = p.root_row.len();
    let old_rows = std::mem::take(&mut p.a_rows);
    let old_constraint = std::mem::take(&mut p.row_constraint);
    let mut root_row = vec![0; m];
    for (r, row) in old_rows.into_iter().enumerate() {
        let i = old_constraint[r];
        let touched = row.blocks();
        if touched.len() <= 1 {
            root_row[i] = p.a_rows.len();
            p.a_rows.push(row);
            p.row_constraint.push(i);
            continue;
        }
        let w = steiner_subtree(&p.td, &depth, &touched, &mut mark, r)
            .ok_or(ConvertError::DisconnectedSupport { constraint: i + 1 })?;
        // one auxiliary per non-root member
        let mut aux_slot = std::collections::HashMap::new();
        for &k in &w.members {
            if k != w.root {
                aux_slot.insert(k, p.blocks[k].aux);
                p.blocks[k].aux += 1;
                p.aux_plan.gamma[k] += 1;
            }
        }
        let mut order = w.members.clone();
        order.sort_by_key(|&j| p.rank[j]);
        for &j in &order {
            let mut coefs: Vec<Coef<T>> =
                row.coefs.iter().filter(|c| c.block == j).copied().collect();
            for &k in p.td.children(j) {
                if let Some(&s) = aux_slot.get(&k) {
                    coefs.push(Coef {
                        block: k,
                        slot: Slot::Aux(s),
                        value: T::one(),
                    });
                }
            }
            let is_root = j == w.root;
            if !is_root {
                coefs.push(Coef {
                    block: j,
                    slot: Slot::Aux(aux_slot[&j]),
                    value: -T::one(),
                });
            }
            if is_root {
                root_row[i] = p.a_rows.len();
            }
            p.a_rows.push(Row {
                coefs,
                rhs: if is_root { row.rhs } else { T::zero() },
                sense: if is_root { row.sense } else { Sense::Eq },
            });
            p.row_constraint.push(i);
        }
        p.aux_plan.subtrees[i] = Some(w);
    }
    p.root_row = root_row;
    Ok(p)
}

/// Splits a network-flow constraint at vertex `k`,
/// `A = α_k e_k e_kᵀ + ½ Σ_j α_j (e_j e_kᵀ + e_k e_jᵀ)`, over the bags containing `k`.
pub fn split_network_flow<T: Real>(
    a: &SparseSymmetric<T>,
    g: &Graph,
    td: &TreeDecomposition,
    up: &UniquePartition,
) -> Result<Split<T>, ConvertError> {
    let trip = a.triplets();
    if trip.is_empty() {
        return Ok(Split { blocks: Vec::new() });
    }
    let diag: Vec<usize> = trip.iter().filter(|t| t.0 == t.1).map(|t| t.0).collect();
    if diag.len() > 1 {
        return Err(ConvertError::NotNetworkFlow);
    }
    let k = match diag.first() {
        Some(&k) => k,
        None => {
            let (r, c, _) = trip[0];
            if trip.iter().all(|t| t.0 == r || t.1 == r) {
                r
            } else {
                c
            }
        }
    };
    if k >= g.vertex_count() {
        return Err(ConvertError::NotNetworkFlow);
    }
    for &(r, c, _) in trip {
        if r != c && ((r != k && c != k) || !g.has_edge(r, c)) {
            return Err(ConvertError::NotNetworkFlow);
        }
    }
    let alpha_k = a.get(k, k);
    let nbrs = g.neighbors(k);
    let mut acc: std::collections::BTreeMap<usize, DenseSym<T>> = Default::default();
    let mut add = |j: usize, u: usize, v: usize, val: T| -> Result<(), ConvertError> {
        let bag = td.bag(j);
        let (lu, lv) = match (bag.binary_search(&u), bag.binary_search(&v)) {
            (Ok(a), Ok(b)) => (a, b),
            _ => {
                return Err(SplitError::UncoverableEntry {
                    row: u.max(v) + 1,
                    col: u.min(v) + 1,
                }
                .into())
            }
        };
        acc.entry(j)
            .or_insert_with(|| DenseSym::zeros(bag.len()))
            .add_to(lu, lv, val);
        Ok(())
    };
    if nbrs.is_empty() {
        add(up.owner(k), k, k, alpha_k)?;
    } else {
        let share = alpha_k / T::lit(nbrs.len() as f64);
        for &j in nbrs {
            let (ok, oj) = (up.owner(k), up.owner(j));
            let bag = if up.rank[ok] <= up.rank[oj] { ok } else { oj };
            add(bag, k, k, share)?;
            let v = a.get(k, j);
            if v != T::zero() {
                add(bag, k, j, v)?;
            }
        }
    }
    let blocks = acc.into_iter().filter(|(_, m)| !m.is_zero()).collect();
    Ok(Split { blocks })
}

/// Dual-standard-form program whose data matrix is `[0, -[A; N]ᵀ, E]` over the
/// cone `SOC(f+1) × Π_j (PSD(|J_j|) × NonNeg)`, with `E` selecting cone coordinates.
#[derive(Clone, Debug)]
pub struct Dualized<T> {
    pub conic: ConicProblem<T>,
    /// number of rows of `[A; N]`
    pub f: usize,
    /// cone coordinate (after the leading SOC) of each converted variable
    pub cone_index: Vec<Option<usize>>,
}

pub fn dualize<T: Real>(p: &ConvertedProblem<T>, convention: NuConvention) -> Dualized<T> {
    let f = p.row_count();
    let nv = p.n_vars();
    let mut segs = vec![Segment::SecondOrder(f + 1)];
    segs.extend(p.block_cone_segments());
    let cone = ConeSpec::new(segs, convention);
    let bmat = p.constraint_matrix();
    let ci = p.cone_index();
    let mut rows: Vec<Vec<(usize, T)>> = ci
        .iter()
        .map(|c| c.map(|k| vec![(1 + f + k, T::one())]).unwrap_or_default())
        .collect();
    for r in 0..f {
        let (cols, vals) = bmat.row(r);
        for (&c, &v) in cols.iter().zip(vals) {
            rows[c].push((1 + r, -v));
        }
    }
    let m = CsrMatrix::from_rows(cone.len(), rows);
    let mut c = vec![T::zero(); cone.len()];
    for (k, v) in p.rhs().into_iter().enumerate() {
        c[1 + k] = v;
    }
    debug_assert_eq!(m.rows(), nv);
    Dualized {
        conic: ConicProblem {
            m,
            c,
            b: p.c_vector(),
            cone,
        },
        f,
        cone_index: ci,
    }
}

impl<T: Real> Dualized<T> {
    /// Converted-program solution `(x, y)` from an embedding solution
    /// `(x̂, ŷ, ŝ, τ)`: `y = -x̂_1/τ`; cone variables of `x` are read from the
    /// matching coordinates of `ŝ/τ` (equal to `-ŷ/τ` up to the residual term, and
    /// inside the cone), free auxiliaries from `-ŷ/τ`.
    pub fn recover(&self, xh: &[T], yh: &[T], sh: &[T], tau: T) -> (Vec<T>, Vec<T>) {
        let off = 1 + self.f;
        let x = yh
            .iter()
            .zip(&self.cone_index)
            .map(|(&v, ci)| match ci {
                Some(k) => sh[off + k] / tau,
                None => -v / tau,
            })
            .collect();
        let y = xh[1..=self.f].iter().map(|&v| -v / tau).collect();
        (x, y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::{decompose, supernode_merge, symbolic_factor};
    use crate::linalg::Mat;
    use rand::{Rng, SeedableRng};

    fn path_td(n: usize) -> TreeDecomposition {
        let perm: Vec<usize> = (0..n).collect();
        supernode_merge(&symbolic_factor(&Graph::path(n), &perm).unwrap())
    }

    fn diag_problem(n: usize) -> SdpProblem<f64> {
        let c = SparseSymmetric::from_triplets(n, (0..n).map(|i| (i, i, 1.0))).unwrap();
        let a = (0..n)
            .map(|i| SparseSymmetric::from_triplets(n, [(i, i, 1.0)]).unwrap())
            .collect();
        SdpProblem::minimize(c, a, vec![1.0; n]).unwrap()
    }

    #[test]
    fn path_overlap_rows() {
        let td = path_td(3);
        let p = convert(&diag_problem(3), &td).unwrap();
        assert_eq!(p.n_rows.len(), 1);
        let r = &p.n_rows[0];
        // X_1[2,2] (local (1,1)) against X_2[1,1] (local (0,0))
        assert_eq!(r.coefs[0].block, 0);
        assert_eq!(r.coefs[0].slot, Slot::Svec(2));
        assert_eq!(r.coefs[1].block, 1);
        assert_eq!(r.coefs[1].slot, Slot::Svec(0));
        assert_eq!(r.coefs[1].value, -1.0);
    }

    #[test]
    fn star_overlap_rows_share_hub() {
        let n = 6;
        let g = Graph::star(n - 1);
        let td = decompose(&g);
        let hub = n - 1;
        let p = convert(&diag_problem(n), &td).unwrap();
        assert_eq!(p.n_rows.len(), td.len() - 1);
        for (r, &ch) in p.n_rows.iter().zip(&p.n_row_child) {
            let bag = td.bag(ch);
            let lh = bag.binary_search(&hub).unwrap();
            assert_eq!(r.coefs[0].slot, Slot::Svec(packed_index(lh, lh)));
        }
    }

    #[test]
    fn single_bag_has_no_overlap() {
        let td = TreeDecomposition::new(vec![vec![0, 1, 2]], vec![0]).unwrap();
        let p = convert(&diag_problem(3), &td).unwrap();
        assert!(p.n_rows.is_empty());
        assert_eq!(p.n_vars(), 6);
    }

    #[test]
    fn invalid_split_rejected() {
        let td = path_td(3);
        let sdp = diag_problem(3);
        let mut s = split_problem(&sdp, &td).unwrap();
        s.a[1].blocks[0].1.set(0, 0, 3.0);
        assert_eq!(
            build_ctc(&sdp, &td, &s).unwrap_err(),
            ConvertError::InvalidSplit { constraint: 2 }
        );
    }

    #[test]
    fn slacks_attach_to_one_block() {
        let td = path_td(3);
        let c = SparseSymmetric::new(3);
        let a = vec![
            SparseSymmetric::from_triplets(3, [(1, 0, 1.0)]).unwrap(),
            SparseSymmetric::from_triplets(3, [(0, 0, 1.0)]).unwrap(),
        ];
        let sdp = SdpProblem::new(
            crate::problem::ObjectiveSense::Minimize,
            c,
            a,
            vec![Sense::Ge, Sense::Eq],
            vec![-0.5, 1.0],
        )
        .unwrap();
        let p = add_inequality_slacks(convert(&sdp, &td).unwrap());
        let r = &p.a_rows[0];
        assert_eq!(r.sense, Sense::Eq);
        let s = r.coefs.last().unwrap();
        assert_eq!((s.block, s.slot, s.value), (0, Slot::Slack(0), -1.0));
        assert_eq!(p.blocks[0].slacks, 1);
        assert_eq!(p.a_rows[1].coefs.len(), 1);
    }

    fn tridiagonal(n: usize) -> SparseSymmetric<f64> {
        let mut m = SparseSymmetric::new(n);
        for i in 0..n {
            m.insert(i, i, 2.0).unwrap();
            if i + 1 < n {
                m.insert(i + 1, i, -0.5).unwrap();
            }
        }
        m.canonicalize();
        m
    }

    #[test]
    fn aux_on_path_matches_chain() {
        let n = 6;
        let td = path_td(n);
        let sdp = SdpProblem::minimize(tridiagonal(n), vec![tridiagonal(n)], vec![1.0]).unwrap();
        let p = convert(&sdp, &td).unwrap();
        let original = p.a_rows[0].clone();
        let q = separate_with_aux(p).unwrap();
        let w = q.aux_plan.subtrees[0].as_ref().unwrap();
        assert_eq!(w.members.len(), td.len());
        assert_eq!(q.aux_count(), td.len() - 1);
        assert_eq!(q.a_rows.len(), td.len());
        for r in &q.a_rows {
            // each row touches a tree-adjacent pair at most
            let b = r.blocks();
            assert!(b.len() <= 2);
            if b.len() == 2 {
                assert!(td.parent(b[0]) == Some(b[1]) || td.parent(b[1]) == Some(b[0]));
            }
        }
        let e = q.eliminate_aux(0);
        assert_eq!(e.rhs, original.rhs);
        let mut want = original.coefs.clone();
        want.sort_by_key(|c| (c.block, c.slot));
        assert_eq!(e.coefs, want);
        assert_eq!(q.a_rows[q.root_row[0]].rhs, 1.0);
    }

    #[test]
    fn aux_subtree_rooted_at_top() {
        // path tree 0 -> 1 -> 2 (root 2), constraint touching all three
        let td = TreeDecomposition::new(vec![vec![0, 1], vec![1, 2], vec![2, 3]], vec![1, 2, 2]).unwrap();
        let a = SparseSymmetric::from_triplets(4, [(0, 0, 1.0), (2, 1, 1.0), (3, 3, 1.0)]).unwrap();
        let sdp = SdpProblem::minimize(SparseSymmetric::new(4), vec![a], vec![2.0]).unwrap();
        let q = separate_with_aux(convert(&sdp, &td).unwrap()).unwrap();
        let w = q.aux_plan.subtrees[0].as_ref().unwrap();
        assert_eq!((w.root, w.members.clone()), (2, vec![0, 1, 2]));
        assert_eq!(q.aux_plan.gamma, vec![1, 1, 0]);
        let rhs: Vec<f64> = q.a_rows.iter().map(|r| r.rhs).collect();
        assert_eq!(rhs, vec![0.0, 0.0, 2.0]);
    }

    #[test]
    fn steiner_fills_gaps() {
        // star of bags around root 0; constraint touches two leaves only
        let td = TreeDecomposition::new(
            vec![vec![0, 1, 2], vec![0, 3], vec![1, 4]],
            vec![0, 0, 0],
        )
        .unwrap();
        let a = SparseSymmetric::from_triplets(5, [(3, 3, 1.0), (4, 4, 1.0)]).unwrap();
        let sdp = SdpProblem::minimize(SparseSymmetric::new(5), vec![a], vec![1.0]).unwrap();
        let q = separate_with_aux(convert(&sdp, &td).unwrap()).unwrap();
        let w = q.aux_plan.subtrees[0].as_ref().unwrap();
        assert_eq!(w.members, vec![0, 1, 2]);
        assert_eq!(w.root, 0);
        assert_eq!(q.a_rows.len(), 3);
        assert_eq!(q.eliminate_aux(0).coefs.len(), 2);
    }

    #[test]
    fn single_block_constraint_unchanged() {
        let td = path_td(3);
        let p = convert(&diag_problem(3), &td).unwrap();
        let rows = p.a_rows.clone();
        let q = separate_with_aux(p).unwrap();
        assert_eq!(q.a_rows, rows);
        assert_eq!(q.aux_count(), 0);
    }

    fn random_sym(n: usize, rng: &mut impl Rng) -> Mat<f64> {
        let mut x = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        x.symmetrize();
        x
    }

    #[test]
    fn network_flow_split() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // interior vertex of a path
        let g = Graph::path(3);
        let td = path_td(3);
        let up = build_unique_partition(&td).unwrap();
        let a = SparseSymmetric::from_triplets(3, [(1, 1, 3.0), (1, 0, 0.5), (2, 1, -1.0)]).unwrap();
        let s = split_network_flow(&a, &g, &td, &up).unwrap();
        assert_eq!(s.cover(), vec![0, 1]);
        assert_eq!(s.blocks[0].1.get(1, 1), 1.5);
        assert_eq!(s.blocks[1].1.get(0, 0), 1.5);
        for _ in 0..10 {
            let x = random_sym(3, &mut rng);
            assert!((s.apply(&td, &x) - a.dot_dense(&x)).abs() < 1e-12);
        }
        // hub of a star
        let g = Graph::star(5);
        let td = decompose(&g);
        let up = build_unique_partition(&td).unwrap();
        let mut a = SparseSymmetric::new(6);
        a.insert(5, 5, 2.0).unwrap();
        for j in 0..5 {
            a.insert(5, j, 0.1 * (j + 1) as f64).unwrap();
        }
        a.canonicalize();
        let s = split_network_flow(&a, &g, &td, &up).unwrap();
        assert_eq!(s.blocks.len(), td.len());
        for _ in 0..10 {
            let x = random_sym(6, &mut rng);
            assert!((s.apply(&td, &x) - a.dot_dense(&x)).abs() < 1e-12);
        }
        // isolated vertex
        let g = Graph::new(2);
        let td = decompose(&g);
        let up = build_unique_partition(&td).unwrap();
        let a = SparseSymmetric::from_triplets(2, [(0, 0, 4.0)]).unwrap();
        let s = split_network_flow(&a, &g, &td, &up).unwrap();
        assert_eq!(s.blocks.len(), 1);
        // not a flow pattern
        let g = Graph::path(3);
        let td = path_td(3);
        let up = build_unique_partition(&td).unwrap();
        let a = SparseSymmetric::from_triplets(3, [(0, 0, 1.0), (2, 2, 1.0)]).unwrap();
        assert_eq!(
            split_network_flow(&a, &g, &td, &up).unwrap_err(),
            ConvertError::NotNetworkFlow
        );
    }

    #[test]
    fn dualized_layout() {
        let td = path_td(3);
        let p = convert(&diag_problem(3), &td).unwrap();
        let d = dualize(&p, NuConvention::UnitSoc);
        let f = p.row_count();
        assert_eq!(d.f, 4);
        assert_eq!(d.conic.cone.segments()[0], Segment::SecondOrder(f + 1));
        assert_eq!(d.conic.m.rows(), p.n_vars());
        assert_eq!(d.conic.m.cols(), 1 + f + p.n_vars());
        // zero constraints
        let sdp = SdpProblem::minimize(SparseSymmetric::<f64>::new(1), vec![], vec![]).unwrap();
        let td = TreeDecomposition::new(vec![vec![0]], vec![0]).unwrap();
        let d = dualize(&convert(&sdp, &td).unwrap(), NuConvention::UnitSoc);
        assert_eq!(d.conic.cone.segments()[0], Segment::SecondOrder(1));
        assert_eq!(d.conic.m.to_dense().row(0), &[0.0, 1.0]);
    }

    #[test]
    fn overlap_rows_full_rank_and_tree_pattern() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(3..9);
            let mut g = Graph::new(n);
            for _ in 0..n + 3 {
                let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
                if u != v && !g.has_edge(u, v) {
                    g.add_edge(u, v, 1.0).unwrap();
                }
            }
            let td = decompose(&g);
            let p = convert(&diag_problem(n), &td).unwrap();
            let nn: Vec<Vec<(usize, f64)>> = {
                let off = p.offsets();
                p.n_rows
                    .iter()
                    .map(|r| r.coefs.iter().map(|c| (p.global_index(&off, c), c.value)).collect())
                    .collect()
            };
            let nm = CsrMatrix::from_rows(p.n_vars(), nn).to_dense();
            let gram = nm.matmul_t(&nm);
            if gram.rows() > 0 {
                assert!(crate::linalg::SymEigen::new(&gram).min_value() > 1e-9);
            }
            // NᵀN couples only tree-adjacent blocks
            for r in &p.n_rows {
                let b = r.blocks();
                assert_eq!(b.len(), 2);
                assert!(td.parent(b[0]) == Some(b[1]) || td.parent(b[1]) == Some(b[0]));
            }
        }
    }
}
