//! Products of second-order, semidefinite and nonnegative cones, with the
//! barrier quantities the interior-point method needs.

use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, congruence_apply, smat, svec, tri_len, DenseSym, Mat, Svd, SymEigen};
use crate::scalar::{dot, norm2, Real};

/// Barrier degree given to the second-order cone segment.
///
/// `UnitSoc` counts it as 1 with identity element `(1, 0, …)`, so the total
/// barrier order is `1 + Σ|J_j|`; `Standard` uses degree 2 with identity
/// `(√2, 0, …)`. Both make the all-ones starting point exactly centered.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum NuConvention {
    #[default]
    UnitSoc,
    Standard,
}

impl NuConvention {
    pub fn soc_degree(self) -> f64 {
        match self {
            NuConvention::UnitSoc => 1.0,
            NuConvention::Standard => 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Segment {
    SecondOrder(usize),
    Psd(usize),
    NonNeg(usize),
}

impl Segment {
    pub fn len(&self) -> usize {
        match *self {
            Segment::SecondOrder(d) => d,
            Segment::Psd(k) => tri_len(k),
            Segment::NonNeg(c) => c,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConeError {
    #[error("point is not in the interior of cone segment {0}")]
    NotInterior(usize),
}

/// Ordered product of cone segments over one flat vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeSpec {
    segments: Vec<Segment>,
    offsets: Vec<usize>,
    len: usize,
    convention: NuConvention,
}

impl ConeSpec {
    pub fn new(segments: Vec<Segment>, convention: NuConvention) -> Self {
        let mut offsets = Vec::with_capacity(segments.len());
        let mut len = 0;
        for s in &segments {
            offsets.push(len);
            len += s.len();
        }
        Self {
            segments,
            offsets,
            len,
            convention,
        }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    pub fn range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k] + self.segments[k].len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn convention(&self) -> NuConvention {
        self.convention
    }

    /// Barrier order `ν`.
    pub fn nu(&self) -> f64 {
        self.segments
            .iter()
            .map(|s| match *s {
                Segment::SecondOrder(_) => self.convention.soc_degree(),
                Segment::Psd(k) => k as f64,
                Segment::NonNeg(c) => c as f64,
            })
            .sum()
    }

    /// Identity element `1_C`.
    pub fn identity<T: Real>(&self) -> Vec<T> {
        let mut e = vec![T::zero(); self.len];
        for (k, s) in self.segments.iter().enumerate() {
            let o = self.offsets[k];
            match *s {
                Segment::SecondOrder(d) => {
                    if d > 0 {
                        e[o] = T::lit(self.convention.soc_degree().sqrt());
                    }
                }
                Segment::Psd(n) => {
                    for i in 0..n {
                        e[o + tri_len(i + 1) - 1] = T::one();
                    }
                }
                Segment::NonNeg(c) => e[o..o + c].iter_mut().for_each(|v| *v = T::one()),
            }
        }
        e
    }

    pub fn is_interior<T: Real>(&self, x: &[T]) -> bool {
        self.check_interior(x).is_ok()
    }

    pub fn check_interior<T: Real>(&self, x: &[T]) -> Result<(), ConeError> {
        for (k, s) in self.segments.iter().enumerate() {
            let v = &x[self.range(k)];
            let ok = match *s {
                Segment::SecondOrder(d) => d == 0 || soc_interior(v),
                Segment::Psd(_) => {
                    let m = smat(v).expect("segment length is triangular").to_mat();
                    m.is_finite() && cholesky(&m, T::zero()).is_some()
                }
                Segment::NonNeg(_) => v.iter().all(|&t| t > T::zero()),
            };
            if !ok {
                return Err(ConeError::NotInterior(k));
            }
        }
        Ok(())
    }

    /// `∇F(x)`.
    pub fn barrier_grad<T: Real>(&self, x: &[T]) -> Result<Vec<T>, ConeError> {
        let mut g = vec![T::zero(); self.len];
        let nu_s = T::lit(self.convention.soc_degree());
        for (k, s) in self.segments.iter().enumerate() {
            let r = self.range(k);
            let v = &x[r.clone()];
            let out = &mut g[r];
            match *s {
                Segment::SecondOrder(d) => {
                    if d == 0 {
                        continue;
                    }
                    let det = soc_det(v);
                    if !(det > T::zero() && v[0] > T::zero()) {
                        return Err(ConeError::NotInterior(k));
                    }
                    out[0] = -nu_s * v[0] / det;
                    for i in 1..d {
                        out[i] = nu_s * v[i] / det;
                    }
                }
                Segment::Psd(_) => {
                    let m = smat(v).expect("triangular").to_mat();
                    let l = cholesky(&m, T::zero()).ok_or(ConeError::NotInterior(k))?;
                    let inv = crate::linalg::cholesky_inverse(&l);
                    let sv = svec(&DenseSym::from_mat(&inv));
                    for (o, val) in out.iter_mut().zip(sv) {
                        *o = -val;
                    }
                }
                Segment::NonNeg(_) => {
                    for (o, &t) in out.iter_mut().zip(v) {
                        if !(t > T::zero()) {
                            return Err(ConeError::NotInterior(k));
                        }
                        *o = -T::one() / t;
                    }
                }
            }
        }
        Ok(g)
    }

    /// Nesterov–Todd scaling point `w` with `∇²F(w) x = s`.
    pub fn scaling<T: Real>(&self, x: &[T], s: &[T]) -> Result<Scaling<T>, ConeError> {
        let nu_s = T::lit(self.convention.soc_degree());
        let mut segs = Vec::with_capacity(self.segments.len());
        for (k, seg) in self.segments.iter().enumerate() {
            let r = self.range(k);
            let (xv, sv) = (&x[r.clone()], &s[r]);
            segs.push(match *seg {
                Segment::SecondOrder(d) => {
                    if d == 0 {
                        SegmentScaling::SecondOrder {
                            w: Vec::new(),
                            det: T::one(),
                            nu: nu_s,
                        }
                    } else {
                        if !soc_interior(xv) || !soc_interior(sv) {
                            return Err(ConeError::NotInterior(k));
                        }
                        let sp: Vec<T> = sv.iter().map(|&t| t / nu_s).collect();
                        let w = soc_nt_point(xv, &sp);
                        let det = soc_det(&w);
                        SegmentScaling::SecondOrder { w, det, nu: nu_s }
                    }
                }
                Segment::Psd(_) => {
                    let xm = smat(xv).expect("triangular").to_mat();
                    let sm = smat(sv).expect("triangular").to_mat();
                    let ps = psd_nt_point(&xm, &sm).ok_or(ConeError::NotInterior(k))?;
                    SegmentScaling::Psd {
                        w: ps.w,
                        w_inv: ps.w_inv,
                        g: ps.g,
                        lambda: ps.lambda,
                    }
                }
                Segment::NonNeg(_) => {
                    let mut w2 = Vec::with_capacity(xv.len());
                    for (&a, &b) in xv.iter().zip(sv) {
                        if !(a > T::zero() && b > T::zero()) {
                            return Err(ConeError::NotInterior(k));
                        }
                        w2.push(a / b);
                    }
                    SegmentScaling::NonNeg { w2 }
                }
            });
        }
        Ok(Scaling { segments: segs })
    }

    /// Largest `α` (capped at `cap`) with `x + α Δx` in the closed cone.
    pub fn max_step<T: Real>(&self, x: &[T], dx: &[T], cap: T) -> T {
        let mut alpha = cap;
        for (k, seg) in self.segments.iter().enumerate() {
            let r = self.range(k);
            let (xv, dv) = (&x[r.clone()], &dx[r]);
            let a = match *seg {
                Segment::SecondOrder(d) => {
                    if d == 0 {
                        cap
                    } else {
                        soc_max_step(xv, dv, cap)
                    }
                }
                Segment::Psd(_) => {
                    let xm = smat(xv).expect("triangular").to_mat();
                    let dm = smat(dv).expect("triangular").to_mat();
                    psd_max_step(&xm, &dm, cap)
                }
                Segment::NonNeg(_) => xv.iter().zip(dv).fold(cap, |acc, (&a, &b)| {
                    if b < T::zero() {
                        acc.min(-a / b)
                    } else {
                        acc
                    }
                }),
            };
            alpha = alpha.min(a);
        }
        alpha
    }
}

/// Per-segment scaling data.
#[derive(Clone, Debug)]
pub enum SegmentScaling<T> {
    /// `D⁻¹ = (2 w wᵀ − det(w) J) / ν_s`.
    SecondOrder { w: Vec<T>, det: T, nu: T },
    /// `D⁻¹ v = svec(W smat(v) W)`; `W = G Gᵀ` and `Gᵀ S G = diag(λ)`.
    Psd {
        w: Mat<T>,
        w_inv: Mat<T>,
        g: Mat<T>,
        lambda: Vec<T>,
    },
    /// `D⁻¹ = diag(w²)`.
    NonNeg { w2: Vec<T> },
}

/// Scaling point `w` of a full cone, acting as `D = ∇²F(w)`.
#[derive(Clone, Debug)]
pub struct Scaling<T> {
    pub segments: Vec<SegmentScaling<T>>,
}

impl<T: Real> Scaling<T> {
    /// `D⁻¹ v`.
    pub fn apply_dinv(&self, cone: &ConeSpec, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); v.len()];
        for (k, seg) in self.segments.iter().enumerate() {
            let r = cone.range(k);
            apply_segment(seg, &v[r.clone()], &mut out[r], true);
        }
        out
    }

    /// `D v`.
    pub fn apply_d(&self, cone: &ConeSpec, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); v.len()];
        for (k, seg) in self.segments.iter().enumerate() {
            let r = cone.range(k);
            apply_segment(seg, &v[r.clone()], &mut out[r], false);
        }
        out
    }

    /// `D⁻¹(−s − μ ∇F(x))` evaluated as `−x + μ ν_k s⁻¹` per segment (the PSD
    /// part as `G(μΛ⁻¹ − Λ)Gᵀ`), avoiding the cancellation in `−s − μ∇F(x)`.
    pub fn dinv_centering(&self, cone: &ConeSpec, x: &[T], s: &[T], mu: T) -> Vec<T> {
        self.dinv_corrected(cone, x, s, mu, None)
    }

    /// As [`Self::dinv_centering`], with the second-order term of an earlier
    /// direction `(dx, ds)` subtracted from the complementarity target. The
    /// second-order segment takes no correction.
    pub fn dinv_corrected(
        &self,
        cone: &ConeSpec,
        x: &[T],
        s: &[T],
        mu: T,
        corr: Option<(&[T], &[T])>,
    ) -> Vec<T> {
        let mut out = vec![T::zero(); x.len()];
        for (k, seg) in self.segments.iter().enumerate() {
            let r = cone.range(k);
            let cv = corr.map(|(a, b)| (&a[r.clone()], &b[r.clone()]));
            let (xv, sv, o) = (&x[r.clone()], &s[r.clone()], &mut out[r]);
            match seg {
                SegmentScaling::SecondOrder { w, nu, .. } => {
                    if w.is_empty() {
                        continue;
                    }
                    let det = soc_det(sv);
                    let c = mu * *nu / det;
                    o[0] = -xv[0] + c * sv[0];
                    for i in 1..o.len() {
                        o[i] = -xv[i] - c * sv[i];
                    }
                    if let Some((dx, ds)) = cv {
                        // −P(w^½) L(λ)⁻¹ (P(w^-½) dx ∘ P(w^½) ds/ν), λ = P(w^½) s/ν
                        let wh = soc_spectral(w, |t| t.sqrt());
                        let whi = soc_spectral(w, |t| T::one() / t.sqrt());
                        let (dh, dhi) = (soc_det(&wh), soc_det(&whi));
                        let sn: Vec<T> = sv.iter().map(|&t| t / *nu).collect();
                        let dsn: Vec<T> = ds.iter().map(|&t| t / *nu).collect();
                        let lam = quad_rep(&wh, dh, &sn);
                        let a = quad_rep(&whi, dhi, dx);
                        let b = quad_rep(&wh, dh, &dsn);
                        let ab = jordan_product(&a, &b);
                        let r = arrow_solve(&lam, &ab);
                        let t = quad_rep(&wh, dh, &r);
                        for (oi, ti) in o.iter_mut().zip(t) {
                            *oi = *oi - ti;
                        }
                    }
                }
                SegmentScaling::Psd { g, lambda, .. } => {
                    let n = lambda.len();
                    let mut rm = Mat::zeros(n, n);
                    for i in 0..n {
                        rm[(i, i)] = mu / lambda[i] - lambda[i];
                    }
                    if let Some((dx, ds)) = cv {
                        // scaled directions G⁻¹ dX G⁻ᵀ and Gᵀ dS G, with G⁻¹ = Λ⁻¹ Gᵀ S
                        let sm = smat(sv).expect("triangular").to_mat();
                        let gts = g.transpose().matmul(&sm);
                        let dxm = smat(dx).expect("triangular").to_mat();
                        let mut dxs = gts.matmul(&dxm).matmul_t(&gts);
                        let dsm = smat(ds).expect("triangular").to_mat();
                        let dss = g.transpose().matmul(&dsm).matmul(g);
                        for i in 0..n {
                            for j in 0..n {
                                dxs[(i, j)] = dxs[(i, j)] / (lambda[i] * lambda[j]);
                            }
                        }
                        let ab = dxs.matmul(&dss);
                        for i in 0..n {
                            for j in 0..n {
                                let sym = T::lit(0.5) * (ab[(i, j)] + ab[(j, i)]);
                                rm[(i, j)] = rm[(i, j)] - T::lit(2.0) * sym / (lambda[i] + lambda[j]);
                            }
                        }
                    }
                    let mut m = g.matmul(&rm).matmul_t(g);
                    m.symmetrize();
                    o.copy_from_slice(&svec(&DenseSym::from_mat(&m)));
                }
                SegmentScaling::NonNeg { .. } => {
                    for (i, (oi, (&a, &b))) in o.iter_mut().zip(xv.iter().zip(sv)).enumerate() {
                        *oi = -a + mu / b;
                        if let Some((dx, ds)) = cv {
                            *oi = *oi - dx[i] * ds[i] / b;
                        }
                    }
                }
            }
        }
        out
    }

    /// `D⁻¹` restricted to segment `k`, applied to a local vector.
    pub fn apply_dinv_segment(&self, k: usize, v: &[T], out: &mut [T]) {
        apply_segment(&self.segments[k], v, out, true);
    }
}

fn apply_segment<T: Real>(seg: &SegmentScaling<T>, v: &[T], out: &mut [T], inverse: bool) {
    match seg {
        SegmentScaling::SecondOrder { w, det, nu } => {
            if w.is_empty() {
                return;
            }
            if inverse {
                // P(w) v / ν
                let p = quad_rep(w, *det, v);
                for (o, t) in out.iter_mut().zip(p) {
                    *o = t / *nu;
                }
            } else {
                // ν P(w⁻¹) v with w⁻¹ = J w / det(w)
                let mut winv: Vec<T> = w.iter().map(|&t| -t / *det).collect();
                winv[0] = w[0] / *det;
                let p = quad_rep(&winv, T::one() / *det, v);
                for (o, t) in out.iter_mut().zip(p) {
                    *o = t * *nu;
                }
            }
        }
        SegmentScaling::Psd { w, w_inv, .. } => {
            congruence_apply(if inverse { w } else { w_inv }, v, out);
        }
        SegmentScaling::NonNeg { w2 } => {
            for ((o, &t), &q) in out.iter_mut().zip(v).zip(w2) {
                *o = if inverse { t * q } else { t / q };
            }
        }
    }
}

/// `x0² − ‖x1‖²`, factored to limit cancellation.
pub(crate) fn soc_det<T: Real>(x: &[T]) -> T {
    let n = norm2(&x[1..]);
    (x[0] - n) * (x[0] + n)
}

fn soc_interior<T: Real>(x: &[T]) -> bool {
    x[0] > T::zero() && x[0] > norm2(&x[1..]) && x.iter().all(|v| v.is_finite())
}

/// Quadratic representation `P(z) v = 2 (zᵀv) z − det(z) J v`.
fn quad_rep<T: Real>(z: &[T], det: T, v: &[T]) -> Vec<T> {
    let two_zv = T::lit(2.0) * dot(z, v);
    let mut out: Vec<T> = z.iter().zip(v).map(|(&zi, &vi)| two_zv * zi + det * vi).collect();
    out[0] = two_zv * z[0] - det * v[0];
    out
}

fn jordan_product<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out: Vec<T> = a.iter().zip(b).map(|(&ai, &bi)| a[0] * bi + b[0] * ai).collect();
    out[0] = dot(a, b);
    out
}

/// Solves `λ ∘ r = v`.
fn arrow_solve<T: Real>(lam: &[T], v: &[T]) -> Vec<T> {
    let r0 = (lam[0] * v[0] - dot(&lam[1..], &v[1..])) / soc_det(lam);
    let mut r: Vec<T> = lam.iter().zip(v).map(|(&l, &vi)| (vi - r0 * l) / lam[0]).collect();
    r[0] = r0;
    r
}

/// Spectral function `f` of a second-order cone element.
fn soc_spectral<T: Real>(z: &[T], f: impl Fn(T) -> T) -> Vec<T> {
    let n = norm2(&z[1..]);
    let (l1, l2) = (z[0] + n, z[0] - n);
    let (f1, f2) = (f(l1), f(l2));
    let half = T::lit(0.5);
    let mut out = vec![T::zero(); z.len()];
    out[0] = half * (f1 + f2);
    if n > T::zero() {
        let c = half * (f1 - f2) / n;
        for i in 1..z.len() {
            out[i] = c * z[i];
        }
    }
    out
}

/// `w = P(x^{1/2}) (P(x^{1/2}) s)^{-1/2}`, the point with `P(w) s = x`.
fn soc_nt_point<T: Real>(x: &[T], s: &[T]) -> Vec<T> {
    let xh = soc_spectral(x, |t| t.sqrt());
    let dh = soc_det(&xh);
    let y = quad_rep(&xh, dh, s);
    let yh = soc_spectral(&y, |t| T::one() / t.sqrt());
    quad_rep(&xh, dh, &yh)
}

fn soc_max_step<T: Real>(x: &[T], d: &[T], cap: T) -> T {
    // det(x + a d) = A a² + 2 B a + C with x0 + a d0 > 0
    let a = d[0] * d[0] - dot(&d[1..], &d[1..]);
    let b = x[0] * d[0] - dot(&x[1..], &d[1..]);
    let c = soc_det(x);
    let mut alpha = cap;
    if d[0] < T::zero() {
        alpha = alpha.min(-x[0] / d[0]);
    }
    let root = if a.abs() <= T::epsilon() * (b.abs() + c.abs()) {
        if b < T::zero() {
            Some(-c / (T::lit(2.0) * b))
        } else {
            None
        }
    } else {
        let disc = b * b - a * c;
        if disc < T::zero() {
            None
        } else {
            let sq = disc.sqrt();
            // smallest positive root, computed stably
            let q = -(b + b.signum() * sq);
            let r1 = q / a;
            let r2 = c / q;
            [r1, r2]
                .into_iter()
                .filter(|r| *r > T::zero() && r.is_finite())
                .fold(None, |acc: Option<T>, r| Some(acc.map_or(r, |m| m.min(r))))
        }
    };
    if let Some(r) = root {
        alpha = alpha.min(r);
    }
    alpha
}

fn psd_max_step<T: Real>(x: &Mat<T>, d: &Mat<T>, cap: T) -> T {
    let Some(l) = cholesky(x, T::zero()) else {
        return T::zero();
    };
    // L⁻¹ D L⁻ᵀ
    let n = x.rows();
    let mut tmp = d.clone();
    for j in 0..n {
        let mut col: Vec<T> = (0..n).map(|i| tmp[(i, j)]).collect();
        crate::linalg::solve_lower_in_place(&l, &mut col);
        for i in 0..n {
            tmp[(i, j)] = col[i];
        }
    }
    for i in 0..n {
        let mut row = tmp.row(i).to_vec();
        crate::linalg::solve_lower_in_place(&l, &mut row);
        tmp.row_mut(i).copy_from_slice(&row);
    }
    let lmin = SymEigen::new(&tmp).min_value();
    if lmin < T::zero() {
        cap.min(-T::one() / lmin)
    } else {
        cap
    }
}

/// NT point from Cholesky factors `X = L Lᵀ`, `S = R Rᵀ` and the SVD
/// `Rᵀ L = U Σ Vᵀ`: `G = L V Σ^{-1/2}`, `W = G Gᵀ`, `W⁻¹ = (R U Σ^{-1/2})(R U Σ^{-1/2})ᵀ`,
/// so that `W S W = X` and `Gᵀ S G = G⁻¹ X G⁻ᵀ = Σ`.
fn psd_nt_point<T: Real>(x: &Mat<T>, s: &Mat<T>) -> Option<PsdScaling<T>> {
    if !x.is_finite() || !s.is_finite() {
        return None;
    }
    let l = cholesky(x, T::zero())?;
    let r = cholesky(s, T::zero())?;
    let n = x.rows();
    let svd = Svd::new(&r.transpose().matmul(&l));
    if !svd.sigma.iter().all(|&v| v > T::zero()) {
        return None;
    }
    let isq: Vec<T> = svd.sigma.iter().map(|&v| T::one() / v.sqrt()).collect();
    let lv = l.matmul(&svd.v);
    let ru = r.matmul(&svd.u);
    let g = Mat::from_fn(n, n, |i, j| lv[(i, j)] * isq[j]);
    let h = Mat::from_fn(n, n, |i, j| ru[(i, j)] * isq[j]);
    let mut w = g.matmul_t(&g);
    let mut w_inv = h.matmul_t(&h);
    w.symmetrize();
    w_inv.symmetrize();
    Some(PsdScaling {
        w,
        w_inv,
        g,
        lambda: svd.sigma,
    })
}

struct PsdScaling<T> {
    w: Mat<T>,
    w_inv: Mat<T>,
    g: Mat<T>,
    lambda: Vec<T>,
}

/// `min cᵀx  s.t.  M x = b,  x ∈ K` with `M` sparse.
#[derive(Clone, Debug)]
pub struct ConicProblem<T> {
    pub m: crate::linalg::CsrMatrix<T>,
    pub c: Vec<T>,
    pub b: Vec<T>,
    pub cone: ConeSpec,
}

impl<T: Real> ConicProblem<T> {
    /// Size of the data, used to scale feasibility tolerances.
    pub fn data_norm(&self) -> T {
        let mut s = T::zero();
        for i in 0..self.m.rows() {
            for v in self.m.row(i).1 {
                s = s + *v * *v;
            }
        }
        (s + dot(&self.c, &self.c) + dot(&self.b, &self.b)).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hess_apply(cone: &ConeSpec, sc: &Scaling<f64>, x: &[f64]) -> Vec<f64> {
        sc.apply_d(cone, x)
    }

    #[test]
    fn identity_elements() {
        let c = ConeSpec::new(
            vec![Segment::SecondOrder(3), Segment::Psd(2), Segment::NonNeg(2)],
            NuConvention::UnitSoc,
        );
        assert_eq!(c.identity::<f64>(), vec![1.0, 0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(c.nu(), 1.0 + 2.0 + 2.0);
        let c = ConeSpec::new(vec![Segment::SecondOrder(2)], NuConvention::Standard);
        assert!((c.identity::<f64>()[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.nu(), 2.0);
    }

    #[test]
    fn identity_is_centered() {
        for conv in [NuConvention::UnitSoc, NuConvention::Standard] {
            let c = ConeSpec::new(
                vec![Segment::SecondOrder(4), Segment::Psd(3), Segment::NonNeg(1)],
                conv,
            );
            let e = c.identity::<f64>();
            let g = c.barrier_grad(&e).unwrap();
            // s = −∇F(x) at x = s = 1_C, and xᵀ∇F(x) = −ν
            for (a, b) in e.iter().zip(&g) {
                assert!((a + b).abs() < 1e-14);
            }
            assert!((dot(&e, &g) + c.nu()).abs() < 1e-13);
        }
    }

    #[test]
    fn psd_nt_point_of_scaled_identity() {
        let c = ConeSpec::new(vec![Segment::Psd(3)], NuConvention::UnitSoc);
        let x = svec(&DenseSym::<f64>::identity(3)).iter().map(|v| 4.0 * v).collect::<Vec<_>>();
        let s = svec(&DenseSym::<f64>::identity(3));
        let sc = c.scaling(&x, &s).unwrap();
        let SegmentScaling::Psd { w, .. } = &sc.segments[0] else {
            panic!()
        };
        assert!(w.sub(&Mat::identity(3).scaled(2.0)).max_abs() < 1e-14);
    }

    #[test]
    fn soc_nt_point_matches_hessian() {
        for conv in [NuConvention::UnitSoc, NuConvention::Standard] {
            let c = ConeSpec::new(vec![Segment::SecondOrder(2)], conv);
            let x = [2.0, 0.0];
            let s = [1.0, 0.0];
            let sc = c.scaling(&x, &s).unwrap();
            let hx = hess_apply(&c, &sc, &x);
            assert!((hx[0] - 1.0).abs() < 1e-14 && hx[1].abs() < 1e-14);
            let x = [3.0, 1.0, -0.5];
            let s = [1.2, -0.7, 0.3];
            let c = ConeSpec::new(vec![Segment::SecondOrder(3)], conv);
            let sc = c.scaling(&x, &s).unwrap();
            let hx = hess_apply(&c, &sc, &x);
            for (a, b) in hx.iter().zip(&s) {
                assert!((a - b).abs() < 1e-13, "{hx:?}");
            }
            let back = sc.apply_dinv(&c, &s);
            for (a, b) in back.iter().zip(&x) {
                assert!((a - b).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn centered_pair_scales_to_itself() {
        // x = s = 1_C is on the central path with μ = 1, so w = x
        let c = ConeSpec::new(
            vec![Segment::SecondOrder(3), Segment::Psd(2), Segment::NonNeg(2)],
            NuConvention::UnitSoc,
        );
        let e = c.identity::<f64>();
        let sc = c.scaling(&e, &e).unwrap();
        let SegmentScaling::SecondOrder { w, .. } = &sc.segments[0] else {
            panic!()
        };
        assert!((w[0] - 1.0).abs() < 1e-15 && w[1] == 0.0);
        let got = sc.apply_d(&c, &e);
        for (a, b) in got.iter().zip(&e) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn mixed_scaling_random() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c = ConeSpec::new(
            vec![Segment::SecondOrder(4), Segment::Psd(3), Segment::NonNeg(2), Segment::Psd(1)],
            NuConvention::UnitSoc,
        );
        for _ in 0..20 {
            let mut pt = || {
                let mut v: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(-0.3..0.3)).collect();
                let e = c.identity::<f64>();
                for (a, b) in v.iter_mut().zip(e) {
                    *a += b;
                }
                v
            };
            let x = pt();
            let s = pt();
            assert!(c.is_interior(&x) && c.is_interior(&s));
            let sc = c.scaling(&x, &s).unwrap();
            let hx = sc.apply_d(&c, &x);
            for (a, b) in hx.iter().zip(&s) {
                assert!((a - b).abs() < 1e-12 * (1.0 + b.abs()));
            }
            let v: Vec<f64> = (0..c.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let round = sc.apply_d(&c, &sc.apply_dinv(&c, &v));
            for (a, b) in round.iter().zip(&v) {
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn step_to_boundary() {
        let c = ConeSpec::new(
            vec![Segment::SecondOrder(2), Segment::Psd(2), Segment::NonNeg(1)],
            NuConvention::UnitSoc,
        );
        let x = [1.0f64, 0.0, 1.0, 0.0, 1.0, 2.0];
        // SOC hits the boundary at a = 1/2: (1 - a/2... ) use direction (0, 2)
        let d = [0.0, 2.0, 0.0, 0.0, 0.0, 0.0];
        assert!((c.max_step(&x, &d, 10.0) - 0.5).abs() < 1e-14);
        let d = [0.0, 0.0, -4.0, 0.0, 0.0, 0.0];
        assert!((c.max_step(&x, &d, 10.0) - 0.25).abs() < 1e-14);
        let d = [0.0, 0.0, 0.0, 0.0, 0.0, -1.0];
        assert!((c.max_step(&x, &d, 10.0) - 2.0).abs() < 1e-14);
        let d = [1.0, 0.0, 1.0, 0.0, 1.0, 1.0];
        assert_eq!(c.max_step(&x, &d, 10.0), 10.0);
    }

    #[test]
    fn not_interior_detected() {
        let c = ConeSpec::new(vec![Segment::Psd(2)], NuConvention::UnitSoc);
        assert!(matches!(
            c.scaling(&[1.0, 0.0, -1.0], &[1.0, 0.0, 1.0]),
            Err(ConeError::NotInterior(0))
        ));
        assert!(c.barrier_grad(&[0.0, 0.0, 1.0]).is_err());
    }
}
