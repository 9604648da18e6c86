//! Dense reference solver: the original SDP in one PSD block, no conversion.

use crate::cone::{ConeSpec, ConicProblem, Segment};
use crate::ipm::{self, IpmError, SolverOptions};
use crate::linalg::{smat, svec, tri_len, CsrMatrix, DenseSym, Mat, SymEigen};
use crate::normal::DenseNormal;
use crate::problem::{SdpProblem, Sense};
use crate::recovery::{dimacs_metrics, Metrics};
use crate::scalar::{dot, Real};

#[derive(Clone, Debug)]
pub struct ReferenceSolution<T> {
    pub x: DenseSym<T>,
    /// multipliers of the minimization form
    pub y: Vec<T>,
    pub s: DenseSym<T>,
    /// in the problem's own objective sense
    pub objective: T,
    pub metrics: Metrics,
}

/// `min svec(C)ᵀ svec(X)` over `svec(X)` and one nonnegative slack per inequality.
pub fn reference_conic<T: Real>(sdp: &SdpProblem<T>, opts: &SolverOptions) -> ConicProblem<T> {
    let n = sdp.n();
    let t = tri_len(n);
    let op = sdp.svec_operator();
    let mut slack = t;
    let rows: Vec<Vec<(usize, T)>> = (0..sdp.m())
        .map(|i| {
            let (cols, vals) = op.row(i);
            let mut row: Vec<(usize, T)> = cols.iter().copied().zip(vals.iter().copied()).collect();
            match sdp.senses()[i] {
                Sense::Eq => {}
                s => {
                    row.push((slack, if s == Sense::Ge { -T::one() } else { T::one() }));
                    slack += 1;
                }
            }
            row
        })
        .collect();
    let cmat = sdp.c_min().to_dense();
    let mut c = svec(&DenseSym::from_mat(&cmat));
    c.resize(slack, T::zero());
    let mut segs = vec![Segment::Psd(n)];
    if slack > t {
        segs.push(Segment::NonNeg(slack - t));
    }
    ConicProblem {
        m: CsrMatrix::from_rows(slack, rows),
        c,
        b: sdp.b().to_vec(),
        cone: ConeSpec::new(segs, opts.nu),
    }
}

/// Solves the SDP directly with a dense normal matrix; intended for small `n`.
pub fn dense_reference_solve<T: Real>(
    sdp: &SdpProblem<T>,
    opts: &SolverOptions,
) -> Result<ReferenceSolution<T>, IpmError> {
    let p = reference_conic(sdp, opts);
    let mut normal = DenseNormal::new();
    let out = ipm::solve(&p, &mut normal, opts)?;
    let (x, y, s) = out.solution();
    let t = tri_len(sdp.n());
    let xs = smat(&x[..t]).expect("triangular");
    let ss = smat(&s[..t]).expect("triangular");
    let objective = sdp.from_min_value(dot(&p.c, &x));
    let u = psd_factor(&xs);
    let mut metrics = dimacs_metrics(sdp, &u, &y);
    metrics.iters = out.iterations();
    metrics.time_per_iter_s = out.mean_seconds_per_iter();
    metrics.omega = sdp.n();
    metrics.ell = 1;
    Ok(ReferenceSolution {
        x: xs,
        y,
        s: ss,
        objective,
        metrics,
    })
}

/// `U` with `U Uᵀ = X₊` (negative eigenvalues dropped).
pub fn psd_factor<T: Real>(x: &DenseSym<T>) -> Mat<T> {
    let e = SymEigen::new(&x.to_mat());
    let keep: Vec<usize> = (0..x.order()).filter(|&k| e.values[k] > T::zero()).collect();
    Mat::from_fn(x.order(), keep.len(), |i, c| e.vectors[(i, keep[c])] * e.values[keep[c]].sqrt())
}
