//! Homogeneous self-dual embedding solved by Nesterov–Todd interior-point steps.
//!
//! The embedding of `min cᵀx s.t. Mx = b, x ∈ K` is
//!
//! ```text
//!  [ 0    M   −b    r_p ] [y]   [0]   [  0  ]
//!  [−Mᵀ   0    c    r_d ] [x] − [s] = [  0  ]
//!  [ bᵀ  −cᵀ   0    r_c ] [τ]   [κ]   [  0  ]
//!  [−r_pᵀ −r_dᵀ −r_c  0 ] [θ]   [0]   [−ν−1 ]
//! ```
//!
//! with `r_p = b − M1`, `r_d = 1 − c`, `r_c = 1 + cᵀ1`, started from
//! `x = s = 1`, `y = 0`, `τ = κ = θ = 1`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cone::{ConeError, ConicProblem, NuConvention, Scaling};
use crate::normal::{NormalError, NormalSolver, NormalStats};
use crate::scalar::{axpy, dot, norm2, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepRule {
    #[default]
    Short,
    Adaptive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub step: StepRule,
    pub eps: f64,
    pub max_iter: usize,
    pub nu: NuConvention,
    /// refinement passes per normal solve
    pub refine_passes: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            step: StepRule::Short,
            eps: 1e-9,
            max_iter: 20_000,
            nu: NuConvention::UnitSoc,
            refine_passes: 3,
        }
    }
}

impl SolverOptions {
    pub fn adaptive() -> Self {
        Self {
            step: StepRule::Adaptive,
            max_iter: 100,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IpmError {
    #[error("no convergence after {iters} iterations")]
    MaxIterations { iters: usize },
    #[error("barrier parameter stopped decreasing at iteration {iters}")]
    NumericalStall { iters: usize },
    #[error("problem is infeasible or unbounded (tau = {tau:e}, kappa = {kappa:e})")]
    InfeasibleOrUnbounded { iters: usize, tau: f64, kappa: f64 },
    #[error("singular normal matrix: {0}")]
    SingularNormalMatrix(NormalError),
    #[error("iterate left the cone interior: {0}")]
    NotInterior(#[from] ConeError),
}

impl From<NormalError> for IpmError {
    fn from(e: NormalError) -> Self {
        IpmError::SingularNormalMatrix(e)
    }
}

/// Iterate of the embedding together with its fixed residual vectors.
#[derive(Clone, Debug)]
pub struct EmbeddingState<T> {
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub s: Vec<T>,
    pub tau: T,
    pub theta: T,
    pub kappa: T,
    pub r_p: Vec<T>,
    pub r_d: Vec<T>,
    pub r_c: T,
    pub nu: T,
    pub iter: usize,
}

impl<T: Real> EmbeddingState<T> {
    pub fn mu(&self) -> T {
        (dot(&self.x, &self.s) + self.tau * self.kappa) / (self.nu + T::one())
    }
}

pub fn init_embedding<T: Real>(p: &ConicProblem<T>) -> EmbeddingState<T> {
    let one = p.cone.identity::<T>();
    let m1 = p.m.matvec(&one);
    let r_p = p.b.iter().zip(&m1).map(|(&b, &v)| b - v).collect();
    let r_d = one.iter().zip(&p.c).map(|(&e, &c)| e - c).collect();
    let r_c = T::one() + dot(&p.c, &one);
    EmbeddingState {
        x: one.clone(),
        y: vec![T::zero(); p.m.rows()],
        s: one,
        tau: T::one(),
        theta: T::one(),
        kappa: T::one(),
        r_p,
        r_d,
        r_c,
        nu: T::lit(p.cone.nu()),
        iter: 0,
    }
}

/// Residuals of the embedding's linear equations, in the order primal rows,
/// dual rows, gap row, normalization row. With `s`, `κ` zero and `ν = −1`
/// this is the skew-symmetric operator applied to `(y, x, τ, θ)`.
#[allow(clippy::type_complexity)]
pub fn embedding_residuals<T: Real>(p: &ConicProblem<T>, st: &EmbeddingState<T>) -> (Vec<T>, Vec<T>, T, T) {
    let mx = p.m.matvec(&st.x);
    let mty = p.m.matvec_t(&st.y);
    let rp = (0..mx.len())
        .map(|i| mx[i] - p.b[i] * st.tau + st.r_p[i] * st.theta)
        .collect();
    let rd = (0..mty.len())
        .map(|i| -mty[i] + p.c[i] * st.tau + st.r_d[i] * st.theta - st.s[i])
        .collect();
    let r3 = dot(&p.b, &st.y) - dot(&p.c, &st.x) + st.r_c * st.theta - st.kappa;
    let r4 = -dot(&st.r_p, &st.y) - dot(&st.r_d, &st.x) - st.r_c * st.tau + st.nu + T::one();
    (rp, rd, r3, r4)
}

/// Largest violation of the embedding's linear equations.
pub fn feasibility_residual<T: Real>(p: &ConicProblem<T>, st: &EmbeddingState<T>) -> T {
    let (rp, rd, r3, r4) = embedding_residuals(p, st);
    rp.iter()
        .chain(&rd)
        .fold(r3.abs().max(r4.abs()), |w, &r| w.max(r.abs()))
}

#[derive(Clone, Debug)]
pub struct Step<T> {
    pub dx: Vec<T>,
    pub dy: Vec<T>,
    pub ds: Vec<T>,
    pub dtau: T,
    pub dtheta: T,
    pub dkappa: T,
}

/// Per-iteration record.
#[derive(Clone, Debug, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub mu: f64,
    pub mu_next: f64,
    pub theta: f64,
    pub tau: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub seconds: f64,
    pub factor_seconds: f64,
    /// `τκ ≥ 0.9 μ` before the step
    pub centered: bool,
    pub stats: NormalStats,
}

#[derive(Clone, Debug)]
pub struct IpmOutput<T> {
    pub state: EmbeddingState<T>,
    pub history: Vec<IterRecord>,
}

impl<T: Real> IpmOutput<T> {
    pub fn iterations(&self) -> usize {
        self.history.len()
    }

    /// Rescaled `(x/τ, y/τ, s/τ)`.
    pub fn solution(&self) -> (Vec<T>, Vec<T>, Vec<T>) {
        let t = self.state.tau;
        let sc = |v: &[T]| v.iter().map(|&a| a / t).collect();
        (sc(&self.state.x), sc(&self.state.y), sc(&self.state.s))
    }

    pub fn mean_seconds_per_iter(&self) -> f64 {
        if self.history.is_empty() {
            0.0
        } else {
            self.history.iter().map(|r| r.seconds).sum::<f64>() / self.history.len() as f64
        }
    }
}

/// Factored Newton system at one iterate: the two step-independent solves are
/// cached so that each extra direction costs one more normal solve.
struct Newton<'a, T, N> {
    p: &'a ConicProblem<T>,
    normal: &'a N,
    scaling: Scaling<T>,
    u2: Vec<T>,
    v2: Vec<T>,
    u3: Vec<T>,
    v3: Vec<T>,
    refine: usize,
}

impl<'a, T: Real, N: NormalSolver<T>> Newton<'a, T, N> {
    fn apply_k(&self, v: &[T]) -> Vec<T> {
        let t = self.p.m.matvec_t(v);
        let t = self.scaling.apply_dinv(&self.p.cone, &t);
        self.p.m.matvec(&t)
    }

    /// Conjugate gradients on the normal matrix, preconditioned by its factorization.
    fn solve(&self, rhs: &[T]) -> Result<Vec<T>, NormalError> {
        let mut v = self.normal.solve(rhs)?;
        let tol = T::lit(1e-15) * (T::one() + norm2(rhs));
        let kv = self.apply_k(&v);
        let mut r: Vec<T> = rhs.iter().zip(&kv).map(|(&a, &b)| a - b).collect();
        let mut best = (norm2(&r), v.clone());
        if best.0 <= tol || self.refine == 0 {
            return Ok(v);
        }
        let mut z = self.normal.solve(&r)?;
        let mut d = z.clone();
        let mut rz = dot(&r, &z);
        let mut stalled = 0;
        for _ in 0..self.refine {
            if best.0 <= tol || stalled >= 2 || !(rz > T::zero()) {
                break;
            }
            let kd = self.apply_k(&d);
            let dkd = dot(&d, &kd);
            if !(dkd > T::zero()) {
                break;
            }
            let alpha = rz / dkd;
            axpy(alpha, &d, &mut v);
            axpy(-alpha, &kd, &mut r);
            let rn = norm2(&r);
            if rn < best.0 {
                stalled = if rn > T::lit(0.5) * best.0 { stalled + 1 } else { 0 };
                best = (rn, v.clone());
            } else {
                stalled += 1;
            }
            z = self.normal.solve(&r)?;
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for (di, &zi) in d.iter_mut().zip(&z) {
                *di = zi + beta * *di;
            }
        }
        Ok(best.1)
    }

    fn new(
        p: &'a ConicProblem<T>,
        normal: &'a N,
        st: &EmbeddingState<T>,
        scaling: Scaling<T>,
        refine: usize,
    ) -> Result<Self, NormalError> {
        let mut me = Self {
            p,
            normal,
            scaling,
            u2: Vec::new(),
            v2: Vec::new(),
            u3: Vec::new(),
            v3: Vec::new(),
            refine,
        };
        let dinv_c = me.scaling.apply_dinv(&p.cone, &p.c);
        let dinv_rd = me.scaling.apply_dinv(&p.cone, &st.r_d);
        let mdc = p.m.matvec(&dinv_c);
        let mdr = p.m.matvec(&dinv_rd);
        let rhs2: Vec<T> = p.b.iter().zip(&mdc).map(|(&b, &v)| b + v).collect();
        let rhs3: Vec<T> = st.r_p.iter().zip(&mdr).map(|(&r, &v)| -r + v).collect();
        me.v2 = me.solve(&rhs2)?;
        me.v3 = me.solve(&rhs3)?;
        let t2: Vec<T> = p.m.matvec_t(&me.v2).iter().zip(&p.c).map(|(&a, &c)| a - c).collect();
        let t3: Vec<T> = p.m.matvec_t(&me.v3).iter().zip(&st.r_d).map(|(&a, &r)| a - r).collect();
        me.u2 = me.scaling.apply_dinv(&p.cone, &t2);
        me.u3 = me.scaling.apply_dinv(&p.cone, &t3);
        Ok(me)
    }

    /// Direction targeting `μ⁺` (0 gives the affine-scaling direction), with an
    /// optional second-order correction from a predictor step.
    fn direction(&self, st: &EmbeddingState<T>, mu_plus: T, corr: Option<&Step<T>>) -> Result<Step<T>, IpmError> {
        let p = self.p;
        let d0_coef = st.kappa / st.tau;
        let mut d0 = -st.kappa + mu_plus / st.tau;
        if let Some(a) = corr {
            d0 = d0 - a.dtau * a.dkappa / st.tau;
        }
        // D⁻¹d with d = −s − μ⁺∇F(x)
        let dinv_d = self.scaling.dinv_corrected(
            &p.cone,
            &st.x,
            &st.s,
            mu_plus,
            corr.map(|a| (&a.dx[..], &a.ds[..])),
        );
        // the current primal residual is folded in so that drift gets corrected
        let mx = p.m.matvec(&st.x);
        let rhs1: Vec<T> = p
            .m
            .matvec(&dinv_d)
            .iter()
            .enumerate()
            .map(|(i, &v)| -v - (mx[i] - p.b[i] * st.tau + st.r_p[i] * st.theta))
            .collect();
        let v1 = self.solve(&rhs1)?;
        let u1: Vec<T> = self
            .scaling
            .apply_dinv(&p.cone, &p.m.matvec_t(&v1))
            .iter()
            .zip(&dinv_d)
            .map(|(&a, &b)| a + b)
            .collect();
        let (b, c) = (&p.b, &p.c);
        let a11 = dot(b, &self.v2) - dot(c, &self.u2) + d0_coef;
        let a12 = dot(b, &self.v3) - dot(c, &self.u3) + st.r_c;
        let f1 = d0 - dot(b, &v1) + dot(c, &u1);
        let a21 = dot(&st.r_p, &self.v2) + dot(&st.r_d, &self.u2) + st.r_c;
        let a22 = dot(&st.r_p, &self.v3) + dot(&st.r_d, &self.u3);
        let f2 = -dot(&st.r_p, &v1) - dot(&st.r_d, &u1);
        let det = a11 * a22 - a12 * a21;
        let scale = (a11 * a22).abs().max((a12 * a21).abs()).max(T::one());
        if !(det.abs() > T::lit(1e-14) * scale) {
            return Err(IpmError::SingularNormalMatrix(NormalError::IndefinitePivot(usize::MAX)));
        }
        let dtau = (f1 * a22 - a12 * f2) / det;
        let dtheta = (a11 * f2 - a21 * f1) / det;
        let dy: Vec<T> = (0..v1.len())
            .map(|i| v1[i] + self.v2[i] * dtau + self.v3[i] * dtheta)
            .collect();
        let dx: Vec<T> = (0..u1.len())
            .map(|i| u1[i] + self.u2[i] * dtau + self.u3[i] * dtheta)
            .collect();
        // from the dual equation directly; `d − D dx` loses it to cancellation
        let mty = p.m.matvec_t(&dy);
        let ds = (0..mty.len())
            .map(|i| -mty[i] + c[i] * dtau + st.r_d[i] * dtheta)
            .collect();
        let dkappa = d0 - d0_coef * dtau;
        Ok(Step {
            dx,
            dy,
            ds,
            dtau,
            dtheta,
            dkappa,
        })
    }
}

/// NT direction at `st` for target `μ⁺`, factoring the normal matrix once.
pub fn nt_direction<T: Real, N: NormalSolver<T>>(
    p: &ConicProblem<T>,
    st: &EmbeddingState<T>,
    normal: &mut N,
    mu_plus: T,
    refine: usize,
) -> Result<Step<T>, IpmError> {
    let scaling = p.cone.scaling(&st.x, &st.s)?;
    normal.factor(p, &scaling)?;
    let nw = Newton::new(p, &*normal, st, scaling, refine)?;
    nw.direction(st, mu_plus, None)
}

fn max_step<T: Real>(p: &ConicProblem<T>, st: &EmbeddingState<T>, step: &Step<T>) -> T {
    let cap = T::lit(1e6);
    let mut a = p.cone.max_step(&st.x, &step.dx, cap);
    a = a.min(p.cone.max_step(&st.s, &step.ds, cap));
    if step.dtau < T::zero() {
        a = a.min(-st.tau / step.dtau);
    }
    if step.dkappa < T::zero() {
        a = a.min(-st.kappa / step.dkappa);
    }
    a
}

fn take_step<T: Real>(st: &mut EmbeddingState<T>, step: &Step<T>, alpha: T) {
    axpy(alpha, &step.dx, &mut st.x);
    axpy(alpha, &step.dy, &mut st.y);
    axpy(alpha, &step.ds, &mut st.s);
    st.tau = st.tau + alpha * step.dtau;
    st.theta = st.theta + alpha * step.dtheta;
    st.kappa = st.kappa + alpha * step.dkappa;
}

/// Runs the interior-point loop until `μ ≤ ε`.
pub fn solve<T: Real, N: NormalSolver<T>>(
    p: &ConicProblem<T>,
    normal: &mut N,
    opts: &SolverOptions,
) -> Result<IpmOutput<T>, IpmError> {
    solve_observed(p, normal, opts, |_, _| {})
}

/// [`solve`] with a callback after every iteration.
pub fn solve_observed<T: Real, N: NormalSolver<T>>(
    p: &ConicProblem<T>,
    normal: &mut N,
    opts: &SolverOptions,
    mut observe: impl FnMut(&IterRecord, &EmbeddingState<T>),
) -> Result<IpmOutput<T>, IpmError> {
    let mut st = init_embedding(p);
    let nu1 = st.nu + T::one();
    let shrink = T::one() - T::one() / (T::lit(15.0) * nu1.sqrt());
    let eps = T::lit(opts.eps);
    let mut history: Vec<IterRecord> = Vec::new();
    let mut best_mu = T::infinity();
    let mut stalled = 0;
    loop {
        let mu = st.mu();
        if mu <= eps {
            if st.tau >= st.kappa {
                return Ok(IpmOutput { state: st, history });
            }
            return Err(IpmError::InfeasibleOrUnbounded {
                iters: st.iter,
                tau: st.tau.to_f64_lossy(),
                kappa: st.kappa.to_f64_lossy(),
            });
        }
        if st.tau < T::lit(1e-10) && st.kappa > T::lit(1e-6) {
            return Err(IpmError::InfeasibleOrUnbounded {
                iters: st.iter,
                tau: st.tau.to_f64_lossy(),
                kappa: st.kappa.to_f64_lossy(),
            });
        }
        if st.iter >= opts.max_iter {
            return Err(IpmError::MaxIterations { iters: st.iter });
        }
        let t0 = Instant::now();
        let scaling = p.cone.scaling(&st.x, &st.s)?;
        normal.factor(p, &scaling)?;
        let factor_seconds = t0.elapsed().as_secs_f64();
        let nw = Newton::new(p, &*normal, &st, scaling, opts.refine_passes)?;
        let centered = st.tau * st.kappa >= T::lit(0.9) * mu;
        let (step, alpha) = match opts.step {
            StepRule::Short => {
                let step = nw.direction(&st, shrink * mu, None)?;
                (step, T::one())
            }
            StepRule::Adaptive => {
                let aff = nw.direction(&st, T::zero(), None)?;
                let a_aff = max_step(p, &st, &aff).min(T::one());
                let one_m = T::one() - a_aff;
                let sigma = (one_m * one_m * one_m).max(T::lit(0.05)).min(T::lit(0.9));
                let step = nw.direction(&st, sigma * mu, Some(&aff))?;
                let a = (T::lit(0.99) * max_step(p, &st, &step)).min(T::one());
                (step, a)
            }
        };
        drop(nw);
        take_step(&mut st, &step, alpha);
        st.iter += 1;
        if !(st.tau > T::zero() && st.kappa > T::zero()) {
            return Err(IpmError::NotInterior(ConeError::NotInterior(usize::MAX)));
        }
        p.cone.check_interior(&st.x)?;
        p.cone.check_interior(&st.s)?;
        let mu_next = st.mu();
        history.push(IterRecord {
            iter: st.iter,
            mu: mu.to_f64_lossy(),
            mu_next: mu_next.to_f64_lossy(),
            theta: st.theta.to_f64_lossy(),
            tau: st.tau.to_f64_lossy(),
            kappa: st.kappa.to_f64_lossy(),
            alpha: alpha.to_f64_lossy(),
            seconds: t0.elapsed().as_secs_f64(),
            factor_seconds,
            centered,
            stats: normal.stats(),
        });
        observe(history.last().expect("just pushed"), &st);
        if mu_next < best_mu {
            best_mu = mu_next;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= 5 {
                return Err(IpmError::NumericalStall { iters: st.iter });
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cone::{ConeSpec, Segment};
    use crate::linalg::CsrMatrix;
    use crate::normal::DenseNormal;

    fn scalar_lp() -> ConicProblem<f64> {
        // min x  s.t. x = 1, x ∈ S¹₊
        ConicProblem {
            m: CsrMatrix::from_rows(1, vec![vec![(0, 1.0)]]),
            c: vec![1.0],
            b: vec![1.0],
            cone: ConeSpec::new(vec![Segment::Psd(1)], NuConvention::UnitSoc),
        }
    }

    #[test]
    fn init_is_feasible_and_centered() {
        let p = scalar_lp();
        let st = init_embedding(&p);
        assert_eq!(st.mu(), 1.0);
        assert_eq!(feasibility_residual(&p, &st), 0.0);
    }

    #[test]
    fn centered_fixpoint_gives_zero_step() {
        // c = 1, b = M 1: all residuals vanish at the start
        let p = scalar_lp();
        let mut st = init_embedding(&p);
        st.r_p = vec![0.0];
        st.r_d = vec![0.0];
        let mut normal = DenseNormal::new();
        let step = nt_direction(&p, &st, &mut normal, 1.0, 3).unwrap();
        assert!(step.dx[0].abs() < 1e-14 && step.dtau.abs() < 1e-14 && step.dy[0].abs() < 1e-14);
    }

    #[test]
    fn skew_orthogonality_of_step() {
        let p = scalar_lp();
        let st = init_embedding(&p);
        let mut normal = DenseNormal::new();
        let mu = st.mu();
        let target = 0.7 * mu;
        let step = nt_direction(&p, &st, &mut normal, target, 3).unwrap();
        let lhs = dot(&st.x, &step.ds) + dot(&st.s, &step.dx) + st.tau * step.dkappa + st.kappa * step.dtau;
        assert!((lhs - (st.nu + 1.0) * (target - mu)).abs() < 1e-13);
        assert!(step.dtheta < 0.0);
    }

    #[test]
    fn scalar_lp_short_and_adaptive() {
        let p = scalar_lp();
        for step in [StepRule::Short, StepRule::Adaptive] {
            let opts = SolverOptions {
                step,
                ..Default::default()
            };
            let out = solve(&p, &mut DenseNormal::new(), &opts).unwrap();
            let (x, _, _) = out.solution();
            assert!((x[0] - 1.0).abs() < 1e-6, "{x:?}");
        }
    }
}
