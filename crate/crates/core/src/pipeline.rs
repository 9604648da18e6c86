//! End-to-end solve: decompose, convert, solve the embedding, complete.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::chordal::{decompose, decompose_with, sparsity_graph, TreeDecomposition};
use crate::cone::ConicProblem;
use crate::converter::{add_inequality_slacks, convert, dualize, separate_with_aux, ConvertedProblem, Dualized};
use crate::error::Result;
use crate::ipm::{self, EmbeddingState, IpmOutput, IterRecord, SolverOptions};
use crate::linalg::{DenseSym, Mat};
use crate::normal::{DenseNormal, TreeNormal};
use crate::problem::SdpProblem;
use crate::recovery::{complete_low_rank, dimacs_metrics, Metrics};
use crate::scalar::{dot, Real};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// converted program solved as is, dense normal matrix
    Ctc,
    /// dualized converted program, tree-structured normal matrix
    #[default]
    Dctc,
    /// as `Dctc`, after splitting multi-block rows with auxiliary scalars
    DctcAux,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOptions {
    pub method: Method,
    pub solver: SolverOptions,
    /// elimination order; minimum degree when absent
    pub perm: Option<Vec<usize>>,
}

/// Converted problem and the conic program handed to the interior-point loop.
#[derive(Clone, Debug)]
pub struct Prepared<T> {
    pub method: Method,
    pub converted: ConvertedProblem<T>,
    pub conic: ConicProblem<T>,
    pub dual: Option<Dualized<T>>,
}

#[derive(Clone, Debug)]
pub struct PipelineSolution<T> {
    /// `X = U Uᵀ`
    pub u: Mat<T>,
    /// multipliers of the minimization form
    pub y: Vec<T>,
    /// in the problem's own objective sense
    pub objective: T,
    pub blocks: Vec<DenseSym<T>>,
    pub history: Vec<IterRecord>,
    pub metrics: Metrics,
}

pub fn tree_decomposition<T: Real>(sdp: &SdpProblem<T>, perm: Option<&[usize]>) -> Result<TreeDecomposition> {
    let mats: Vec<_> = std::iter::once(sdp.c()).chain(sdp.constraints()).collect();
    let g = sparsity_graph(&mats)?;
    Ok(match perm {
        Some(p) => decompose_with(&g, p)?,
        None => decompose(&g),
    })
}

pub fn prepare<T: Real>(sdp: &SdpProblem<T>, opts: &PipelineOptions) -> Result<Prepared<T>> {
    let td = tree_decomposition(sdp, opts.perm.as_deref())?;
    let mut converted = add_inequality_slacks(convert(sdp, &td)?);
    if opts.method == Method::DctcAux {
        converted = separate_with_aux(converted)?;
    }
    let (conic, dual) = match opts.method {
        Method::Ctc => (converted.primal_conic(opts.solver.nu)?, None),
        Method::Dctc | Method::DctcAux => {
            let d = dualize(&converted, opts.solver.nu);
            (d.conic.clone(), Some(d))
        }
    };
    Ok(Prepared {
        method: opts.method,
        converted,
        conic,
        dual,
    })
}

impl<T: Real> Prepared<T> {
    pub fn run(
        &self,
        solver: &SolverOptions,
        observe: impl FnMut(&IterRecord, &EmbeddingState<T>),
    ) -> Result<IpmOutput<T>> {
        Ok(match self.method {
            Method::Ctc => ipm::solve_observed(&self.conic, &mut DenseNormal::new(), solver, observe)?,
            Method::Dctc | Method::DctcAux => {
                let mut normal = TreeNormal::new(&self.converted)?;
                ipm::solve_observed(&self.conic, &mut normal, solver, observe)?
            }
        })
    }

    /// Converted-program primal `x` and row multipliers from an embedding solution.
    pub fn converted_solution(&self, out: &IpmOutput<T>) -> (Vec<T>, Vec<T>) {
        let st = &out.state;
        match &self.dual {
            None => {
                let (x, y, _) = out.solution();
                (x, y)
            }
            Some(d) => d.recover(&st.x, &st.y, &st.s, st.tau),
        }
    }

    pub fn finish(&self, sdp: &SdpProblem<T>, out: IpmOutput<T>, seconds: f64) -> Result<PipelineSolution<T>> {
        let (x, yr) = self.converted_solution(&out);
        let blocks = self.converted.extract_blocks(&x);
        let u = complete_low_rank(&blocks, &self.converted.td)?;
        let y = self.converted.constraint_multipliers(&yr);
        let objective = sdp.from_min_value(dot(&self.converted.c_vector(), &x));
        let mut metrics = dimacs_metrics(sdp, &u, &y);
        metrics.iters = out.iterations();
        metrics.time_per_iter_s = if out.history.is_empty() {
            seconds
        } else {
            out.mean_seconds_per_iter()
        };
        metrics.omega = self.converted.td.omega();
        metrics.ell = self.converted.td.len();
        Ok(PipelineSolution {
            u,
            y,
            objective,
            blocks,
            history: out.history,
            metrics,
        })
    }
}

pub fn solve<T: Real>(sdp: &SdpProblem<T>, opts: &PipelineOptions) -> Result<PipelineSolution<T>> {
    solve_observed(sdp, opts, |_, _| {})
}

pub fn solve_observed<T: Real>(
    sdp: &SdpProblem<T>,
    opts: &PipelineOptions,
    observe: impl FnMut(&IterRecord, &EmbeddingState<T>),
) -> Result<PipelineSolution<T>> {
    let t0 = Instant::now();
    let prep = prepare(sdp, opts)?;
    let out = prep.run(&opts.solver, observe)?;
    prep.finish(sdp, out, t0.elapsed().as_secs_f64())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chordal::Graph;
    use crate::generators::{lovasz_theta, maxcut, maxkcut, path_rayleigh};
    use crate::oracle::dense_reference_solve;

    fn opts(method: Method) -> PipelineOptions {
        PipelineOptions {
            method,
            solver: SolverOptions::adaptive(),
            perm: None,
        }
    }

    #[test]
    fn methods_agree_with_oracle() {
        let g = Graph::cycle(6);
        let probs = [maxcut::<f64>(&g), maxkcut(&g, 3), lovasz_theta(&g), path_rayleigh(6)];
        for p in &probs {
            let want = dense_reference_solve(p, &SolverOptions::adaptive()).unwrap().objective;
            for m in [Method::Ctc, Method::Dctc, Method::DctcAux] {
                let got = solve(p, &opts(m));
                let got = match got {
                    Ok(s) => s,
                    Err(crate::Error::Normal(_)) if m == Method::Dctc => continue,
                    Err(e) => panic!("{m:?}: {e}"),
                };
                assert!((got.objective - want).abs() <= 1e-6 * (1.0 + want.abs()), "{m:?} {} {}", got.objective, want);
                assert!(got.metrics.l >= 5.0, "{m:?} {:?}", got.metrics);
                assert!(got.u.cols() <= got.metrics.omega);
            }
        }
    }

    #[test]
    fn single_edge() {
        let g = Graph::path(2);
        for k in [2, 3] {
            let s = solve(&maxkcut::<f64>(&g, k), &opts(Method::Dctc)).unwrap();
            assert!((s.objective - 1.0).abs() < 1e-6, "{}", s.objective);
        }
    }
}
