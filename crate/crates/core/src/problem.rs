//! Standard-form semidefinite programs over one symmetric matrix variable.

use serde::{Deserialize, Serialize};

use crate::linalg::{CsrMatrix, Mat, SparseSymmetric};
use crate::scalar::Real;

/// Relation of `A_i • X` to `b_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ObjectiveSense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("matrix {index} has order {found}, expected {expected}")]
    OrderMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("{constraints} constraint matrices but {rhs} right-hand sides and {senses} senses")]
    LengthMismatch {
        constraints: usize,
        rhs: usize,
        senses: usize,
    },
}

/// `optimize C • X  s.t.  A_i • X (=, >=, <=) b_i,  X ⪰ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SdpProblem<T> {
    n: usize,
    objective: ObjectiveSense,
    c: SparseSymmetric<T>,
    a: Vec<SparseSymmetric<T>>,
    senses: Vec<Sense>,
    b: Vec<T>,
}

impl<T: Real> SdpProblem<T> {
    pub fn new(
        objective: ObjectiveSense,
        c: SparseSymmetric<T>,
        a: Vec<SparseSymmetric<T>>,
        senses: Vec<Sense>,
        b: Vec<T>,
    ) -> Result<Self, ProblemError> {
        let n = c.order();
        if a.len() != b.len() || a.len() != senses.len() {
            return Err(ProblemError::LengthMismatch {
                constraints: a.len(),
                rhs: b.len(),
                senses: senses.len(),
            });
        }
        if let Some((index, m)) = a.iter().enumerate().find(|(_, m)| m.order() != n) {
            return Err(ProblemError::OrderMismatch {
                index: index + 1,
                expected: n,
                found: m.order(),
            });
        }
        Ok(Self {
            n,
            objective,
            c,
            a,
            senses,
            b,
        })
    }

    /// Equality-only minimization problem.
    pub fn minimize(
        c: SparseSymmetric<T>,
        a: Vec<SparseSymmetric<T>>,
        b: Vec<T>,
    ) -> Result<Self, ProblemError> {
        let senses = vec![Sense::Eq; a.len()];
        Self::new(ObjectiveSense::Minimize, c, a, senses, b)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.a.len()
    }

    pub fn objective(&self) -> ObjectiveSense {
        self.objective
    }

    pub fn c(&self) -> &SparseSymmetric<T> {
        &self.c
    }

    pub fn constraints(&self) -> &[SparseSymmetric<T>] {
        &self.a
    }

    pub fn senses(&self) -> &[Sense] {
        &self.senses
    }

    pub fn b(&self) -> &[T] {
        &self.b
    }

    pub fn has_inequalities(&self) -> bool {
        self.senses.iter().any(|s| *s != Sense::Eq)
    }

    /// Objective matrix of the equivalent minimization (`-C` when maximizing).
    pub fn c_min(&self) -> SparseSymmetric<T> {
        match self.objective {
            ObjectiveSense::Minimize => self.c.clone(),
            ObjectiveSense::Maximize => self.c.scaled(-T::one()),
        }
    }

    /// Converts a value of the minimization form back to the user's sense.
    pub fn from_min_value(&self, v: T) -> T {
        match self.objective {
            ObjectiveSense::Minimize => v,
            ObjectiveSense::Maximize => -v,
        }
    }

    /// Stacked operator with rows `svec(A_i)ᵀ`, so that row `i` applied to
    /// `svec(X)` gives `A_i • X`.
    pub fn svec_operator(&self) -> CsrMatrix<T> {
        let r2 = T::lit(std::f64::consts::SQRT_2);
        let rows = self
            .a
            .iter()
            .map(|m| {
                m.triplets()
                    .iter()
                    .map(|&(r, c, v)| {
                        let k = crate::linalg::packed_index(r, c);
                        (k, if r == c { v } else { v * r2 })
                    })
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(crate::linalg::tri_len(self.n), rows)
    }

    /// `C • X` in the user's sense for `X = U Uᵀ`.
    pub fn objective_value(&self, u: &Mat<T>) -> T {
        self.c.dot_factor(u)
    }

    /// Signed violation of each constraint at `X = U Uᵀ`; zero when satisfied.
    pub fn violations(&self, u: &Mat<T>) -> Vec<T> {
        self.a
            .iter()
            .zip(&self.b)
            .zip(&self.senses)
            .map(|((a, &b), s)| {
                let r = a.dot_factor(u) - b;
                match s {
                    Sense::Eq => r,
                    Sense::Ge => r.min(T::zero()),
                    Sense::Le => r.max(T::zero()),
                }
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> SdpProblem<U> {
        let conv = |m: &SparseSymmetric<T>| {
            SparseSymmetric::from_triplets(
                m.order(),
                m.triplets()
                    .iter()
                    .map(|&(r, c, v)| (r, c, U::lit(v.to_f64_lossy()))),
            )
            .expect("same indices")
        };
        SdpProblem {
            n: self.n,
            objective: self.objective,
            c: conv(&self.c),
            a: self.a.iter().map(conv).collect(),
            senses: self.senses.clone(),
            b: self.b.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
        }
    }
}
