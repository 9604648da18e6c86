//! Dense and sparse kernels shared by every stage of the solver.

mod dense;
mod factor;
mod sparse;
mod sym;

pub use dense::Mat;
pub use factor::{
    cholesky, cholesky_inverse, cholesky_semidefinite, cholesky_solve_in_place, dense_factor, solve_lower_in_place,
    solve_lower_t_in_place, DenseFactor, Svd, SymEigen, PD_PIVOT_TOL,
};
pub use sparse::{CsrMatrix, SparseSymmetric};
pub use sym::{packed_index, smat, svec, sym_kron_apply, tri_len, tri_order, DenseSym};

pub(crate) use sym::congruence_apply;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinalgError {
    #[error("vector length {0} is not a triangular number")]
    NonTriangularLength(usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix contains NaN or infinite entries")]
    NotFinite,
    #[error("entry ({row}, {col}) lies outside a matrix of order {order}")]
    IndexOutOfRange { row: usize, col: usize, order: usize },
}
