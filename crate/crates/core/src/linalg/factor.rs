use crate::linalg::{DenseSym, LinalgError, Mat};
use crate::scalar::Real;

/// Relative pivot threshold below which a matrix is not treated as positive definite.
pub const PD_PIVOT_TOL: f64 = 1e-12;

/// Lower Cholesky factor `L` with `L L^T = A`.
///
/// Returns `None` as soon as a pivot drops below `pivot_floor`.
pub fn cholesky<T: Real>(a: &Mat<T>, pivot_floor: T) -> Option<Mat<T>> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "cholesky needs a square matrix");
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if !(d > pivot_floor) {
            return None;
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (l.row(i), l.row(j));
            for k in 0..j {
                s = s - ri[k] * rj[k];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some(l)
}

/// Cholesky factor for a positive semidefinite matrix whose rows may be
/// linearly dependent: a pivot within `rel · a_jj` of zero is raised to
/// `√ε · a_jj`. Returns the factor and the number of raised pivots, or `None`
/// for a pivot below `−rel · a_jj`.
pub fn cholesky_semidefinite<T: Real>(a: &Mat<T>, rel: T) -> Option<(Mat<T>, usize)> {
    let n = a.rows();
    assert_eq!(n, a.cols(), "cholesky needs a square matrix");
    let mut l = Mat::zeros(n, n);
    let mut dropped = 0;
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        let band = rel * a[(j, j)].abs();
        if !(d > band) {
            if !(d >= -band) {
                return None;
            }
            dropped += 1;
            d = T::epsilon().sqrt() * a[(j, j)].abs().max(T::min_positive_value());
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            let (ri, rj) = (l.row(i), l.row(j));
            for k in 0..j {
                s = s - ri[k] * rj[k];
            }
            l[(i, j)] = s / djj;
        }
    }
    Some((l, dropped))
}

/// Solves `L x = b` in place for lower-triangular `L`.
pub fn solve_lower_in_place<T: Real>(l: &Mat<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let row = l.row(i);
        let mut s = b[i];
        for k in 0..i {
            s = s - row[k] * b[k];
        }
        b[i] = s / row[i];
    }
}

/// Solves `L^T x = b` in place for lower-triangular `L`.
pub fn solve_lower_t_in_place<T: Real>(l: &Mat<T>, b: &mut [T]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves `(L L^T) x = b` in place.
pub fn cholesky_solve_in_place<T: Real>(l: &Mat<T>, b: &mut [T]) {
    solve_lower_in_place(l, b);
    solve_lower_t_in_place(l, b);
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn cholesky_inverse<T: Real>(l: &Mat<T>) -> Mat<T> {
    let n = l.rows();
    let mut inv = Mat::zeros(n, n);
    let mut col = vec![T::zero(); n];
    for j in 0..n {
        col.iter_mut().for_each(|v| *v = T::zero());
        col[j] = T::one();
        cholesky_solve_in_place(l, &mut col);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv.symmetrize();
    inv
}

/// Symmetric eigendecomposition `A = V diag(values) V^T`, eigenvalues ascending,
/// eigenvectors stored as the columns of `vectors`.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
}

impl<T: Real> SymEigen<T> {
    /// Cyclic Jacobi rotations; accurate to a few ulps of `‖A‖` for the clique-sized
    /// orders used here.
    pub fn new(a: &Mat<T>) -> Self {
        let n = a.rows();
        assert_eq!(n, a.cols(), "eigendecomposition needs a square matrix");
        let mut m = a.clone();
        m.symmetrize();
        let mut v = Mat::identity(n);
        let total = m.frobenius_norm();
        let tiny = T::epsilon() * T::epsilon() * total * total;
        for _sweep in 0..64 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off = off + m[(i, j)] * m[(i, j)];
                }
            }
            if off <= tiny || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    let apq = m[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (T::lit(2.0) * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let mkp = m[(k, p)];
                        let mkq = m[(k, q)];
                        m[(k, p)] = c * mkp - s * mkq;
                        m[(k, q)] = s * mkp + c * mkq;
                    }
                    for k in 0..n {
                        let mpk = m[(p, k)];
                        let mqk = m[(q, k)];
                        m[(p, k)] = c * mpk - s * mqk;
                        m[(q, k)] = s * mpk + c * mqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            m[(i, i)]
                .partial_cmp(&m[(j, j)])
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let values = order.iter().map(|&i| m[(i, i)]).collect();
        let vectors = Mat::from_fn(n, n, |r, c| v[(r, order[c])]);
        Self { values, vectors }
    }

    /// `V diag(f(λ)) V^T`.
    pub fn map(&self, f: impl Fn(T) -> T) -> Mat<T> {
        let n = self.values.len();
        let fl: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let mut out = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let mut s = T::zero();
                for k in 0..n {
                    s = s + self.vectors[(i, k)] * fl[k] * self.vectors[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        out
    }

    pub fn min_value(&self) -> T {
        self.values.first().copied().unwrap_or_else(T::zero)
    }

    pub fn max_value(&self) -> T {
        self.values.last().copied().unwrap_or_else(T::zero)
    }
}

/// Singular value decomposition `A = U diag(σ) Vᵀ` of a square matrix by
/// one-sided Jacobi rotations, which keep small singular values accurate.
#[derive(Clone, Debug)]
pub struct Svd<T> {
    pub u: Mat<T>,
    pub sigma: Vec<T>,
    pub v: Mat<T>,
}

impl<T: Real> Svd<T> {
    pub fn new(a: &Mat<T>) -> Self {
        let n = a.rows();
        assert_eq!(n, a.cols(), "square matrix expected");
        let mut u = a.clone();
        let mut v = Mat::identity(n);
        let tol = T::epsilon() * T::lit(n as f64);
        for _sweep in 0..80 {
            let mut rotated = false;
            for p in 0..n {
                for q in (p + 1)..n {
                    let (mut al, mut be, mut ga) = (T::zero(), T::zero(), T::zero());
                    for k in 0..n {
                        let (x, y) = (u[(k, p)], u[(k, q)]);
                        al = al + x * x;
                        be = be + y * y;
                        ga = ga + x * y;
                    }
                    if ga == T::zero() || ga.abs() <= tol * (al * be).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let zeta = (be - al) / (T::lit(2.0) * ga);
                    let t = zeta.signum() / (zeta.abs() + (T::one() + zeta * zeta).sqrt());
                    let c = T::one() / (T::one() + t * t).sqrt();
                    let s = c * t;
                    for k in 0..n {
                        let (x, y) = (u[(k, p)], u[(k, q)]);
                        u[(k, p)] = c * x - s * y;
                        u[(k, q)] = s * x + c * y;
                        let (x, y) = (v[(k, p)], v[(k, q)]);
                        v[(k, p)] = c * x - s * y;
                        v[(k, q)] = s * x + c * y;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sigma = vec![T::zero(); n];
        for (j, sj) in sigma.iter_mut().enumerate() {
            let nrm = (0..n).fold(T::zero(), |acc, k| acc + u[(k, j)] * u[(k, j)]).sqrt();
            *sj = nrm;
            if nrm > T::zero() {
                for k in 0..n {
                    u[(k, j)] = u[(k, j)] / nrm;
                }
            }
        }
        Self { u, sigma, v }
    }
}

/// Result of [`dense_factor`].
#[derive(Clone, Debug)]
pub enum DenseFactor<T> {
    Cholesky(Mat<T>),
    Eigen(SymEigen<T>),
}

impl<T: Real> DenseFactor<T> {
    pub fn reconstruct(&self) -> Mat<T> {
        match self {
            DenseFactor::Cholesky(l) => l.matmul_t(l),
            DenseFactor::Eigen(e) => e.map(|v| v),
        }
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self, DenseFactor::Cholesky(_))
    }
}

/// Cholesky when `m` is numerically positive definite, otherwise a full
/// eigendecomposition.
pub fn dense_factor<T: Real>(m: &DenseSym<T>) -> Result<DenseFactor<T>, LinalgError> {
    if !m.entries().iter().all(|v| v.is_finite()) {
        return Err(LinalgError::NotFinite);
    }
    let a = m.to_mat();
    let max_diag = (0..m.order()).fold(T::zero(), |acc, i| acc.max(a[(i, i)]));
    let floor = T::lit(PD_PIVOT_TOL) * T::one().max(max_diag);
    match cholesky(&a, floor) {
        Some(l) => Ok(DenseFactor::Cholesky(l)),
        None => Ok(DenseFactor::Eigen(SymEigen::new(&a))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svd_reconstructs_graded_matrix() {
        // columns scaled over 12 orders of magnitude
        let n = 5;
        let a = Mat::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.7 + if i == j { 3.0 } else { 0.0 })
            .matmul(&Mat::from_fn(n, n, |i, j| if i == j { 10f64.powi(-3 * i as i32) } else { 0.0 }));
        let d = Svd::new(&a);
        let us = Mat::from_fn(n, n, |i, j| d.u[(i, j)] * d.sigma[j]);
        assert!(us.matmul_t(&d.v).sub(&a).max_abs() < 1e-14);
        assert!(d.v.transpose().matmul(&d.v).sub(&Mat::identity(n)).max_abs() < 1e-14);
        assert!(d.u.transpose().matmul(&d.u).sub(&Mat::identity(n)).max_abs() < 1e-13);
        assert!(d.sigma.iter().all(|&s| s > 0.0));
    }

    #[test]
    fn identity_factors_to_identity() {
        let f = dense_factor(&DenseSym::<f64>::identity(3)).unwrap();
        match f {
            DenseFactor::Cholesky(l) => assert_eq!(l, Mat::identity(3)),
            _ => panic!("identity is positive definite"),
        }
    }

    #[test]
    fn two_by_two_cholesky() {
        let m = DenseSym::from_lower(2, vec![4.0, 2.0, 5.0]).unwrap();
        let DenseFactor::Cholesky(l) = dense_factor(&m).unwrap() else {
            panic!("expected cholesky");
        };
        let expect = Mat::from_row_major(2, 2, vec![2.0, 0.0, 1.0, 2.0]);
        assert!(l.sub(&expect).max_abs() < 1e-15);
        assert!(l.matmul_t(&l).sub(&m.to_mat()).max_abs() < 1e-14);
    }

    #[test]
    fn indefinite_falls_back_to_eigen() {
        let m = DenseSym::from_lower(2, vec![0.0f64, 0.0, -1.0]).unwrap();
        let f = dense_factor(&m).unwrap();
        let DenseFactor::Eigen(e) = &f else {
            panic!("expected eigen path");
        };
        assert_eq!(e.values.len(), 2);
        assert!((e.values[0] + 1.0).abs() < 1e-15);
        assert!(e.values[1].abs() < 1e-15);
        assert!(f.reconstruct().sub(&m.to_mat()).max_abs() < 1e-15);
    }

    #[test]
    fn non_finite_input_rejected() {
        let m = DenseSym::from_lower(2, vec![1.0, f64::NAN, 1.0]).unwrap();
        assert!(matches!(dense_factor(&m), Err(LinalgError::NotFinite)));
    }

    #[test]
    fn eigen_reconstructs_random_matrices() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for n in [1usize, 2, 5, 17, 64] {
            let mut a = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            a.symmetrize();
            let e = SymEigen::new(&a);
            let err = e.map(|v| v).sub(&a).frobenius_norm();
            assert!(err <= 1e-10 * (1.0 + a.frobenius_norm()), "n={n} err={err}");
            let vtv = e.vectors.transpose().matmul(&e.vectors);
            assert!(vtv.sub(&Mat::identity(n)).max_abs() < 1e-12);
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn dense_factor_reconstruction_bound() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 10, 40, 64] {
            let g = Mat::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            // one PD and one indefinite matrix per order
            let pd = g.matmul_t(&g);
            let mut ind = g.clone();
            ind.symmetrize();
            for a in [pd, ind] {
                let s = DenseSym::from_mat(&a);
                let f = dense_factor(&s).unwrap();
                let err = f.reconstruct().sub(&a).frobenius_norm();
                assert!(err <= 1e-10 * (1.0 + a.frobenius_norm()));
            }
        }
    }
}
