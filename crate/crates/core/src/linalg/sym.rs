use crate::linalg::{LinalgError, Mat};
use crate::scalar::Real;

/// Position of `(i, j)` (either triangle) in row-major lower-triangular packing.
#[inline]
pub fn packed_index(i: usize, j: usize) -> usize {
    let (r, c) = if i >= j { (i, j) } else { (j, i) };
    r * (r + 1) / 2 + c
}

/// `k (k + 1) / 2`.
#[inline]
pub fn tri_len(order: usize) -> usize {
    order * (order + 1) / 2
}

/// Order `k` with `k (k + 1) / 2 == len`, if one exists.
pub fn tri_order(len: usize) -> Option<usize> {
    let k = (((8 * len + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
    (k.saturating_sub(1)..=k + 1).find(|&k| tri_len(k) == len)
}

/// Dense symmetric matrix; only the lower triangle is stored, row by row.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseSym<T> {
    order: usize,
    entries: Vec<T>,
}

impl<T: Real> DenseSym<T> {
    pub fn zeros(order: usize) -> Self {
        Self {
            order,
            entries: vec![T::zero(); tri_len(order)],
        }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.set(i, i, T::one());
        }
        m
    }

    pub fn from_lower(order: usize, entries: Vec<T>) -> Result<Self, LinalgError> {
        if entries.len() != tri_len(order) {
            return Err(LinalgError::DimensionMismatch {
                expected: tri_len(order),
                found: entries.len(),
            });
        }
        Ok(Self { order, entries })
    }

    /// Lower triangle of a square matrix; the upper triangle is ignored.
    pub fn from_mat(m: &Mat<T>) -> Self {
        assert_eq!(m.rows(), m.cols());
        let n = m.rows();
        let mut entries = Vec::with_capacity(tri_len(n));
        for i in 0..n {
            for j in 0..=i {
                entries.push(m[(i, j)]);
            }
        }
        Self { order: n, entries }
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[packed_index(i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.entries[packed_index(i, j)] = v;
    }

    #[inline]
    pub fn add_to(&mut self, i: usize, j: usize, v: T) {
        let k = packed_index(i, j);
        self.entries[k] = self.entries[k] + v;
    }

    pub fn to_mat(&self) -> Mat<T> {
        Mat::from_fn(self.order, self.order, |i, j| self.get(i, j))
    }

    /// Frobenius inner product `trace(self * other)`.
    pub fn dot(&self, other: &Self) -> T {
        assert_eq!(self.order, other.order);
        let mut s = T::zero();
        for i in 0..self.order {
            for j in 0..=i {
                let p = self.get(i, j) * other.get(i, j);
                s = s + if i == j { p } else { p + p };
            }
        }
        s
    }

    pub fn frobenius_norm(&self) -> T {
        self.dot(self).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|v| *v == T::zero())
    }

    /// Principal submatrix on `idx` (local positions).
    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut out = Self::zeros(idx.len());
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate().take(a + 1) {
                out.set(a, b, self.get(i, j));
            }
        }
        out
    }
}

/// Symmetric vectorization with `√2`-scaled off-diagonals, so that
/// `svec(A) · svec(B) = trace(A B)`.
pub fn svec<T: Real>(m: &DenseSym<T>) -> Vec<T> {
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let mut out = Vec::with_capacity(m.entries.len());
    for i in 0..m.order {
        for j in 0..=i {
            let v = m.get(i, j);
            out.push(if i == j { v } else { v * r2 });
        }
    }
    out
}

/// Inverse of [`svec`].
pub fn smat<T: Real>(v: &[T]) -> Result<DenseSym<T>, LinalgError> {
    let order = tri_order(v.len()).ok_or(LinalgError::NonTriangularLength(v.len()))?;
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let mut entries = Vec::with_capacity(v.len());
    let mut k = 0;
    for i in 0..order {
        for j in 0..=i {
            entries.push(if i == j { v[k] } else { v[k] / r2 });
            k += 1;
        }
    }
    Ok(DenseSym { order, entries })
}

/// Applies the symmetric Kronecker product: `svec(½(A X Bᵀ + B X Aᵀ))` with
/// `X = smat(v)`, without forming the `⊗ₛ` matrix.
pub fn sym_kron_apply<T: Real>(
    a: &DenseSym<T>,
    b: &DenseSym<T>,
    v: &[T],
) -> Result<Vec<T>, LinalgError> {
    let x = smat(v)?;
    let n = x.order();
    if a.order() != n || b.order() != n {
        return Err(LinalgError::DimensionMismatch {
            expected: n,
            found: if a.order() != n { a.order() } else { b.order() },
        });
    }
    let (am, bm, xm) = (a.to_mat(), b.to_mat(), x.to_mat());
    let axb = am.matmul(&xm).matmul(&bm);
    let half = T::lit(0.5);
    let mut sym = DenseSym::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            // B X A = (A X B)^T for symmetric A, B, X
            sym.set(i, j, (axb[(i, j)] + axb[(j, i)]) * half);
        }
    }
    Ok(svec(&sym))
}

/// `svec(W smat(v) W)` for symmetric `W` given as a full matrix; the hot path of
/// the scaling blocks `W ⊗ₛ W`.
pub(crate) fn congruence_apply<T: Real>(w: &Mat<T>, v: &[T], out: &mut [T]) {
    let n = w.rows();
    let r2 = T::lit(std::f64::consts::SQRT_2);
    let inv_r2 = T::one() / r2;
    // X as full matrix
    let mut x = Mat::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            let val = if i == j { v[k] } else { v[k] * inv_r2 };
            x[(i, j)] = val;
            x[(j, i)] = val;
            k += 1;
        }
    }
    let wx = w.matmul(&x);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            let s = crate::scalar::dot(wx.row(i), w.row(j));
            out[k] = if i == j { s } else { s * r2 };
            k += 1;
        }
    }
}
