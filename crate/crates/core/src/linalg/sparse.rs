use crate::linalg::{LinalgError, Mat};
use crate::scalar::Real;

/// Symmetric matrix in coordinate form. Triplets are 0-based and stored in the
/// lower triangle (`row >= col`).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSymmetric<T> {
    order: usize,
    triplets: Vec<(usize, usize, T)>,
}

impl<T: Real> SparseSymmetric<T> {
    pub fn new(order: usize) -> Self {
        Self {
            order,
            triplets: Vec::new(),
        }
    }

    /// Builds and canonicalizes; entries given in the upper triangle are mirrored.
    pub fn from_triplets(
        order: usize,
        triplets: impl IntoIterator<Item = (usize, usize, T)>,
    ) -> Result<Self, LinalgError> {
        let mut m = Self::new(order);
        for (i, j, v) in triplets {
            m.insert(i, j, v)?;
        }
        m.canonicalize();
        Ok(m)
    }

    /// Appends `v` at `(i, j)`; duplicates are summed by [`canonicalize`](Self::canonicalize).
    pub fn insert(&mut self, i: usize, j: usize, v: T) -> Result<(), LinalgError> {
        if i >= self.order || j >= self.order {
            return Err(LinalgError::IndexOutOfRange {
                row: i,
                col: j,
                order: self.order,
            });
        }
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.triplets.push((r, c, v));
        Ok(())
    }

    /// Sorts triplets by `(row, col)` and sums duplicates. Explicit zeros stay,
    /// since they still count as structural nonzeros.
    pub fn canonicalize(&mut self) {
        self.triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut out: Vec<(usize, usize, T)> = Vec::with_capacity(self.triplets.len());
        for &(r, c, v) in &self.triplets {
            match out.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 = last.2 + v,
                _ => out.push((r, c, v)),
            }
        }
        self.triplets = out;
    }

    #[inline]
    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    #[inline]
    pub fn triplets(&self) -> &[(usize, usize, T)] {
        &self.triplets
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Value at `(i, j)` (either triangle); assumes canonical form.
    pub fn get(&self, i: usize, j: usize) -> T {
        let key = if i >= j { (i, j) } else { (j, i) };
        self.triplets
            .binary_search_by(|t| (t.0, t.1).cmp(&key))
            .map(|k| self.triplets[k].2)
            .unwrap_or_else(|_| T::zero())
    }

    pub fn scaled(&self, alpha: T) -> Self {
        Self {
            order: self.order,
            triplets: self
                .triplets
                .iter()
                .map(|&(r, c, v)| (r, c, v * alpha))
                .collect(),
        }
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.order, self.order);
        for &(r, c, v) in &self.triplets {
            m[(r, c)] = m[(r, c)] + v;
            if r != c {
                m[(c, r)] = m[(c, r)] + v;
            }
        }
        m
    }

    /// `self • X` for a full symmetric `X`.
    pub fn dot_dense(&self, x: &Mat<T>) -> T {
        let two = T::lit(2.0);
        self.triplets.iter().fold(T::zero(), |acc, &(r, c, v)| {
            acc + if r == c { v * x[(r, r)] } else { two * v * x[(r, c)] }
        })
    }

    /// `self • U Uᵀ` without forming the product.
    pub fn dot_factor(&self, u: &Mat<T>) -> T {
        let two = T::lit(2.0);
        self.triplets.iter().fold(T::zero(), |acc, &(r, c, v)| {
            let p = crate::scalar::dot(u.row(r), u.row(c));
            acc + if r == c { v * p } else { two * v * p }
        })
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.order];
        for &(r, c, v) in &self.triplets {
            y[r] = y[r] + v * x[c];
            if r != c {
                y[c] = y[c] + v * x[r];
            }
        }
        y
    }

    pub fn frobenius_norm(&self) -> T {
        let two = T::lit(2.0);
        self.triplets
            .iter()
            .fold(T::zero(), |acc, &(r, c, v)| {
                acc + if r == c { v * v } else { two * v * v }
            })
            .sqrt()
    }

    /// `Σ_k α_k M_k` over matrices of one order.
    pub fn linear_combination(order: usize, terms: &[(T, &Self)]) -> Result<Self, LinalgError> {
        let mut out = Self::new(order);
        for (alpha, m) in terms {
            if m.order != order {
                return Err(LinalgError::DimensionMismatch {
                    expected: order,
                    found: m.order,
                });
            }
            out.triplets
                .extend(m.triplets.iter().map(|&(r, c, v)| (r, c, *alpha * v)));
        }
        out.canonicalize();
        Ok(out)
    }
}

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix<T> {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Rows given as `(col, value)` lists; duplicate columns within a row are summed.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        let nrows = rows.len();
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let start = col_idx.len();
            for (c, v) in row {
                assert!(c < cols, "column {c} out of range {cols}");
                if col_idx.len() > start && *col_idx.last().unwrap() == c {
                    let last = values.last_mut().unwrap();
                    *last = *last + v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: nrows,
            cols,
            row_ptr,
            col_idx,
            values,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[T]) {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[s..e], &self.values[s..e])
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&j, &a)| acc + a * x[j])
            })
            .collect()
    }

    /// `selfᵀ x`.
    pub fn matvec_t(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![T::zero(); self.cols];
        for (i, &xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                y[j] = y[j] + a * xi;
            }
        }
        y
    }

    pub fn to_dense(&self) -> Mat<T> {
        let mut m = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                m[(i, j)] = a;
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, T)>> = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                rows[j].push((i, a));
            }
        }
        Self::from_rows(self.rows, rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalize_sums_duplicates_and_keeps_zeros() {
        let m = SparseSymmetric::from_triplets(
            3,
            vec![(0, 1, 1.0), (1, 0, 2.0), (2, 2, 0.0), (0, 0, 4.0)],
        )
        .unwrap();
        assert_eq!(m.triplets(), &[(0, 0, 4.0), (1, 0, 3.0), (2, 2, 0.0)]);
        assert_eq!(m.get(0, 1), 3.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn out_of_range_rejected() {
        let mut m = SparseSymmetric::<f64>::new(2);
        assert!(matches!(
            m.insert(2, 0, 1.0),
            Err(LinalgError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn dot_forms_agree() {
        let a = SparseSymmetric::from_triplets(3, vec![(0, 0, 1.0f64), (2, 1, -2.0)]).unwrap();
        let u = Mat::from_row_major(3, 2, vec![1.0, 2.0, 0.5, -1.0, 3.0, 1.0]);
        let x = u.matmul_t(&u);
        let d = a.dot_dense(&x);
        assert!((d - a.dot_factor(&u)).abs() < 1e-14);
        assert!((d - (x[(0, 0)] - 4.0 * x[(2, 1)])).abs() < 1e-14);
    }

    #[test]
    fn csr_products() {
        let m = CsrMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 2.0)], vec![], vec![(1, -1.0), (1, 3.0)]]);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![3.0, 0.0, 2.0]);
        assert_eq!(m.matvec_t(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 1.0]);
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }
}
