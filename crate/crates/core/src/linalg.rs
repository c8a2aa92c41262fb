//! Small dense linear algebra: a row-major matrix and a Cholesky factor with a
//! bounded diagonal-jitter retry policy.
//!
//! Everything here is sized for GP work on at most a few hundred points, so the
//! kernels are plain triple loops over contiguous rows.

use std::ops::{Index, IndexMut};

use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diagonal(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data.
    ///
    /// Panics if `data.len() != rows * cols`.
    pub fn from_row_slice(rows: usize, cols: usize, data: &[T]) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data: data.to_vec() }
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Self { rows: rows.len(), cols, data }
    }

    /// A single-row matrix, e.g. one-dimensional inputs laid out as columns.
    pub fn row_vector(values: &[T]) -> Self {
        Self::from_row_slice(1, values.len(), values)
    }

    pub fn column_vector(values: &[T]) -> Self {
        Self::from_row_slice(values.len(), 1, values)
    }

    #[inline]
    pub fn nrows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<T> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> T {
        self.diagonal().into_iter().sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)])
    }

    /// Sub-matrix picking the given rows and columns (in order, repeats allowed).
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        Self::from_fn(rows.len(), cols.len(), |r, c| self[(rows[r], cols[c])])
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let brow = other.row(k);
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other` without materializing the transpose.
    pub fn t_matmul(&self, other: &Self) -> Self {
        assert_eq!(self.rows, other.rows, "t_matmul dimension mismatch");
        let mut out = Self::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let arow = self.row(k);
            let brow = other.row(k);
            for (i, &a) in arow.iter().enumerate() {
                if a == T::zero() {
                    continue;
                }
                let orow = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (o, &b) in orow.iter_mut().zip(brow) {
                    *o = *o + a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), v)).collect()
    }

    /// `selfᵀ · v`.
    pub fn t_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.rows, v.len(), "t_matvec dimension mismatch");
        let mut out = vec![T::zero(); self.cols];
        for (r, &w) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(r)) {
                *o = *o + a * w;
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: T) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&a| a * s).collect() }
    }

    pub fn add_diagonal(&mut self, v: T) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] = self[(i, i)] + v;
        }
    }

    /// `(A + Aᵀ) / 2`.
    pub fn symmetrized(&self) -> Self {
        assert!(self.is_square(), "symmetrize needs a square matrix");
        let half = T::lit(0.5);
        Self::from_fn(self.rows, self.cols, |r, c| {
            if r == c {
                self[(r, c)]
            } else {
                (self[(r, c)] + self[(c, r)]) * half
            }
        })
    }

    pub fn max_abs_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                worst = worst.max((self[(r, c)] - self[(c, r)]).abs());
            }
        }
        worst
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&a| a * a).sum::<T>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &T {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut T {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn vec_sub<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

pub fn vec_add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

/// Relative diagonal jitter levels tried after a plain factorization fails.
const JITTER_LEVELS: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// A factorization failed; carries the offending pivot of the un-jittered attempt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorFailure {
    pub min_pivot: f64,
}

/// Lower-triangular factor `L` with `L·Lᵀ = A + jitter·I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky<T> {
    factor: Matrix<T>,
    jitter: T,
}

impl<T: Real> Cholesky<T> {
    /// Symmetrizes `a` and factors it, retrying with jitter `1e-10 … 1e-6` times
    /// `trace(a)/n` when the plain attempt hits a non-positive pivot.
    pub fn new(a: &Matrix<T>) -> Result<Self, FactorFailure> {
        let n = a.nrows().max(1);
        let scale = a.trace() / T::from_usize_lossy(n);
        Self::with_jitter_scale(a, scale)
    }

    /// Like [`Cholesky::new`] but with an explicit jitter scale. Schur complements
    /// use the scale of the prior block they were carved out of, since their own
    /// trace can collapse to rounding noise.
    pub fn with_jitter_scale(a: &Matrix<T>, scale: T) -> Result<Self, FactorFailure> {
        assert!(a.is_square(), "Cholesky needs a square matrix");
        let sym = a.symmetrized();
        let first = match factorize(&sym, T::zero()) {
            Ok(l) => return Ok(Self { factor: l, jitter: T::zero() }),
            Err(pivot) => pivot,
        };
        let failure = FactorFailure { min_pivot: first.to_f64_lossy() };
        if !(scale.is_finite() && scale > T::zero()) {
            return Err(failure);
        }
        for level in JITTER_LEVELS {
            let jitter = T::lit(level) * scale;
            let mut jittered = sym.clone();
            jittered.add_diagonal(jitter);
            if let Ok(l) = factorize(&jittered, T::zero()) {
                return Ok(Self { factor: l, jitter });
            }
        }
        Err(failure)
    }

    /// Factors without jitter, treating any pivot at or below
    /// `rel_tol · max(diag)` as a failure. Used where a near-zero pivot means
    /// rank deficiency rather than rounding trouble.
    pub fn strict(a: &Matrix<T>, rel_tol: T) -> Result<Self, FactorFailure> {
        assert!(a.is_square(), "Cholesky needs a square matrix");
        let sym = a.symmetrized();
        let max_diag = sym.diagonal().into_iter().fold(T::zero(), T::max);
        let floor = rel_tol * max_diag;
        factorize(&sym, floor)
            .map(|l| Self { factor: l, jitter: T::zero() })
            .map_err(|p| FactorFailure { min_pivot: p.to_f64_lossy() })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.factor.nrows()
    }

    pub fn factor(&self) -> &Matrix<T> {
        &self.factor
    }

    /// Diagonal increment that was needed for the factorization to succeed.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.dim()).map(|i| self.factor[(i, i)].ln()).sum::<T>() * two
    }

    /// `L·Lᵀ`, i.e. the (possibly jittered) matrix that was factored.
    pub fn reconstruct(&self) -> Matrix<T> {
        let l = &self.factor;
        let n = self.dim();
        Matrix::from_fn(n, n, |r, c| {
            let k = r.min(c) + 1;
            dot(&l.row(r)[..k], &l.row(c)[..k])
        })
    }

    /// Solves `L x = b`.
    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let l = &self.factor;
        let mut x = b.to_vec();
        for i in 0..n {
            let s = dot(&l.row(i)[..i], &x[..i]);
            x[i] = (x[i] - s) / l[(i, i)];
        }
        x
    }

    /// Solves `Lᵀ x = b`.
    pub fn solve_upper(&self, b: &[T]) -> Vec<T> {
        let n = self.dim();
        assert_eq!(b.len(), n);
        let l = &self.factor;
        let mut x = b.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s = s - l[(j, i)] * x[j];
            }
            x[i] = s / l[(i, i)];
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// Solves `L X = B` column by column (all columns at once).
    pub fn solve_lower_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let k = b.ncols();
        let l = &self.factor;
        let mut x = b.clone();
        for i in 0..n {
            for j in 0..i {
                let lij = l[(i, j)];
                if lij == T::zero() {
                    continue;
                }
                for c in 0..k {
                    x[(i, c)] = x[(i, c)] - lij * x[(j, c)];
                }
            }
            let d = l[(i, i)];
            for c in 0..k {
                x[(i, c)] = x[(i, c)] / d;
            }
        }
        x
    }

    /// Solves `Lᵀ X = B`.
    pub fn solve_upper_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let k = b.ncols();
        let l = &self.factor;
        let mut x = b.clone();
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let lji = l[(j, i)];
                if lji == T::zero() {
                    continue;
                }
                for c in 0..k {
                    x[(i, c)] = x[(i, c)] - lji * x[(j, c)];
                }
            }
            let d = l[(i, i)];
            for c in 0..k {
                x[(i, c)] = x[(i, c)] / d;
            }
        }
        x
    }

    /// Solves `A X = B`.
    pub fn solve_mat(&self, b: &Matrix<T>) -> Matrix<T> {
        self.solve_upper_mat(&self.solve_lower_mat(b))
    }

    pub fn inverse(&self) -> Matrix<T> {
        self.solve_mat(&Matrix::identity(self.dim())).symmetrized()
    }
}

/// Plain Cholesky–Banachiewicz. Returns the first pivot that is not above `floor`.
fn factorize<T: Real>(a: &Matrix<T>, floor: T) -> Result<Matrix<T>, T> {
    let n = a.nrows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let lj = &l.row(j)[..j];
        let d = a[(j, j)] - dot(lj, lj);
        if !(d > floor) || !d.is_finite() {
            return Err(d);
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let s = dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = (a[(i, j)] - s) / ljj;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> Matrix<f64> {
        Matrix::from_rows(&[vec![4.0, 2.0, 0.6], vec![2.0, 5.0, 1.0], vec![0.6, 1.0, 3.0]])
    }

    #[test]
    fn factor_reconstructs() {
        let a = spd3();
        let ch = Cholesky::new(&a).unwrap();
        assert_eq!(ch.jitter(), 0.0);
        let back = ch.reconstruct();
        assert!(back.sub(&a).frobenius_norm() / a.frobenius_norm() < 1e-14);
        for i in 0..3 {
            assert!(ch.factor()[(i, i)] > 0.0);
        }
    }

    #[test]
    fn solves_and_inverse() {
        let a = spd3();
        let ch = Cholesky::new(&a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = ch.solve(&b);
        let r = a.matvec(&x);
        for (ri, bi) in r.iter().zip(b) {
            assert!((ri - bi).abs() < 1e-13);
        }
        let inv = ch.inverse();
        let id = a.matmul(&inv);
        assert!(id.sub(&Matrix::identity(3)).frobenius_norm() < 1e-13);
        let bm = Matrix::from_rows(&[vec![1.0, 0.0], vec![2.0, 1.0], vec![0.0, 3.0]]);
        let xm = ch.solve_mat(&bm);
        assert!(a.matmul(&xm).sub(&bm).frobenius_norm() < 1e-13);
    }

    #[test]
    fn log_det_matches_product_of_pivots() {
        let a = Matrix::from_diagonal(&[2.0, 3.0, 5.0]);
        let ch = Cholesky::new(&a).unwrap();
        assert!((ch.log_det() - 30f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn jitter_rescues_semidefinite() {
        // rank one: [[1,1],[1,1]]
        let a = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let ch = Cholesky::new(&a).unwrap();
        assert!(ch.jitter() > 0.0);
        assert!(ch.jitter() <= 1e-6);
    }

    #[test]
    fn indefinite_fails_with_pivot() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        let err = Cholesky::new(&a).unwrap_err();
        assert!((err.min_pivot - (-3.0)).abs() < 1e-12);
    }

    #[test]
    fn strict_rejects_singular() {
        let a = Matrix::from_rows(&[vec![2.0, 2.0], vec![2.0, 2.0]]);
        assert!(Cholesky::strict(&a, 1e-12).is_err());
        assert!(Cholesky::strict(&spd3(), 1e-12).is_ok());
    }

    #[test]
    fn asymmetric_input_is_symmetrized() {
        let mut a = spd3();
        a[(0, 1)] += 1e-12;
        let ch = Cholesky::new(&a).unwrap();
        let back = ch.reconstruct();
        assert!(back.max_abs_asymmetry() < 1e-15);
    }

    #[test]
    fn t_matmul_matches_transpose() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let b = Matrix::from_rows(&[vec![1.0], vec![0.5], vec![-1.0]]);
        assert_eq!(a.t_matmul(&b), a.transpose().matmul(&b));
        assert_eq!(a.t_matvec(&[1.0, 0.5, -1.0]), a.transpose().matvec(&[1.0, 0.5, -1.0]));
    }

    #[test]
    fn works_in_single_precision() {
        let a: Matrix<f32> = Matrix::from_rows(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let ch = Cholesky::new(&a).unwrap();
        let x = ch.solve(&[1.0, 2.0]);
        let r = a.matvec(&x);
        assert!((r[0] - 1.0).abs() < 1e-5 && (r[1] - 2.0).abs() < 1e-5);
    }
}
