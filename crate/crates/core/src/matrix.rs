//! Dense complex matrices.
//!
//! [`Matrix`] is the single carrier used for every operator, factor and
//! witness in the crate. Storage is row-major. Heavier linear algebra
//! (singular values, pseudo-inverses, inverses) is delegated to `nalgebra`
//! through the conversion helpers at the bottom of this module.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_complex::Complex;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex<f64>;

/// Shorthand for a real number embedded in [`C64`].
#[inline]
pub fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Rectangular matrix of complex scalars, stored row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for z in self.row(i) {
                if z.im == 0.0 {
                    write!(f, "{:>12.6} ", z.re)?;
                } else {
                    write!(f, "{:>12.6}{:+.6}i ", z.re, z.im)?;
                }
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    /// Builds a matrix from row-major data, rejecting empty shapes,
    /// length mismatches and non-finite entries.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::input("matrix", "rows and cols must be positive"));
        }
        if data.len() != rows * cols {
            return Err(Error::input(
                "matrix",
                format!("expected {} entries for a {rows}x{cols} matrix, got {}", rows * cols, data.len()),
            ));
        }
        if let Some(pos) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::input(
                "matrix",
                format!("entry ({}, {}) is not finite", pos / cols, pos % cols),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Unchecked constructor for internal use where shape is known to be right.
    pub(crate) fn from_vec(rows: usize, cols: usize, data: Vec<C64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::from_vec(rows, cols, vec![C64::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = re(1.0);
        }
        m
    }

    pub fn from_diag(d: &[C64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &z) in d.iter().enumerate() {
            m[(i, i)] = z;
        }
        m
    }

    /// Real matrix from row slices. Panics on ragged input; meant for
    /// literals in tests and examples.
    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Self {
        let r = rows.len();
        let c = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            let row = row.as_ref();
            assert_eq!(row.len(), c, "ragged rows");
            data.extend(row.iter().map(|&x| re(x)));
        }
        Self::new(r, c, data).expect("valid literal matrix")
    }

    /// Complex matrix from row vectors. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<C64>]) -> Self {
        let r = rows.len();
        let c = rows[0].len();
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Self::new(r, c, data).expect("valid literal matrix")
    }

    /// `rows x 1` matrix holding `v`.
    pub fn column(v: &[C64]) -> Self {
        Self::from_vec(v.len(), 1, v.to_vec())
    }

    /// `1 x cols` matrix holding `v`.
    pub fn row_vector(v: &[C64]) -> Self {
        Self::from_vec(1, v.len(), v.to_vec())
    }

    /// Outer product `a bᵀ` (no conjugation).
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        let mut data = Vec::with_capacity(a.len() * b.len());
        for &x in a {
            data.extend(b.iter().map(|&y| x * y));
        }
        Self::from_vec(a.len(), b.len(), data)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn data(&self) -> &[C64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<C64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].conj();
            }
        }
        t
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        Self::from_vec(self.rows, self.cols, self.data.iter().map(|&z| f(z)).collect())
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|z| z * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.map(|z| z * c)
    }

    pub fn add(&self, other: &Matrix) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in add");
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn sub(&self, other: &Matrix) -> Self {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in sub");
        Self::from_vec(
            self.rows,
            self.cols,
            self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn matmul(&self, other: &Matrix) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in matmul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "shape mismatch in matvec");
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `A^H y`.
    pub fn adjoint_matvec(&self, y: &[C64]) -> Vec<C64> {
        assert_eq!(self.rows, y.len(), "shape mismatch in adjoint_matvec");
        let mut out = vec![C64::new(0.0, 0.0); self.cols];
        for (i, &yi) in y.iter().enumerate() {
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += a.conj() * yi;
            }
        }
        out
    }

    /// Block-diagonal `a ⊕ b`.
    pub fn direct_sum(a: &Matrix, b: &Matrix) -> Self {
        let mut m = Self::zeros(a.rows + b.rows, a.cols + b.cols);
        m.set_block(0, 0, a);
        m.set_block(a.rows, a.cols, b);
        m
    }

    /// `[a b]`.
    pub fn hstack(a: &Matrix, b: &Matrix) -> Self {
        assert_eq!(a.rows, b.rows, "hstack row mismatch");
        let mut m = Self::zeros(a.rows, a.cols + b.cols);
        m.set_block(0, 0, a);
        m.set_block(0, a.cols, b);
        m
    }

    /// `[a; b]`.
    pub fn vstack(a: &Matrix, b: &Matrix) -> Self {
        assert_eq!(a.cols, b.cols, "vstack column mismatch");
        let mut m = Self::zeros(a.rows + b.rows, a.cols);
        m.set_block(0, 0, a);
        m.set_block(a.rows, 0, b);
        m
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, block: &Matrix) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self[(r0 + i, c0 + j)] = block[(i, j)];
            }
        }
    }

    pub fn block(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = self[(r0 + i, c0 + j)];
            }
        }
        m
    }

    /// Submatrix picking the listed rows and columns.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut m = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self[(i, j)];
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Largest entrywise deviation divided by `max(1, |self|_max)`.
    pub fn rel_diff(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in rel_diff");
        let scale = self.max_abs().max(other.max_abs()).max(f64::MIN_POSITIVE);
        let d = self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        if scale < 1.0 {
            d
        } else {
            d / scale
        }
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Bilinear pairing `Σ f_ij v_ij` (no conjugation).
    pub fn pairing(&self, other: &Matrix) -> C64 {
        assert_eq!(self.shape(), other.shape(), "shape mismatch in pairing");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    // ---- nalgebra bridge -------------------------------------------------

    pub(crate) fn to_na(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    pub(crate) fn from_na(m: &DMatrix<C64>) -> Self {
        let (r, c) = m.shape();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                data.push(m[(i, j)]);
            }
        }
        Self::from_vec(r, c, data)
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.to_na().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Thin SVD `A = U diag(s) V^H` with `s` sorted non-increasing.
    pub fn svd(&self) -> Svd {
        let svd = self.to_na().svd(true, true);
        let u = svd.u.expect("u requested");
        let vt = svd.v_t.expect("v_t requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let k = order.len();
        let mut uu = Matrix::zeros(self.rows, k);
        let mut vh = Matrix::zeros(k, self.cols);
        let mut s = Vec::with_capacity(k);
        for (dst, &src) in order.iter().enumerate() {
            s.push(svd.singular_values[src]);
            for i in 0..self.rows {
                uu[(i, dst)] = u[(i, src)];
            }
            for j in 0..self.cols {
                vh[(dst, j)] = vt[(src, j)];
            }
        }
        Svd { u: uu, s, vh }
    }

    /// Numerical rank with threshold `tol · σ_max`.
    pub fn rank(&self, tol: f64) -> usize {
        let s = self.singular_values();
        let top = s.first().copied().unwrap_or(0.0);
        if top == 0.0 {
            return 0;
        }
        s.iter().filter(|&&x| x > tol * top).count()
    }

    /// Moore-Penrose pseudo-inverse with relative cutoff `tol · σ_max`.
    pub fn pinv(&self, tol: f64) -> Matrix {
        let Svd { u, s, vh } = self.svd();
        let top = s.first().copied().unwrap_or(0.0);
        let mut out = Matrix::zeros(self.cols, self.rows);
        for (k, &sk) in s.iter().enumerate() {
            if top == 0.0 || sk <= tol * top {
                continue;
            }
            let inv = 1.0 / sk;
            for i in 0..self.cols {
                let a = vh[(k, i)].conj() * inv;
                for j in 0..self.rows {
                    out[(i, j)] += a * u[(j, k)].conj();
                }
            }
        }
        out
    }

    /// Inverse of a square matrix, `None` when singular or badly conditioned
    /// (reciprocal condition number below `rcond`).
    pub fn inverse(&self, rcond: f64) -> Option<Matrix> {
        if !self.is_square() {
            return None;
        }
        let s = self.singular_values();
        let top = s[0];
        if top == 0.0 || s[s.len() - 1] <= rcond * top {
            return None;
        }
        let inv = self.to_na().try_inverse()?;
        let out = Matrix::from_na(&inv);
        out.is_finite().then_some(out)
    }
}

/// Thin singular value decomposition.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Matrix,
    pub s: Vec<f64>,
    pub vh: Matrix,
}

impl Index<(usize, usize)> for Matrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}
