//! Dense complex matrices with validated construction.
//!
//! [`ComplexMatrix`] is a thin shell around `nalgebra::DMatrix<Complex64>`
//! whose public constructors reject non-finite entries. Everything downstream
//! (eigendecompositions, seminorms, the inequality catalog) assumes finite
//! input, so the check lives at the boundary and internal arithmetic stays
//! panic-free and `Result`-free.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;

/// Dense row-ordered complex matrix; entries are finite by construction.
#[derive(Clone, PartialEq)]
pub struct ComplexMatrix {
    inner: DMatrix<C64>,
}

impl ComplexMatrix {
    /// Builds a matrix from row-major entries, validating shape and finiteness.
    pub fn new(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: format!("{rows}x{cols} matrix needs {} entries, got {}", rows * cols, data.len()),
            });
        }
        let inner = DMatrix::from_row_slice(rows, cols, &data);
        Self::from_dmatrix(inner)
    }

    /// Wraps an existing `DMatrix`, validating finiteness.
    pub fn from_dmatrix(inner: DMatrix<C64>) -> Result<Self> {
        for j in 0..inner.ncols() {
            for i in 0..inner.nrows() {
                let z = inner[(i, j)];
                if !z.re.is_finite() || !z.im.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
            }
        }
        Ok(ComplexMatrix { inner })
    }

    /// Internal wrap for matrices derived from already-validated ones.
    pub(crate) fn wrap(inner: DMatrix<C64>) -> Self {
        ComplexMatrix { inner }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix { inner: DMatrix::zeros(rows, cols) }
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix { inner: DMatrix::identity(n, n) }
    }

    /// Diagonal matrix from real entries.
    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        ComplexMatrix {
            inner: DMatrix::from_fn(n, n, |i, j| {
                if i == j { C64::new(diag[i], 0.0) } else { C64::new(0.0, 0.0) }
            }),
        }
    }

    pub fn rows(&self) -> usize {
        self.inner.nrows()
    }

    pub fn cols(&self) -> usize {
        self.inner.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.inner[(i, j)]
    }

    /// Entries in row-major order.
    pub fn row_major(&self) -> Vec<C64> {
        let (r, c) = (self.rows(), self.cols());
        let mut out = Vec::with_capacity(r * c);
        for i in 0..r {
            for j in 0..c {
                out.push(self.inner[(i, j)]);
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        ComplexMatrix { inner: self.inner.adjoint() }
    }

    pub fn scale(&self, s: C64) -> Self {
        ComplexMatrix { inner: self.inner.map(|z| z * s) }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    /// Largest entry magnitude (the max norm).
    pub fn max_abs(&self) -> f64 {
        self.inner.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
    }

    /// Largest entrywise deviation from Hermitian symmetry, `max |M - M*|`.
    pub fn hermitian_deviation(&self) -> f64 {
        debug_assert!(self.is_square());
        let mut dev = 0.0_f64;
        for i in 0..self.rows() {
            for j in i..self.cols() {
                dev = dev.max((self.inner[(i, j)] - self.inner[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Hermitian part `(M + M*)/2`.
    pub fn hermitian_part(&self) -> Self {
        ComplexMatrix { inner: (&self.inner + self.inner.adjoint()).map(|z| z * 0.5) }
    }

    /// Largest entrywise difference to another matrix of the same shape.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        debug_assert_eq!((self.rows(), self.cols()), (other.rows(), other.cols()));
        self.inner
            .iter()
            .zip(other.inner.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()))
    }

    /// Assembles `[[p, q], [r, s]]` from four blocks of identical shape.
    pub fn block2x2(p: &Self, q: &Self, r: &Self, s: &Self) -> Result<Self> {
        let (n, c) = (p.rows(), p.cols());
        for (name, b) in [("q", q), ("r", r), ("s", s)] {
            if b.rows() != n || b.cols() != c {
                return Err(Error::DimensionMismatch {
                    context: format!(
                        "block {name} is {}x{}, expected {n}x{c} to match block p",
                        b.rows(),
                        b.cols()
                    ),
                });
            }
        }
        let mut out = DMatrix::zeros(2 * n, 2 * c);
        out.view_mut((0, 0), (n, c)).copy_from(&p.inner);
        out.view_mut((0, c), (n, c)).copy_from(&q.inner);
        out.view_mut((n, 0), (n, c)).copy_from(&r.inner);
        out.view_mut((n, c), (n, c)).copy_from(&s.inner);
        Ok(ComplexMatrix { inner: out })
    }

    /// Extracts the `(bi, bj)` block of a matrix split into equal halves.
    pub fn half_block(&self, bi: usize, bj: usize) -> Self {
        debug_assert!(self.rows() % 2 == 0 && self.cols() % 2 == 0);
        let (n, c) = (self.rows() / 2, self.cols() / 2);
        ComplexMatrix { inner: self.inner.view((bi * n, bj * c), (n, c)).into_owned() }
    }

    pub(crate) fn raw(&self) -> &DMatrix<C64> {
        &self.inner
    }

    pub(crate) fn into_raw(self) -> DMatrix<C64> {
        self.inner
    }
}

impl std::fmt::Debug for ComplexMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "ComplexMatrix {}x{} [", self.rows(), self.cols())?;
        for i in 0..self.rows() {
            write!(f, "  ")?;
            for j in 0..self.cols() {
                let z = self.get(i, j);
                write!(f, "{:+.4e}{:+.4e}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

macro_rules! impl_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait for &ComplexMatrix {
            type Output = ComplexMatrix;
            fn $method(self, rhs: &ComplexMatrix) -> ComplexMatrix {
                ComplexMatrix { inner: &self.inner $op &rhs.inner }
            }
        }
    };
}

impl_binop!(Add, add, +);
impl_binop!(Sub, sub, -);
impl_binop!(Mul, mul, *);
