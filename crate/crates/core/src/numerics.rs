//! Eigenvalue and singular-value kernels for small dense complex matrices.
//!
//! These wrap nalgebra's pure-Rust decompositions behind contracts the rest
//! of the crate relies on: Hermitian eigendecompositions come back sorted
//! ascending with column-aligned eigenvectors, general eigenvalues come back
//! in a deterministic order, and rank decisions are made with an explicit
//! relative tolerance rather than an implicit machine-epsilon guess.

use std::cell::RefCell;

use nalgebra::{DMatrix, Schur};

use crate::error::{Error, Result};
use crate::matrix::{C64, ComplexMatrix};

/// Hermitian eigendecomposition `M = V diag(eigenvalues) V*`.
///
/// Eigenvalues are real and ascending; column `k` of `eigenvectors` belongs
/// to `eigenvalues[k]` and the columns are orthonormal.
pub struct HermitianEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: ComplexMatrix,
}

/// Decomposes a Hermitian matrix, rejecting inputs whose deviation from
/// their own adjoint exceeds `rtol * (1 + max|M|)`.
///
/// The matrix is symmetrized before factoring so that floating-point dust on
/// the input cannot leak complex parts into the eigenvalues.
pub fn hermitian_eig(m: &ComplexMatrix, rtol: f64) -> Result<HermitianEigen> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: format!("hermitian_eig needs a square matrix, got {}x{}", m.rows(), m.cols()),
        });
    }
    let tol = rtol * (1.0 + m.max_abs());
    let deviation = m.hermitian_deviation();
    if deviation > tol {
        return Err(Error::NotHermitian { deviation, tol });
    }
    let se = m.hermitian_part().into_raw().symmetric_eigen();

    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].total_cmp(&se.eigenvalues[j]));

    let eigenvalues: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |i, j| se.eigenvectors[(i, order[j])]);
    Ok(HermitianEigen { eigenvalues, eigenvectors: ComplexMatrix::wrap(eigenvectors) })
}

/// Eigenvalues of a general square complex matrix via the Schur form,
/// sorted by real part then imaginary part for determinism.
pub fn general_eigenvalues(m: &ComplexMatrix) -> Result<Vec<C64>> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            context: format!("eigenvalues need a square matrix, got {}x{}", m.rows(), m.cols()),
        });
    }
    if m.rows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.raw().clone(), f64::EPSILON, 10_000).ok_or(Error::NoConvergence)?;
    let ev = schur.eigenvalues().ok_or(Error::NoConvergence)?;
    let mut out: Vec<C64> = ev.iter().copied().collect();
    out.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(out)
}

/// Largest singular value, computed as the square root of the largest
/// eigenvalue of `M* M` (or `M M*`, whichever is smaller).
pub fn largest_singular_value(m: &ComplexMatrix) -> Result<f64> {
    if m.rows() == 0 || m.cols() == 0 || m.max_abs() == 0.0 {
        return Ok(0.0);
    }
    let gram = if m.rows() >= m.cols() {
        m.adjoint().raw() * m.raw()
    } else {
        m.raw() * m.adjoint().raw()
    };
    let top = lambda_max_hermitian(&gram);
    Ok(top.max(0.0).sqrt())
}

/// Largest eigenvalue of a matrix that is Hermitian by construction.
///
/// Internal hot path: callers guarantee symmetry, so no deviation check and
/// no sorting — eigenvalues only (no vector accumulation) and we take the max.
pub(crate) fn lambda_max_hermitian(h: &DMatrix<C64>) -> f64 {
    debug_assert_eq!(h.nrows(), h.ncols());
    match h.nrows() {
        0 => 0.0,
        1 => h[(0, 0)].re,
        2 => {
            // Exact 2x2 formula: mean of the diagonal plus the radius of the
            // eigenvalue pair. The off-diagonal magnitude averages the two
            // conjugate entries so floating-point dust cannot skew it.
            let a = h[(0, 0)].re;
            let d = h[(1, 1)].re;
            let half_diff = 0.5 * (a - d);
            let off = 0.5 * (h[(0, 1)] + h[(1, 0)].conj()).norm();
            0.5 * (a + d) + (half_diff * half_diff + off * off).sqrt()
        }
        _ => EIG_WS.with(|ws| {
            let mut ws = ws.borrow_mut();
            match ws.lambda_max(h) {
                Some(v) => v,
                // Iteration cap exhausted (not observed in practice): defer
                // to the general-purpose solver rather than return garbage.
                None => h.symmetric_eigenvalues().iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)),
            }
        }),
    }
}

/// Smallest and largest eigenvalues of the Hermitian rotation
/// `cos·H - sin·K`, assembled directly into the solver workspace. One
/// tridiagonalization yields the whole spectrum, so the two extremes cost a
/// single solve — the phase sweep exploits `λ_max(M(θ+π)) = -λ_min(M(θ))`
/// to halve its grid work.
pub(crate) fn lambda_minmax_rotation(
    h: &DMatrix<C64>,
    k: &DMatrix<C64>,
    cos: f64,
    sin: f64,
) -> (f64, f64) {
    let n = h.nrows();
    debug_assert_eq!(h.ncols(), n);
    debug_assert_eq!(k.nrows(), n);
    match n {
        0 => (0.0, 0.0),
        1 => {
            let v = cos * h[(0, 0)].re - sin * k[(0, 0)].re;
            (v, v)
        }
        2 => {
            let m00 = cos * h[(0, 0)].re - sin * k[(0, 0)].re;
            let m11 = cos * h[(1, 1)].re - sin * k[(1, 1)].re;
            let m01 = (h[(0, 1)] * cos - k[(0, 1)] * sin
                + (h[(1, 0)] * cos - k[(1, 0)] * sin).conj())
                * 0.5;
            let mid = 0.5 * (m00 + m11);
            let half_diff = 0.5 * (m00 - m11);
            let radius = (half_diff * half_diff + m01.norm_sqr()).sqrt();
            (mid - radius, mid + radius)
        }
        _ => EIG_WS.with(|ws| {
            let mut ws = ws.borrow_mut();
            match ws.minmax_rotation(h, k, cos, sin) {
                Some(pair) => pair,
                None => {
                    let rot = DMatrix::from_fn(n, n, |i, j| h[(i, j)] * cos - k[(i, j)] * sin);
                    let ev = rot.symmetric_eigenvalues();
                    let lo = ev.iter().fold(f64::INFINITY, |m, &v| m.min(v));
                    let hi = ev.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    (lo, hi)
                }
            }
        }),
    }
}

thread_local! {
    static EIG_WS: RefCell<EigWorkspace> = RefCell::new(EigWorkspace::default());
}

/// Reusable buffers for the values-only Hermitian eigensolver below. The
/// phase sweep behind every numerical radius makes on the order of a thousand
/// `lambda_max` calls per operator, so this path avoids repeated allocation
/// and skips the eigenvector accumulation a general decomposition pays for.
#[derive(Default)]
struct EigWorkspace {
    a: Vec<C64>,
    w: Vec<C64>,
    v: Vec<C64>,
    d: Vec<f64>,
    e: Vec<f64>,
}

impl EigWorkspace {
    /// Largest eigenvalue of a Hermitian matrix, or `None` when the
    /// tridiagonal QL iteration fails to converge.
    fn lambda_max(&mut self, h: &DMatrix<C64>) -> Option<f64> {
        let n = h.nrows();
        self.a.clear();
        // Row-major copy; only the Hermitian structure matters, and the
        // two-sided updates below preserve it.
        self.a.extend((0..n).flat_map(|i| (0..n).map(move |j| h[(i, j)])));
        self.spectrum_of_loaded(n)?;
        Some(self.d.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v)))
    }

    /// Extreme eigenvalues of `cos·H - sin·K`, assembled without an
    /// intermediate matrix.
    fn minmax_rotation(
        &mut self,
        h: &DMatrix<C64>,
        k: &DMatrix<C64>,
        cos: f64,
        sin: f64,
    ) -> Option<(f64, f64)> {
        let n = h.nrows();
        self.a.clear();
        self.a.extend((0..n).flat_map(|i| (0..n).map(move |j| h[(i, j)] * cos - k[(i, j)] * sin)));
        self.spectrum_of_loaded(n)?;
        let lo = self.d.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let hi = self.d.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        Some((lo, hi))
    }

    /// Runs tridiagonalization + QL on the matrix currently in `self.a`,
    /// leaving the spectrum in `self.d`.
    fn spectrum_of_loaded(&mut self, n: usize) -> Option<()> {
        self.v.resize(n, C64::new(0.0, 0.0));
        self.w.resize(n, C64::new(0.0, 0.0));
        self.d.resize(n, 0.0);
        self.e.resize(n, 0.0);
        self.tridiagonalize(n);
        for i in 0..n {
            self.d[i] = self.a[i * n + i].re;
        }
        for i in 0..n - 1 {
            self.e[i] = self.a[(i + 1) * n + i].norm();
        }
        self.e[n - 1] = 0.0;
        if tql_values(&mut self.d, &mut self.e) { Some(()) } else { None }
    }

    /// Householder reduction to Hermitian tridiagonal form, touching only the
    /// trailing block at each step. Eigenvalues are preserved; eigenvectors
    /// are never formed. The complex subdiagonal is phase-equivalent to its
    /// magnitudes, which is what the extraction above uses.
    fn tridiagonalize(&mut self, n: usize) {
        let a = &mut self.a;
        let v = &mut self.v;
        let w = &mut self.w;
        for k in 0..n.saturating_sub(2) {
            let mut xnorm2 = 0.0;
            for i in k + 1..n {
                xnorm2 += a[i * n + k].norm_sqr();
            }
            let xnorm = xnorm2.sqrt();
            if xnorm == 0.0 {
                continue;
            }
            let x0 = a[(k + 1) * n + k];
            let x0n = x0.norm();
            let phase = if x0n > 0.0 { x0 / x0n } else { C64::new(1.0, 0.0) };
            let beta = -phase * xnorm;
            // v = (x - beta e1) normalized; the closed form below avoids
            // cancellation because beta was chosen anti-parallel to x0.
            let vnorm = (2.0 * xnorm * (xnorm + x0n)).sqrt();
            v[k + 1] = (x0 - beta) / vnorm;
            for i in k + 2..n {
                v[i] = a[i * n + k] / vnorm;
            }
            // w = 2 S v on the trailing block, then the rank-two Hermitian
            // update S -= v u* + u v* with u = w - (v* w) v.
            for i in k + 1..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in k + 1..n {
                    acc += a[i * n + j] * v[j];
                }
                w[i] = 2.0 * acc;
            }
            let mut gamma = 0.0;
            for i in k + 1..n {
                gamma += (v[i].conj() * w[i]).re;
            }
            for i in k + 1..n {
                w[i] -= gamma * v[i];
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    a[i * n + j] -= v[i] * w[j].conj() + w[i] * v[j].conj();
                }
            }
            a[(k + 1) * n + k] = beta;
        }
    }
}

/// Implicit-shift QL iteration on a real symmetric tridiagonal matrix,
/// eigenvalues only. `d` holds the diagonal, `e[i]` the coupling between
/// rows `i` and `i+1` (the last slot is scratch). Returns `false` if any
/// eigenvalue fails to deflate within the iteration cap.
fn tql_values(d: &mut [f64], e: &mut [f64]) -> bool {
    let n = d.len();
    if n == 0 {
        return true;
    }
    e[n - 1] = 0.0;
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 64 {
                return false;
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c) = (1.0_f64, 1.0_f64);
            let mut p = 0.0_f64;
            let mut underflow = false;
            for i in (l..m).rev() {
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    // A rotation annihilated early: absorb the shift and
                    // restart the convergence scan for this eigenvalue.
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    true
}

/// Counts eigenvalues strictly above `rtol * max(eigenvalues)`.
///
/// Input is an ascending real spectrum. Every entry must sit above
/// `-rtol * max` — anything lower is a genuinely negative eigenvalue and the
/// caller's matrix was not positive semidefinite. An all-zero (or empty)
/// spectrum has rank 0.
pub fn pseudo_rank(eigenvalues: &[f64], rtol: f64) -> Result<usize> {
    if eigenvalues.is_empty() {
        return Ok(0);
    }
    let max = eigenvalues.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let floor = -rtol * max;
    for &v in eigenvalues {
        if v < floor {
            return Err(Error::NegativeEigenvalue { value: v, threshold: floor });
        }
    }
    let cut = rtol * max;
    Ok(eigenvalues.iter().filter(|&&v| v > cut).count())
}
