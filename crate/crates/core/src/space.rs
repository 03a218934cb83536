//! The semi-Hilbertian structure induced by a positive-semidefinite metric.
//!
//! A Hermitian PSD matrix `A` turns C^n into a seminormed space via
//! `<x, y>_A = <Ax, y>` and `‖x‖_A = ‖A^{1/2} x‖`. [`MetricSpace`] factors
//! `A` once and keeps everything later stages need: an orthonormal basis of
//! the range and the null space, the positive spectrum, `A^{1/2}`, the
//! Moore–Penrose inverse `A†`, and the orthogonal projector onto the range.
//!
//! The null space is invisible to the seminorm, so any operator that keeps
//! the null space inside itself acts on range coordinates alone. In the
//! weighted coordinates `y = Λ^{1/2} V_r* x` the seminorm becomes the plain
//! Euclidean norm, and the operator's action is the r×r *compression*
//! `Λ^{1/2} V_r* T V_r Λ^{-1/2}` — the representative through which every
//! seminorm, radius, and adjoint in this crate is computed.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::matrix::{C64, ComplexMatrix};
use crate::numerics::{hermitian_eig, pseudo_rank};

/// A finite-dimensional space carrying the seminorm of a PSD metric.
pub struct MetricSpace {
    metric: ComplexMatrix,
    rtol: f64,
    dim: usize,
    rank: usize,
    /// Positive eigenvalues, ascending; length `rank`.
    pos_eigs: Vec<f64>,
    /// Orthonormal basis of the range, `dim x rank`.
    range_basis: ComplexMatrix,
    /// Orthonormal basis of the null space, `dim x (dim - rank)`.
    null_basis: ComplexMatrix,
    sqrt: ComplexMatrix,
    pinv: ComplexMatrix,
    proj_range: ComplexMatrix,
    /// `Λ^{1/2} V_r*`, maps vectors into weighted range coordinates (r×n).
    comp_in: ComplexMatrix,
    /// `V_r Λ^{-1/2}`, right factor of the compression (n×r).
    comp_out: ComplexMatrix,
    sqrt_norm: f64,
}

/// Factors a Hermitian PSD matrix into a [`MetricSpace`].
///
/// `rtol` controls three tolerance decisions: the Hermitian check, the
/// negative-eigenvalue rejection (`NotPositive` below `-rtol·λ_max`), and the
/// rank cutoff (eigenvalues at or below `rtol·λ_max` count as null
/// directions). A metric with no surviving eigenvalue is rejected as
/// `ZeroMetric` — a seminorm that vanishes identically has no operator theory.
pub fn make_space(a: &ComplexMatrix, rtol: f64) -> Result<MetricSpace> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch {
            context: format!("metric must be square, got {}x{}", a.rows(), a.cols()),
        });
    }
    let n = a.rows();
    let eig = hermitian_eig(a, rtol)?;
    let lambda_max = eig.eigenvalues.last().copied().unwrap_or(0.0);
    let floor = -rtol * lambda_max;
    if let Some(&bad) = eig.eigenvalues.iter().find(|&&v| v < floor) {
        return Err(Error::NotPositive { value: bad, threshold: floor });
    }
    let rank = pseudo_rank(&eig.eigenvalues, rtol)?;
    if rank == 0 {
        return Err(Error::ZeroMetric);
    }

    // Eigenvalues are ascending, so the range is spanned by the last `rank`
    // eigenvector columns and the null space by the first `n - rank`.
    let v = eig.eigenvectors.raw();
    let range_basis = ComplexMatrix::wrap(v.view((0, n - rank), (n, rank)).into_owned());
    let null_basis = ComplexMatrix::wrap(v.view((0, 0), (n, n - rank)).into_owned());
    let pos_eigs: Vec<f64> = eig.eigenvalues[n - rank..].to_vec();

    let vr = range_basis.raw();
    let diag = |f: &dyn Fn(f64) -> f64| {
        DMatrix::from_fn(rank, rank, |i, j| {
            if i == j { C64::new(f(pos_eigs[i]), 0.0) } else { C64::new(0.0, 0.0) }
        })
    };
    let sqrt = ComplexMatrix::wrap(vr * diag(&|v| v.sqrt()) * vr.adjoint());
    let pinv = ComplexMatrix::wrap(vr * diag(&|v| 1.0 / v) * vr.adjoint());
    let proj_range = ComplexMatrix::wrap(vr * vr.adjoint());
    let comp_in = ComplexMatrix::wrap(diag(&|v| v.sqrt()) * vr.adjoint());
    let comp_out = ComplexMatrix::wrap(vr * diag(&|v| 1.0 / v.sqrt()));

    Ok(MetricSpace {
        metric: a.clone(),
        rtol,
        dim: n,
        rank,
        pos_eigs,
        range_basis,
        null_basis,
        sqrt,
        pinv,
        proj_range,
        comp_in,
        comp_out,
        sqrt_norm: lambda_max.max(0.0).sqrt(),
    })
}

impl MetricSpace {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn rtol(&self) -> f64 {
        self.rtol
    }

    pub fn metric(&self) -> &ComplexMatrix {
        &self.metric
    }

    /// Positive eigenvalues of the metric, ascending.
    pub fn pos_eigs(&self) -> &[f64] {
        &self.pos_eigs
    }

    /// `A^{1/2}`, the PSD square root.
    pub fn sqrt(&self) -> &ComplexMatrix {
        &self.sqrt
    }

    /// `A†`, the Moore–Penrose inverse.
    pub fn pinv(&self) -> &ComplexMatrix {
        &self.pinv
    }

    /// Orthogonal projector onto the range of the metric.
    pub fn proj_range(&self) -> &ComplexMatrix {
        &self.proj_range
    }

    /// Orthonormal basis of the range (`dim x rank`).
    pub fn range_basis(&self) -> &ComplexMatrix {
        &self.range_basis
    }

    /// Orthonormal basis of the null space (`dim x (dim - rank)`).
    pub fn null_basis(&self) -> &ComplexMatrix {
        &self.null_basis
    }

    /// `‖A^{1/2}‖ = sqrt(λ_max)`.
    pub fn sqrt_norm(&self) -> f64 {
        self.sqrt_norm
    }

    /// Two spaces are interchangeable when they carry the same metric at the
    /// same tolerance (bit-for-bit; spaces are deterministic in their input).
    pub fn same_as(&self, other: &MetricSpace) -> bool {
        std::ptr::eq(self, other) || (self.rtol == other.rtol && self.metric == other.metric)
    }

    /// Semi-inner product `<x, y>_A = <Ax, y> = y* A x`.
    pub fn a_inner(&self, x: &[C64], y: &[C64]) -> Result<C64> {
        if x.len() != self.dim || y.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: format!("vectors of length {} and {} in a {}-dimensional space", x.len(), y.len(), self.dim),
            });
        }
        let a = self.metric.raw();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.dim {
            let mut ax = C64::new(0.0, 0.0);
            for j in 0..self.dim {
                ax += a[(i, j)] * x[j];
            }
            acc += y[i].conj() * ax;
        }
        Ok(acc)
    }

    /// Seminorm `‖x‖_A = sqrt(<x, x>_A)`.
    pub fn a_norm_vec(&self, x: &[C64]) -> Result<f64> {
        Ok(self.a_inner(x, x)?.re.max(0.0).sqrt())
    }

    /// The r×r compression `Λ^{1/2} V_r* T V_r Λ^{-1/2}` of an operator.
    ///
    /// For compatible `T` this is the matrix of the induced operator on the
    /// weighted range coordinates, where the seminorm is Euclidean.
    pub fn compress(&self, t: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix::wrap(self.comp_in.raw() * t.raw() * self.comp_out.raw())
    }

    /// Kernel-invariance residual `max |A^{1/2} T V_0|` and its threshold
    /// `rtol * (1 + max|T|) * ‖A^{1/2}‖`.
    ///
    /// `T(N(A)) ⊆ N(A)` is exactly `A^{1/2} T V_0 = 0`; in finite dimension
    /// this single test certifies that `T` is bounded for the seminorm and
    /// that the metric adjoint below exists.
    pub fn compatibility_residual(&self, t: &ComplexMatrix) -> Result<(f64, f64)> {
        if t.rows() != self.dim || !t.is_square() {
            return Err(Error::DimensionMismatch {
                context: format!("operator is {}x{}, metric space has dimension {}", t.rows(), t.cols(), self.dim),
            });
        }
        let threshold = self.rtol * (1.0 + t.max_abs()) * self.sqrt_norm;
        if self.rank == self.dim {
            return Ok((0.0, threshold));
        }
        let probe = ComplexMatrix::wrap(self.sqrt.raw() * t.raw() * self.null_basis.raw());
        Ok((probe.max_abs(), threshold))
    }

    /// Whether `T` keeps the metric's null space inside itself.
    pub fn is_compatible(&self, t: &ComplexMatrix) -> Result<bool> {
        let (residual, threshold) = self.compatibility_residual(t)?;
        Ok(residual <= threshold)
    }
}

impl std::fmt::Debug for MetricSpace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "MetricSpace {{ dim: {}, rank: {}, rtol: {:.1e} }}", self.dim, self.rank, self.rtol)
    }
}
