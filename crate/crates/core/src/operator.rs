//! Operators compatible with a metric: the metric adjoint and the three
//! seminorm quantities (operator seminorm, numerical radius, spectral radius).
//!
//! A compatible operator caches its r×r compression at construction and the
//! three scalars lazily; instances are shared behind `Arc` by the inequality
//! catalog so repeated appearances of the same operand cost one computation.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::matrix::{C64, ComplexMatrix};
use crate::numerics::{
    general_eigenvalues, lambda_max_hermitian, lambda_minmax_rotation, largest_singular_value,
};
use crate::space::MetricSpace;

/// Grid resolution for the numerical-radius phase sweep.
pub const RADIUS_GRID: usize = 1024;

/// Angular resolution the phase refinement narrows to.
pub const RADIUS_REFINE: f64 = 1e-9;

/// A square operator validated to keep the metric's null space inside itself.
pub struct CompatibleOperator {
    space: Arc<MetricSpace>,
    mat: ComplexMatrix,
    tilde: ComplexMatrix,
    norm_cell: OnceLock<f64>,
    radius_cell: OnceLock<(f64, f64)>,
    spectral_cell: OnceLock<f64>,
}

impl CompatibleOperator {
    /// Validates kernel invariance and caches the compression.
    pub fn new(space: &Arc<MetricSpace>, mat: ComplexMatrix) -> Result<Self> {
        let (residual, threshold) = space.compatibility_residual(&mat)?;
        if residual > threshold {
            return Err(Error::NotCompatible { residual, threshold, context: String::new() });
        }
        Ok(Self::from_validated(space, mat))
    }

    /// Constructor for operators compatible by algebra (sums, products,
    /// scalings, adjoints of compatible operators), where re-testing could
    /// only inject spurious tolerance failures.
    pub(crate) fn from_validated(space: &Arc<MetricSpace>, mat: ComplexMatrix) -> Self {
        let tilde = space.compress(&mat);
        CompatibleOperator {
            space: Arc::clone(space),
            mat,
            tilde,
            norm_cell: OnceLock::new(),
            radius_cell: OnceLock::new(),
            spectral_cell: OnceLock::new(),
        }
    }

    pub fn space(&self) -> &Arc<MetricSpace> {
        &self.space
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.mat
    }

    /// The r×r compression `Λ^{1/2} V_r* T V_r Λ^{-1/2}`.
    pub fn compressed(&self) -> &ComplexMatrix {
        &self.tilde
    }

    /// Metric adjoint `T^♯ = A† T* A`, the unique compatible operator with
    /// `<Tx, y>_A = <x, T^♯ y>_A` whose range lies in the range of `A`.
    pub fn sharp(&self) -> CompatibleOperator {
        let s = &self.space;
        let mat = ComplexMatrix::wrap(s.pinv().raw() * self.mat.adjoint().raw() * s.metric().raw());
        Self::from_validated(s, mat)
    }

    /// Seminorm `‖T‖_A = sup{‖Tx‖_A : ‖x‖_A = 1}` — the largest singular
    /// value of the compression.
    pub fn a_norm(&self) -> f64 {
        *self.norm_cell.get_or_init(|| {
            largest_singular_value(&self.tilde).expect("compression is square and finite")
        })
    }

    /// Numerical radius `ω_A(T) = sup{|<Tx, x>_A| : ‖x‖_A = 1}` and the
    /// maximizing phase: `ω_A(T) = max_θ λ_max(Re(e^{iθ} T̃))`.
    pub fn a_numerical_radius_with_phase(&self) -> (f64, f64) {
        *self.radius_cell.get_or_init(|| numerical_radius(&self.tilde))
    }

    pub fn a_numerical_radius(&self) -> f64 {
        self.a_numerical_radius_with_phase().0
    }

    /// Spectral radius `r_A(T)` — the largest eigenvalue modulus of the
    /// compression.
    pub fn a_spectral_radius(&self) -> f64 {
        *self.spectral_cell.get_or_init(|| {
            general_eigenvalues(&self.tilde)
                .expect("compression is square and finite")
                .iter()
                .fold(0.0_f64, |m, z| m.max(z.norm()))
        })
    }

    /// Real part of the range-projected operator,
    /// `((T^♯)^♯ + T^♯)/2 = (P_R T P_R + T^♯)/2`. Metric-selfadjoint, and
    /// together with [`im_part`](Self::im_part) decomposes the projection:
    /// `P_R T P_R = re + i·im`. Seminorm quantities of `T` and `P_R T P_R`
    /// coincide, so this is the working real part for every radius formula.
    pub fn re_part(&self) -> CompatibleOperator {
        let sharp = self.sharp();
        let projected = self.project_range();
        let mat = ComplexMatrix::wrap((projected.raw() + sharp.mat.raw()).map(|z| z * 0.5));
        Self::from_validated(&self.space, mat)
    }

    /// Imaginary part of the range-projected operator,
    /// `(P_R T P_R - T^♯)/(2i)`; metric-selfadjoint.
    pub fn im_part(&self) -> CompatibleOperator {
        let sharp = self.sharp();
        let projected = self.project_range();
        let half_over_i = C64::new(0.0, -0.5); // 1/(2i)
        let mat = ComplexMatrix::wrap((projected.raw() - sharp.mat.raw()).map(|z| z * half_over_i));
        Self::from_validated(&self.space, mat)
    }

    /// `P_R T P_R` as a raw matrix.
    fn project_range(&self) -> ComplexMatrix {
        let p = self.space.proj_range().raw();
        ComplexMatrix::wrap(p * self.mat.raw() * p)
    }

    /// `AT = T*A` within `tol * (1 + max|AT|)`.
    pub fn is_a_selfadjoint(&self, tol: f64) -> bool {
        let at = ComplexMatrix::wrap(self.space.metric().raw() * self.mat.raw());
        let ta = ComplexMatrix::wrap(self.mat.adjoint().raw() * self.space.metric().raw());
        at.max_abs_diff(&ta) <= tol * (1.0 + at.max_abs())
    }

    /// `AT` Hermitian with spectrum above `-tol * (1 + max|AT|)`.
    pub fn is_a_positive(&self, tol: f64) -> bool {
        let at = ComplexMatrix::wrap(self.space.metric().raw() * self.mat.raw());
        let scale = 1.0 + at.max_abs();
        if at.hermitian_deviation() > tol * scale {
            return false;
        }
        let h = at.hermitian_part();
        let low = -lambda_max_hermitian(&h.scale_re(-1.0).into_raw());
        low >= -tol * scale
    }

    /// Metric unitarity: `U^♯ U = (U^♯)^♯ U^♯ = P_R` within
    /// `tol * (1 + max|U|²·cond)` — checked entrywise against the projector.
    pub fn is_a_unitary(&self, tol: f64) -> bool {
        let sharp = self.sharp();
        let p = self.space.proj_range();
        let lhs1 = ComplexMatrix::wrap(sharp.mat.raw() * self.mat.raw());
        let scale1 = 1.0 + lhs1.max_abs();
        if lhs1.max_abs_diff(p) > tol * scale1 {
            return false;
        }
        let sharp2 = sharp.sharp();
        let lhs2 = ComplexMatrix::wrap(sharp2.mat.raw() * sharp.mat.raw());
        let scale2 = 1.0 + lhs2.max_abs();
        lhs2.max_abs_diff(p) <= tol * scale2
    }

    // ----- algebra (closed under compatibility) -----

    pub fn add(&self, other: &CompatibleOperator) -> CompatibleOperator {
        debug_assert!(self.space.same_as(&other.space));
        Self::from_validated(&self.space, ComplexMatrix::wrap(self.mat.raw() + other.mat.raw()))
    }

    pub fn sub(&self, other: &CompatibleOperator) -> CompatibleOperator {
        debug_assert!(self.space.same_as(&other.space));
        Self::from_validated(&self.space, ComplexMatrix::wrap(self.mat.raw() - other.mat.raw()))
    }

    /// Composition `self ∘ other` (matrix product `self * other`).
    pub fn compose(&self, other: &CompatibleOperator) -> CompatibleOperator {
        debug_assert!(self.space.same_as(&other.space));
        Self::from_validated(&self.space, ComplexMatrix::wrap(self.mat.raw() * other.mat.raw()))
    }

    pub fn scale(&self, z: C64) -> CompatibleOperator {
        Self::from_validated(&self.space, self.mat.scale(z))
    }

    /// `self + i·other` — recurring combination in radius identities.
    pub fn add_i_times(&self, other: &CompatibleOperator) -> CompatibleOperator {
        debug_assert!(self.space.same_as(&other.space));
        let mat = ComplexMatrix::wrap(
            self.mat.raw() + other.mat.raw().map(|z| z * C64::new(0.0, 1.0)),
        );
        Self::from_validated(&self.space, mat)
    }

    pub fn sub_i_times(&self, other: &CompatibleOperator) -> CompatibleOperator {
        debug_assert!(self.space.same_as(&other.space));
        let mat = ComplexMatrix::wrap(
            self.mat.raw() - other.mat.raw().map(|z| z * C64::new(0.0, 1.0)),
        );
        Self::from_validated(&self.space, mat)
    }
}

impl Clone for CompatibleOperator {
    fn clone(&self) -> Self {
        let cell_f64 = |src: &OnceLock<f64>| {
            let c = OnceLock::new();
            if let Some(&v) = src.get() {
                let _ = c.set(v);
            }
            c
        };
        let radius_cell = OnceLock::new();
        if let Some(&v) = self.radius_cell.get() {
            let _ = radius_cell.set(v);
        }
        CompatibleOperator {
            space: Arc::clone(&self.space),
            mat: self.mat.clone(),
            tilde: self.tilde.clone(),
            norm_cell: cell_f64(&self.norm_cell),
            radius_cell,
            spectral_cell: cell_f64(&self.spectral_cell),
        }
    }
}

impl std::fmt::Debug for CompatibleOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "CompatibleOperator {{ dim: {}, rank: {} }}", self.space.dim(), self.space.rank())
    }
}

// ----- free-function surface used by the CLI -----

/// Metric adjoint of a raw matrix; validates compatibility first.
pub fn sharp(space: &Arc<MetricSpace>, t: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(CompatibleOperator::new(space, t.clone())?.sharp().matrix().clone())
}

/// Operator seminorm of a raw matrix.
pub fn a_op_norm(space: &Arc<MetricSpace>, t: &ComplexMatrix) -> Result<f64> {
    Ok(CompatibleOperator::new(space, t.clone())?.a_norm())
}

/// Numerical radius of a raw matrix.
pub fn a_numerical_radius(space: &Arc<MetricSpace>, t: &ComplexMatrix) -> Result<f64> {
    Ok(CompatibleOperator::new(space, t.clone())?.a_numerical_radius())
}

/// Spectral radius of a raw matrix.
pub fn a_spectral_radius(space: &Arc<MetricSpace>, t: &ComplexMatrix) -> Result<f64> {
    Ok(CompatibleOperator::new(space, t.clone())?.a_spectral_radius())
}

// ----- the phase sweep -----

/// Classical numerical radius of a square complex matrix with the maximizing
/// phase: `ω(M) = max_θ λ_max(H cos θ - K sin θ)` where `H, K` are the
/// Hermitian and skew parts of `M`.
///
/// The profile is sampled on a uniform [`RADIUS_GRID`]-point grid over
/// `[0, 2π)`, then golden-section refined around the three best local maxima
/// until the bracket is narrower than [`RADIUS_REFINE`]. The result dominates
/// every evaluated sample by construction.
fn numerical_radius(m: &ComplexMatrix) -> (f64, f64) {
    let r = m.rows();
    if r == 0 || m.max_abs() == 0.0 {
        return (0.0, 0.0);
    }
    let h = m.hermitian_part().into_raw();
    let k = ComplexMatrix::wrap((m.raw() - m.adjoint().raw()).map(|z| z * C64::new(0.0, -0.5))).into_raw();

    let eval = |theta: f64| -> f64 { lambda_minmax_rotation(&h, &k, theta.cos(), theta.sin()).1 };

    // The rotation flips sign half a turn later, so λ_max at θ+π is -λ_min
    // at θ: each solve fills two grid points.
    let step = std::f64::consts::TAU / RADIUS_GRID as f64;
    let half = RADIUS_GRID / 2;
    let mut samples = vec![0.0_f64; RADIUS_GRID];
    for idx in 0..half {
        let theta = idx as f64 * step;
        let (lo, hi) = lambda_minmax_rotation(&h, &k, theta.cos(), theta.sin());
        samples[idx] = hi;
        samples[idx + half] = -lo;
    }

    let mut best = f64::NEG_INFINITY;
    let mut best_theta = 0.0;
    for (k, &v) in samples.iter().enumerate() {
        if v > best {
            best = v;
            best_theta = k as f64 * step;
        }
    }

    // Local maxima on the cyclic grid, strongest three, no two adjacent.
    let mut peaks: Vec<usize> = (0..RADIUS_GRID)
        .filter(|&k| {
            let prev = samples[(k + RADIUS_GRID - 1) % RADIUS_GRID];
            let next = samples[(k + 1) % RADIUS_GRID];
            samples[k] >= prev && samples[k] >= next
        })
        .collect();
    peaks.sort_by(|&a, &b| samples[b].total_cmp(&samples[a]).then(a.cmp(&b)));
    let mut chosen: Vec<usize> = Vec::new();
    for k in peaks {
        let near = chosen.iter().any(|&c| {
            let d = (k as isize - c as isize).rem_euclid(RADIUS_GRID as isize) as usize;
            d.min(RADIUS_GRID - d) <= 1
        });
        if !near {
            chosen.push(k);
        }
        if chosen.len() == 3 {
            break;
        }
    }

    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    for k in chosen {
        let center = k as f64 * step;
        let mut a = center - step;
        let mut b = center + step;
        let mut x1 = b - INV_PHI * (b - a);
        let mut x2 = a + INV_PHI * (b - a);
        let mut f1 = eval(x1);
        let mut f2 = eval(x2);
        while b - a > RADIUS_REFINE {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + INV_PHI * (b - a);
                f2 = eval(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - INV_PHI * (b - a);
                f1 = eval(x1);
            }
            let (fx, x) = if f1 > f2 { (f1, x1) } else { (f2, x2) };
            if fx > best {
                best = fx;
                best_theta = x;
            }
        }
    }

    (best, best_theta.rem_euclid(std::f64::consts::TAU))
}
