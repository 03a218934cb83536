//! C interface to the toolkit: opaque handles over metric spaces and
//! compatible operators, integer status codes, and flat row-major buffers of
//! interleaved `[re, im]` doubles (entry `(i, j)` occupies positions
//! `2*(i*cols + j)` and `2*(i*cols + j) + 1`).
//!
//! Every entry point checks its pointers, catches panics, and reports
//! failures through [`ShkStatus`]; nothing unwinds across the boundary.
//! Handles are created and released only by this library (`*_new` / `*_free`
//! pairs) and are not thread-safe to mutate concurrently, though all
//! operations on them are read-only after construction.

use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use shkit::harness::{self, TrialConfig};
use shkit::matrix::ComplexMatrix;
use shkit::operator::CompatibleOperator;
use shkit::space::{make_space, MetricSpace};
use shkit::{C64, Error};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ShkStatus {
    /// Success.
    ShkOk = 0,
    /// A required pointer was null.
    ShkNullArgument = 1,
    /// Input rejected: non-finite entries, a metric that is not positive
    /// semidefinite, a bad rank request, or dimensions that do not match.
    ShkBadInput = 2,
    /// The operator moves the metric's null space off itself, so no metric
    /// adjoint exists and seminorm quantities are undefined for it.
    ShkIncompatible = 3,
    /// An internal invariant failed (a bug worth reporting).
    ShkInternal = 4,
}

/// A positive-semidefinite metric with its spectral data. Opaque.
pub struct ShkSpace {
    inner: Arc<MetricSpace>,
}

/// An operator validated as compatible with its space's metric. Opaque.
pub struct ShkOp {
    space: Arc<MetricSpace>,
    inner: CompatibleOperator,
}

fn status_of(e: &Error) -> ShkStatus {
    match e {
        Error::NotCompatible { .. } => ShkStatus::ShkIncompatible,
        _ => ShkStatus::ShkBadInput,
    }
}

/// Runs `body` with panics converted to `ShkInternal`.
fn guarded(body: impl FnOnce() -> ShkStatus) -> ShkStatus {
    catch_unwind(AssertUnwindSafe(body)).unwrap_or(ShkStatus::ShkInternal)
}

unsafe fn matrix_from(ptr: *const f64, rows: usize, cols: usize) -> Result<ComplexMatrix, Error> {
    let raw = std::slice::from_raw_parts(ptr, 2 * rows * cols);
    let data: Vec<C64> = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
    ComplexMatrix::new(rows, cols, data)
}

unsafe fn write_interleaved(m: &ComplexMatrix, out: *mut f64) {
    let buf = std::slice::from_raw_parts_mut(out, 2 * m.rows() * m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            let z = m.get(i, j);
            buf[2 * (i * m.cols() + j)] = z.re;
            buf[2 * (i * m.cols() + j) + 1] = z.im;
        }
    }
}

/// Builds a metric space from a `dim`×`dim` PSD matrix (interleaved buffer of
/// `2*dim*dim` doubles). `rtol` controls rank detection and compatibility
/// thresholds; pass a non-positive value for the default `1e-10`. On success
/// writes a handle to `out`; release it with [`shk_space_free`].
#[no_mangle]
pub extern "C" fn shk_space_new(
    metric: *const f64,
    dim: usize,
    rtol: f64,
    out: *mut *mut ShkSpace,
) -> ShkStatus {
    if metric.is_null() || out.is_null() || dim == 0 {
        return ShkStatus::ShkNullArgument;
    }
    guarded(|| {
        let built = unsafe { matrix_from(metric, dim, dim) }
            .and_then(|m| make_space(&m, if rtol > 0.0 { rtol } else { 1e-10 }));
        match built {
            Ok(space) => {
                let handle = Box::new(ShkSpace { inner: Arc::new(space) });
                unsafe { *out = Box::into_raw(handle) };
                ShkStatus::ShkOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Ambient dimension of the space; 0 for a null handle.
#[no_mangle]
pub extern "C" fn shk_space_dim(space: *const ShkSpace) -> usize {
    if space.is_null() {
        return 0;
    }
    unsafe { &*space }.inner.dim()
}

/// Detected rank of the metric; 0 for a null handle.
#[no_mangle]
pub extern "C" fn shk_space_rank(space: *const ShkSpace) -> usize {
    if space.is_null() {
        return 0;
    }
    unsafe { &*space }.inner.rank()
}

/// Releases a space handle. Null is a no-op. Operators created from the
/// space keep their own reference and stay valid after this call.
#[no_mangle]
pub extern "C" fn shk_space_free(space: *mut ShkSpace) {
    if !space.is_null() {
        drop(unsafe { Box::from_raw(space) });
    }
}

/// Wraps a `dim`×`dim` operator (interleaved buffer) over the space,
/// validating that it keeps the metric's null space inside itself. On
/// success writes a handle to `out`; release it with [`shk_op_free`].
#[no_mangle]
pub extern "C" fn shk_op_new(
    space: *const ShkSpace,
    entries: *const f64,
    out: *mut *mut ShkOp,
) -> ShkStatus {
    if space.is_null() || entries.is_null() || out.is_null() {
        return ShkStatus::ShkNullArgument;
    }
    guarded(|| {
        let space = &unsafe { &*space }.inner;
        let n = space.dim();
        let built = unsafe { matrix_from(entries, n, n) }
            .and_then(|m| CompatibleOperator::new(space, m));
        match built {
            Ok(op) => {
                let handle = Box::new(ShkOp { space: Arc::clone(space), inner: op });
                unsafe { *out = Box::into_raw(handle) };
                ShkStatus::ShkOk
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Releases an operator handle. Null is a no-op.
#[no_mangle]
pub extern "C" fn shk_op_free(op: *mut ShkOp) {
    if !op.is_null() {
        drop(unsafe { Box::from_raw(op) });
    }
}

fn scalar(op: *const ShkOp, out: *mut f64, f: impl Fn(&CompatibleOperator) -> f64) -> ShkStatus {
    if op.is_null() || out.is_null() {
        return ShkStatus::ShkNullArgument;
    }
    guarded(|| {
        let value = f(&unsafe { &*op }.inner);
        unsafe { *out = value };
        ShkStatus::ShkOk
    })
}

/// Operator seminorm induced by the metric.
#[no_mangle]
pub extern "C" fn shk_op_seminorm(op: *const ShkOp, out: *mut f64) -> ShkStatus {
    scalar(op, out, CompatibleOperator::a_norm)
}

/// Numerical radius induced by the metric.
#[no_mangle]
pub extern "C" fn shk_op_numerical_radius(op: *const ShkOp, out: *mut f64) -> ShkStatus {
    scalar(op, out, CompatibleOperator::a_numerical_radius)
}

/// Spectral radius of the operator's action on the metric's range.
#[no_mangle]
pub extern "C" fn shk_op_spectral_radius(op: *const ShkOp, out: *mut f64) -> ShkStatus {
    scalar(op, out, CompatibleOperator::a_spectral_radius)
}

/// Metric adjoint, written as `2*dim*dim` interleaved doubles into `out`.
#[no_mangle]
pub extern "C" fn shk_op_sharp(op: *const ShkOp, out: *mut f64) -> ShkStatus {
    if op.is_null() || out.is_null() {
        return ShkStatus::ShkNullArgument;
    }
    guarded(|| {
        let sharp = unsafe { &*op }.inner.sharp();
        unsafe { write_interleaved(sharp.matrix(), out) };
        ShkStatus::ShkOk
    })
}

/// The equivalent matrix on the metric's range coordinates, written as
/// `2*rank*rank` interleaved doubles into `out` (query the rank with
/// [`shk_space_rank`] to size the buffer).
#[no_mangle]
pub extern "C" fn shk_op_compress(op: *const ShkOp, out: *mut f64) -> ShkStatus {
    if op.is_null() || out.is_null() {
        return ShkStatus::ShkNullArgument;
    }
    guarded(|| {
        let handle = unsafe { &*op };
        let compressed = handle.space.compress(handle.inner.matrix());
        unsafe { write_interleaved(&compressed, out) };
        ShkStatus::ShkOk
    })
}

/// Runs the full randomized verification suite (every registered bound and
/// identity) and writes the report as a NUL-terminated JSON string to `out`.
/// The string is owned by the library; release it with [`shk_string_free`].
/// Returns `ShkOk` whether or not the suite found violations — consult the
/// report's `all_hold` field — and an error status only when the run could
/// not execute at all.
#[no_mangle]
pub extern "C" fn shk_verify_json(
    dim: usize,
    rank: usize,
    trials: u64,
    seed: u64,
    out: *mut *mut c_char,
) -> ShkStatus {
    if out.is_null() {
        return ShkStatus::ShkNullArgument;
    }
    guarded(|| {
        let cfg = TrialConfig::new(dim, rank, trials, seed);
        let report = match cfg.validate().and_then(|_| harness::run_suite(&cfg)) {
            Ok(report) => report,
            Err(e) => return status_of(&e),
        };
        match CString::new(report.to_json()) {
            Ok(text) => {
                unsafe { *out = text.into_raw() };
                ShkStatus::ShkOk
            }
            Err(_) => ShkStatus::ShkInternal,
        }
    })
}

/// Releases a string returned by [`shk_verify_json`]. Null is a no-op.
#[no_mangle]
pub extern "C" fn shk_string_free(text: *mut c_char) {
    if !text.is_null() {
        drop(unsafe { CString::from_raw(text) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ptr;

    fn interleave(entries: &[(f64, f64)]) -> Vec<f64> {
        entries.iter().flat_map(|&(re, im)| [re, im]).collect()
    }

    fn new_space(entries: &[(f64, f64)], dim: usize) -> *mut ShkSpace {
        let buf = interleave(entries);
        let mut space = ptr::null_mut();
        assert_eq!(shk_space_new(buf.as_ptr(), dim, 0.0, &mut space), ShkStatus::ShkOk);
        space
    }

    fn new_op(space: *const ShkSpace, entries: &[(f64, f64)]) -> *mut ShkOp {
        let buf = interleave(entries);
        let mut op = ptr::null_mut();
        assert_eq!(shk_op_new(space, buf.as_ptr(), &mut op), ShkStatus::ShkOk);
        op
    }

    #[test]
    fn quantities_of_the_rank_one_reduction() {
        let space = new_space(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)], 2);
        assert_eq!(shk_space_dim(space), 2);
        assert_eq!(shk_space_rank(space), 1);
        let op = new_op(space, &[(2.0, 0.0), (0.0, 0.0), (7.0, 0.0), (5.0, 0.0)]);

        let mut value = 0.0;
        for f in [shk_op_seminorm, shk_op_numerical_radius, shk_op_spectral_radius] {
            assert_eq!(f(op, &mut value), ShkStatus::ShkOk);
            assert!((value - 2.0).abs() <= 1e-10, "{value}");
        }

        let mut compressed = [0.0f64; 2];
        assert_eq!(shk_op_compress(op, compressed.as_mut_ptr()), ShkStatus::ShkOk);
        assert!((compressed[0] - 2.0).abs() <= 1e-12);
        assert!(compressed[1].abs() <= 1e-12);

        shk_op_free(op);
        shk_space_free(space);
    }

    #[test]
    fn sharp_of_weighted_nilpotent() {
        let space = new_space(&[(2.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)], 2);
        let op = new_op(space, &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let mut sharp = [0.0f64; 8];
        assert_eq!(shk_op_sharp(op, sharp.as_mut_ptr()), ShkStatus::ShkOk);
        assert_eq!(sharp, [0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        shk_op_free(op);
        shk_space_free(space);
    }

    #[test]
    fn operator_outlives_its_space_handle() {
        let space = new_space(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)], 2);
        let op = new_op(space, &[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        shk_space_free(space);
        let mut value = 0.0;
        assert_eq!(shk_op_numerical_radius(op, &mut value), ShkStatus::ShkOk);
        assert!((value - 0.5).abs() <= 1e-10);
        shk_op_free(op);
    }

    #[test]
    fn rejections_map_to_distinct_statuses() {
        let mut space = ptr::null_mut();
        assert_eq!(shk_space_new(ptr::null(), 2, 0.0, &mut space), ShkStatus::ShkNullArgument);

        // Not PSD.
        let buf = interleave(&[(-1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(shk_space_new(buf.as_ptr(), 2, 0.0, &mut space), ShkStatus::ShkBadInput);

        // Non-finite entry.
        let buf = interleave(&[(f64::NAN, 0.0), (0.0, 0.0), (0.0, 0.0), (1.0, 0.0)]);
        assert_eq!(shk_space_new(buf.as_ptr(), 2, 0.0, &mut space), ShkStatus::ShkBadInput);

        // Kernel-breaking operator.
        let space = new_space(&[(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 0.0)], 2);
        let buf = interleave(&[(0.0, 0.0), (1.0, 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let mut op = ptr::null_mut();
        assert_eq!(shk_op_new(space, buf.as_ptr(), &mut op), ShkStatus::ShkIncompatible);
        shk_space_free(space);

        // Bad verify configuration.
        let mut text = ptr::null_mut();
        assert_eq!(shk_verify_json(3, 5, 10, 0, &mut text), ShkStatus::ShkBadInput);
        assert_eq!(shk_verify_json(3, 3, 0, 0, &mut text), ShkStatus::ShkBadInput);
    }

    #[test]
    fn verify_json_round_trips_and_reports_success() {
        let mut text = ptr::null_mut();
        assert_eq!(shk_verify_json(3, 2, 5, 42, &mut text), ShkStatus::ShkOk);
        let json = unsafe { std::ffi::CStr::from_ptr(text) }.to_str().unwrap().to_owned();
        shk_string_free(text);
        let report: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(report["all_hold"], serde_json::Value::Bool(true));
        assert_eq!(report["config"]["trials"], 5);
    }
}
