//! 2×2 operator matrices over the doubled metric.
//!
//! Four operators on an n-dimensional metric space assemble into one operator
//! on the 2n-dimensional space carrying `diag(A, A)`. The doubled space is a
//! [`MetricSpace`] in its own right — built from scratch rather than by
//! bookkeeping on the base space, so every block-level quantity goes through
//! the same validated path as the base quantities it is compared against.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matrix::{C64, ComplexMatrix};
use crate::operator::CompatibleOperator;
use crate::space::{make_space, MetricSpace};

/// A base space together with its doubled companion.
pub struct BlockSpace {
    base: Arc<MetricSpace>,
    lifted: Arc<MetricSpace>,
}

/// Doubles the metric: the space of `diag(A, A)` with the same tolerance.
pub fn lift_metric(base: &Arc<MetricSpace>) -> Result<Arc<MetricSpace>> {
    let n = base.dim();
    let zero = ComplexMatrix::zeros(n, n);
    let doubled = ComplexMatrix::block2x2(base.metric(), &zero, &zero, base.metric())?;
    Ok(Arc::new(make_space(&doubled, base.rtol())?))
}

impl BlockSpace {
    pub fn new(base: &Arc<MetricSpace>) -> Result<Self> {
        Ok(BlockSpace { base: Arc::clone(base), lifted: lift_metric(base)? })
    }

    pub fn base(&self) -> &Arc<MetricSpace> {
        &self.base
    }

    pub fn lifted(&self) -> &Arc<MetricSpace> {
        &self.lifted
    }

    /// Assembles `[[p, q], [r, s]]` into an operator on the doubled space.
    ///
    /// Each block must be compatible with the base metric; the assembly is
    /// then automatically compatible with the doubled metric (and
    /// conversely, an escape in any block would break the assembly, so the
    /// per-block check is both the clearer diagnostic and the exact one).
    pub fn assemble(
        &self,
        p: &ComplexMatrix,
        q: &ComplexMatrix,
        r: &ComplexMatrix,
        s: &ComplexMatrix,
    ) -> Result<BlockOperator> {
        for (name, b) in [(" P", p), (" Q", q), (" R", r), (" S", s)] {
            let (residual, threshold) = self.base.compatibility_residual(b)?;
            if residual > threshold {
                return Err(Error::NotCompatible { residual, threshold, context: name.to_string() });
            }
        }
        let full = ComplexMatrix::block2x2(p, q, r, s)?;
        let op = CompatibleOperator::from_validated(&self.lifted, full);
        Ok(BlockOperator {
            blocks: [p.clone(), q.clone(), r.clone(), s.clone()],
            op,
        })
    }

    /// Assembles from compatible operators, skipping re-validation.
    pub fn assemble_ops(
        &self,
        p: &CompatibleOperator,
        q: &CompatibleOperator,
        r: &CompatibleOperator,
        s: &CompatibleOperator,
    ) -> Result<BlockOperator> {
        let full = ComplexMatrix::block2x2(p.matrix(), q.matrix(), r.matrix(), s.matrix())?;
        let op = CompatibleOperator::from_validated(&self.lifted, full);
        Ok(BlockOperator {
            blocks: [
                p.matrix().clone(),
                q.matrix().clone(),
                r.matrix().clone(),
                s.matrix().clone(),
            ],
            op,
        })
    }

    /// The unitaries of the doubled space that drive the catalog's
    /// equality proofs, each a composition of swaps, sign flips, and the
    /// `1/√2` Hadamard-like mixers. All pass [`CompatibleOperator::is_a_unitary`].
    pub fn proof_unitaries(&self) -> Result<Vec<(&'static str, BlockOperator)>> {
        let n = self.base.dim();
        let id = ComplexMatrix::identity(n);
        let zero = ComplexMatrix::zeros(n, n);
        let neg = id.scale_re(-1.0);
        let i_id = id.scale(C64::new(0.0, 1.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;

        let scale_all = |m: ComplexMatrix| m.scale_re(h);
        let mut out = Vec::new();
        let mut push = |name: &'static str, p: &ComplexMatrix, q: &ComplexMatrix, r: &ComplexMatrix, s: &ComplexMatrix, half: bool| -> Result<()> {
            let mut full = ComplexMatrix::block2x2(p, q, r, s)?;
            if half {
                full = scale_all(full);
            }
            let op = CompatibleOperator::from_validated(&self.lifted, full.clone());
            out.push((name, BlockOperator {
                blocks: [
                    full.half_block(0, 0),
                    full.half_block(0, 1),
                    full.half_block(1, 0),
                    full.half_block(1, 1),
                ],
                op,
            }));
            Ok(())
        };

        push("swap", &zero, &id, &id, &zero, false)?;
        push("sum_diff", &id, &id, &neg, &id, true)?;
        push("sum_diff_t", &id, &neg, &id, &id, true)?;
        push("imag_mix", &id, &i_id, &i_id, &id, true)?;
        push("sign_flip", &id, &zero, &zero, &neg, false)?;
        push("swap_neg", &zero, &neg, &id, &zero, false)?;
        push("swap_neg_t", &zero, &id, &neg, &zero, false)?;
        Ok(out)
    }
}

/// An operator on the doubled space remembering its four blocks.
#[derive(Debug)]
pub struct BlockOperator {
    blocks: [ComplexMatrix; 4],
    op: CompatibleOperator,
}

impl BlockOperator {
    /// The underlying operator on the doubled space.
    pub fn operator(&self) -> &CompatibleOperator {
        &self.op
    }

    /// Blocks in row-major order: P, Q, R, S.
    pub fn block(&self, i: usize) -> &ComplexMatrix {
        &self.blocks[i]
    }

    pub fn a_norm(&self) -> f64 {
        self.op.a_norm()
    }

    pub fn a_numerical_radius(&self) -> f64 {
        self.op.a_numerical_radius()
    }

    pub fn a_spectral_radius(&self) -> f64 {
        self.op.a_spectral_radius()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag_space(diag: &[f64]) -> Arc<MetricSpace> {
        Arc::new(make_space(&ComplexMatrix::from_real_diagonal(diag), 1e-10).unwrap())
    }

    #[test]
    fn lifted_space_doubles_dimension_and_rank() {
        let base = diag_space(&[3.0, 1.0, 0.0]);
        let bs = BlockSpace::new(&base).unwrap();
        assert_eq!(bs.lifted().dim(), 6);
        assert_eq!(bs.lifted().rank(), 4);
    }

    #[test]
    fn assemble_rejects_incompatible_block_by_name() {
        let base = diag_space(&[1.0, 0.0]);
        let good = ComplexMatrix::from_real_diagonal(&[2.0, 3.0]);
        let bad = ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        let bs = BlockSpace::new(&base).unwrap();
        let err = bs.assemble(&good, &good, &bad, &good).unwrap_err();
        match err {
            Error::NotCompatible { context, .. } => assert_eq!(context, " R"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn assembly_compatible_iff_all_blocks_are() {
        let base = diag_space(&[1.0, 0.0]);
        let bs = BlockSpace::new(&base).unwrap();
        let good = ComplexMatrix::from_real_diagonal(&[2.0, 3.0]);
        let bad = ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]).unwrap();
        // All four good: the 4x4 assembly passes the doubled-space test.
        let full = ComplexMatrix::block2x2(&good, &good, &good, &good).unwrap();
        assert!(bs.lifted().is_compatible(&full).unwrap());
        // One bad block: the assembly fails the doubled-space test directly.
        let full_bad = ComplexMatrix::block2x2(&good, &bad, &good, &good).unwrap();
        assert!(!bs.lifted().is_compatible(&full_bad).unwrap());
    }

    #[test]
    fn all_proof_unitaries_are_metric_unitary() {
        for diag in [&[1.0, 1.0][..], &[5.0, 0.5][..], &[2.0, 1.0, 0.0][..]] {
            let base = diag_space(diag);
            let bs = BlockSpace::new(&base).unwrap();
            let catalog = bs.proof_unitaries().unwrap();
            assert_eq!(catalog.len(), 7);
            for (name, u) in catalog {
                assert!(u.operator().is_a_unitary(1e-8), "{name} fails unitarity for {diag:?}");
            }
        }
    }

    #[test]
    fn block_diagonal_norm_is_max_of_block_norms() {
        let base = diag_space(&[2.0, 1.0]);
        let bs = BlockSpace::new(&base).unwrap();
        let p = ComplexMatrix::from_real_diagonal(&[3.0, 1.0]);
        let s = ComplexMatrix::from_real_diagonal(&[0.5, 4.0]);
        let zero = ComplexMatrix::zeros(2, 2);
        let b = bs.assemble(&p, &zero, &zero, &s).unwrap();
        assert!((b.a_norm() - 4.0).abs() < 1e-10);
    }
}
