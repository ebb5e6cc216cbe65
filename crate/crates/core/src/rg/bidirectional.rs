use nalgebra::{DMatrix, DVector, RowDVector};

use super::{ul_factorize, UlFactorization};
use crate::error::{Error, Result};
use crate::linalg::BlockTridiag;

/// Inverse of a block-tridiagonal matrix split into an outer part (blocks
/// `0..split`, factorized outward from the split through its Schur complement)
/// and an inner unilateral part (blocks `split..`) coupled by one corner pair.
#[derive(Debug, Clone)]
pub struct SplitInverse {
    sizes1: Vec<usize>,
    dim1: usize,
    dim2: usize,
    f22: UlFactorization,
    /// Factorization of the Schur complement with its block order reversed.
    f11: Option<UlFactorization>,
    t12c: DMatrix<f64>,
    t21c: DMatrix<f64>,
}

impl SplitInverse {
    pub fn new(t: &BlockTridiag, split: usize) -> Result<Self> {
        let nb = t.blocks();
        if split == 0 || split >= nb {
            return Err(Error::Invalid(format!("split {split} must lie strictly inside 0..{nb}")));
        }
        let part2 = BlockTridiag::new(
            t.diag[split..].to_vec(),
            t.upper[split..].to_vec(),
            t.lower[split..].to_vec(),
        )?;
        let f22 = ul_factorize(&part2)?;
        let sizes1: Vec<usize> = t.diag[..split].iter().map(|d| d.nrows()).collect();
        let dim1: usize = sizes1.iter().sum();
        let t12c = t.upper[split - 1].clone();
        let t21c = t.lower[split - 1].clone();
        let f11 = if dim1 == 0 {
            None
        } else {
            let mut diag = t.diag[..split].to_vec();
            diag[split - 1] += &t12c * &f22.neg_u_inv[0] * &t21c;
            let schur = BlockTridiag::new(diag, t.upper[..split - 1].to_vec(), t.lower[..split - 1].to_vec())?;
            Some(ul_factorize(&schur.reversed()).map_err(|e| match e {
                Error::SingularBlock { pivot, .. } => {
                    Error::DegenerateBoundary(format!("singular Schur complement (pivot {pivot:e})"))
                }
                other => other,
            })?)
        };
        Ok(Self {
            sizes1,
            dim1,
            dim2: part2.dim(),
            f22,
            f11,
            t12c,
            t21c,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim1 + self.dim2
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(())
    }

    fn reverse_blocks(&self, v: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(v.len());
        let mut end = v.len();
        for &s in self.sizes1.iter().rev() {
            out.extend_from_slice(&v[end - s..end]);
            end -= s;
        }
        out
    }

    fn schur_right(&self, v: &[f64]) -> Result<Vec<f64>> {
        match &self.f11 {
            None => Ok(Vec::new()),
            Some(f) => Ok(self.reverse_blocks(&f.solve_right(&self.reverse_blocks(v))?)),
        }
    }

    fn schur_left(&self, v: &[f64]) -> Result<Vec<f64>> {
        match &self.f11 {
            None => Ok(Vec::new()),
            Some(f) => Ok(self.reverse_blocks(&f.solve_left(&self.reverse_blocks(v))?)),
        }
    }

    fn last1(&self) -> usize {
        self.dim1 - self.t12c.nrows()
    }

    /// `T^{-1} v`.
    pub fn apply_right(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let (v1, v2) = v.split_at(self.dim1);
        let y2 = self.f22.solve_right(v2)?;
        let c = self.t12c.ncols();
        let mut w1 = v1.to_vec();
        if self.dim1 > 0 {
            let corr = &self.t12c * DVector::from_column_slice(&y2[..c]);
            let at = self.last1();
            for (k, x) in corr.iter().enumerate() {
                w1[at + k] -= x;
            }
        }
        let x1 = self.schur_right(&w1)?;
        let mut x2 = y2;
        if self.dim1 > 0 {
            let push = &self.t21c * DVector::from_column_slice(&x1[self.last1()..]);
            let mut rhs = vec![0.0; self.dim2];
            rhs[..c].copy_from_slice(push.as_slice());
            let back = self.f22.solve_right(&rhs)?;
            for (a, b) in x2.iter_mut().zip(back) {
                *a -= b;
            }
        }
        let mut out = x1;
        out.extend(x2);
        Ok(out)
    }

    /// `v T^{-1}` for a row vector.
    pub fn apply_left(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let (v1, v2) = v.split_at(self.dim1);
        let z2 = self.f22.solve_left(v2)?;
        let c = self.t21c.nrows();
        let mut w1 = v1.to_vec();
        if self.dim1 > 0 {
            let corr = RowDVector::from_row_slice(&z2[..c]) * &self.t21c;
            let at = self.last1();
            for (k, x) in corr.iter().enumerate() {
                w1[at + k] -= x;
            }
        }
        let x1 = self.schur_left(&w1)?;
        let mut x2 = z2;
        if self.dim1 > 0 {
            let push = RowDVector::from_row_slice(&x1[self.last1()..]) * &self.t12c;
            let mut rhs = vec![0.0; self.dim2];
            rhs[..c].copy_from_slice(push.as_slice());
            let back = self.f22.solve_left(&rhs)?;
            for (a, b) in x2.iter_mut().zip(back) {
                *a -= b;
            }
        }
        let mut out = x1;
        out.extend(x2);
        Ok(out)
    }
}

/// `T^{-1} v` through the split at `split`.
pub fn bidirectional_inverse_apply(t: &BlockTridiag, split: usize, v: &[f64]) -> Result<Vec<f64>> {
    SplitInverse::new(t, split)?.apply_right(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::model::{build_truncated_generator, ModelParams};

    fn killed_generator() -> BlockTridiag {
        // Truncated generator with extra killing on the diagonal so it is invertible.
        let p = ModelParams::new(1.0, 2.0, 1.0, 1.0, 2, 3).unwrap();
        let mut t = build_truncated_generator(&p, 4, 5).unwrap().blocks;
        for (k, d) in t.diag.iter_mut().enumerate() {
            for r in 0..d.nrows() {
                d[(r, r)] -= 0.05 * ((k + r) % 3) as f64 + 0.01;
            }
        }
        t
    }

    #[test]
    fn residual_of_multiply_back() {
        let t = killed_generator();
        let s = SplitInverse::new(&t, 5).unwrap();
        let v: Vec<f64> = (0..t.dim()).map(|k| ((k * 13) % 7) as f64 - 3.0).collect();
        let x = s.apply_right(&v).unwrap();
        let back = t.mul_vec(&x).unwrap();
        let err: Vec<f64> = back.iter().zip(&v).map(|(a, b)| a - b).collect();
        assert!(max_abs(&err) < 1e-9);
        let xl = s.apply_left(&v).unwrap();
        let back = t.vec_mul(&xl).unwrap();
        let err: Vec<f64> = back.iter().zip(&v).map(|(a, b)| a - b).collect();
        assert!(max_abs(&err) < 1e-9);
        let ones = vec![1.0; t.dim()];
        assert!(s.apply_right(&ones).unwrap().iter().all(|&x| x <= 0.0));
    }

    #[test]
    fn uncoupled_parts_are_independent() {
        let mut t = killed_generator();
        t.upper[4].fill(0.0);
        t.lower[4].fill(0.0);
        let v: Vec<f64> = (0..t.dim()).map(|k| (k % 4) as f64).collect();
        let x = bidirectional_inverse_apply(&t, 5, &v).unwrap();
        let split_at = 5 * 6;
        let p1 = BlockTridiag::new(t.diag[..5].to_vec(), t.upper[..4].to_vec(), t.lower[..4].to_vec()).unwrap();
        let x1 = ul_factorize(&p1).unwrap().solve_right(&v[..split_at]).unwrap();
        for k in 0..split_at {
            assert!((x[k] - x1[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn coupling_correction_lives_in_one_corner() {
        // T22^{-1} T21 only has nonzero columns in the last outer block.
        let t = killed_generator();
        let part2 = BlockTridiag::new(t.diag[5..].to_vec(), t.upper[5..].to_vec(), t.lower[5..].to_vec()).unwrap();
        let f = ul_factorize(&part2).unwrap();
        let mut t21 = DMatrix::zeros(part2.dim(), 5 * 6);
        t21.view_mut((0, 4 * 6), (6, 6)).copy_from(&t.lower[4]);
        for c in 0..t21.ncols() {
            let col: Vec<f64> = t21.column(c).iter().copied().collect();
            let y = f.solve_right(&col).unwrap();
            if c < 4 * 6 {
                assert_eq!(max_abs(&y), 0.0);
            }
        }
    }

    #[test]
    fn empty_outer_part_uses_inner_only() {
        let t = killed_generator();
        let keep: Vec<Vec<usize>> = (0..t.blocks())
            .map(|k| if k < 5 { vec![] } else { (0..6).collect() })
            .collect();
        let r = t.restrict(&keep).unwrap();
        let s = SplitInverse::new(&r, 5).unwrap();
        let v = vec![1.0; r.dim()];
        let x = s.apply_right(&v).unwrap();
        let back = r.mul_vec(&x).unwrap();
        assert!(back.iter().all(|&b| (b - 1.0).abs() < 1e-10));
    }
}
