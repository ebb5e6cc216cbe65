//! Block-tridiagonal storage with variable block sizes.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};

/// `diag[k]` is block `(k,k)`, `upper[k]` is `(k,k+1)`, `lower[k]` is `(k+1,k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiag {
    pub diag: Vec<DMatrix<f64>>,
    pub upper: Vec<DMatrix<f64>>,
    pub lower: Vec<DMatrix<f64>>,
}

impl BlockTridiag {
    pub fn new(diag: Vec<DMatrix<f64>>, upper: Vec<DMatrix<f64>>, lower: Vec<DMatrix<f64>>) -> Result<Self> {
        let nb = diag.len();
        if nb == 0 {
            return Err(Error::Invalid("block-tridiagonal matrix needs at least one block".into()));
        }
        if upper.len() != nb - 1 || lower.len() != nb - 1 {
            return Err(Error::DimensionMismatch {
                expected: nb - 1,
                got: upper.len().min(lower.len()),
            });
        }
        for (k, d) in diag.iter().enumerate() {
            if !d.is_square() {
                return Err(Error::Invalid(format!("diagonal block {k} is not square")));
            }
        }
        for k in 0..nb - 1 {
            let (a, b) = (diag[k].nrows(), diag[k + 1].nrows());
            if upper[k].shape() != (a, b) || lower[k].shape() != (b, a) {
                return Err(Error::Invalid(format!("off-diagonal blocks at {k} have inconsistent shapes")));
            }
        }
        Ok(Self { diag, upper, lower })
    }

    pub fn blocks(&self) -> usize {
        self.diag.len()
    }

    pub fn block_size(&self, k: usize) -> usize {
        self.diag[k].nrows()
    }

    /// Start offset of every block plus the total dimension at the end.
    pub fn offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.blocks() + 1);
        let mut acc = 0;
        out.push(0);
        for d in &self.diag {
            acc += d.nrows();
            out.push(acc);
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.diag.iter().map(|d| d.nrows()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let off = self.offsets();
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for k in 0..self.blocks() {
            let s = self.block_size(k);
            out.view_mut((off[k], off[k]), (s, s)).copy_from(&self.diag[k]);
            if k + 1 < self.blocks() {
                let t = self.block_size(k + 1);
                out.view_mut((off[k], off[k + 1]), (s, t)).copy_from(&self.upper[k]);
                out.view_mut((off[k + 1], off[k]), (t, s)).copy_from(&self.lower[k]);
            }
        }
        out
    }

    /// Splits a flat vector into per-block pieces.
    pub fn split(&self, v: &[f64]) -> Result<Vec<DVector<f64>>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let off = self.offsets();
        Ok((0..self.blocks())
            .map(|k| DVector::from_column_slice(&v[off[k]..off[k + 1]]))
            .collect())
    }

    /// `T v` for a column vector.
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let parts = self.split(v)?;
        let nb = self.blocks();
        let mut out = Vec::with_capacity(self.dim());
        for k in 0..nb {
            let mut y = &self.diag[k] * &parts[k];
            if k + 1 < nb {
                y += &self.upper[k] * &parts[k + 1];
            }
            if k >= 1 {
                y += &self.lower[k - 1] * &parts[k - 1];
            }
            out.extend(y.iter());
        }
        Ok(out)
    }

    /// `v T` for a row vector.
    pub fn vec_mul(&self, v: &[f64]) -> Result<Vec<f64>> {
        let parts: Vec<RowDVector<f64>> = self.split(v)?.into_iter().map(|c| c.transpose()).collect();
        let nb = self.blocks();
        let mut out = Vec::with_capacity(self.dim());
        for k in 0..nb {
            let mut y = &parts[k] * &self.diag[k];
            if k >= 1 {
                y += &parts[k - 1] * &self.upper[k - 1];
            }
            if k + 1 < nb {
                y += &parts[k + 1] * &self.lower[k];
            }
            out.extend(y.iter());
        }
        Ok(out)
    }

    /// Row sums of the assembled matrix.
    pub fn row_sums(&self) -> Vec<f64> {
        let ones = vec![1.0; self.dim()];
        self.mul_vec(&ones).expect("conformal")
    }

    /// The same matrix with the block order reversed.
    pub fn reversed(&self) -> Self {
        Self {
            diag: self.diag.iter().rev().cloned().collect(),
            upper: self.lower.iter().rev().cloned().collect(),
            lower: self.upper.iter().rev().cloned().collect(),
        }
    }

    /// Principal submatrix keeping `keep[k]` (local indices) inside block `k`.
    ///
    /// Blocks may become empty; they are kept so block indices stay aligned.
    pub fn restrict(&self, keep: &[Vec<usize>]) -> Result<Self> {
        if keep.len() != self.blocks() {
            return Err(Error::DimensionMismatch {
                expected: self.blocks(),
                got: keep.len(),
            });
        }
        let pick = |m: &DMatrix<f64>, rows: &[usize], cols: &[usize]| {
            DMatrix::from_fn(rows.len(), cols.len(), |r, c| m[(rows[r], cols[c])])
        };
        let nb = self.blocks();
        let diag = (0..nb).map(|k| pick(&self.diag[k], &keep[k], &keep[k])).collect();
        let upper = (0..nb - 1)
            .map(|k| pick(&self.upper[k], &keep[k], &keep[k + 1]))
            .collect();
        let lower = (0..nb - 1)
            .map(|k| pick(&self.lower[k], &keep[k + 1], &keep[k]))
            .collect();
        Ok(Self { diag, upper, lower })
    }
}

/// Infinity norm of a matrix (maximum absolute row sum).
pub fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, &x| a.max(x.abs()))
}

/// Inverse of a small dense block with a relative pivot check.
pub fn checked_inverse(m: &DMatrix<f64>, index: usize) -> Result<DMatrix<f64>> {
    if m.nrows() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let scale = norm_inf(m).max(f64::MIN_POSITIVE);
    let pivot = (0..u.nrows()).map(|k| u[(k, k)].abs()).fold(f64::INFINITY, f64::min) / scale;
    if !(pivot >= 1e-13) {
        return Err(Error::SingularBlock { index, pivot });
    }
    lu.try_inverse().ok_or(Error::SingularBlock { index, pivot })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> BlockTridiag {
        let d0 = DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 0.5, -2.0]);
        let d1 = DMatrix::from_row_slice(1, 1, &[-4.0]);
        let d2 = DMatrix::from_row_slice(2, 2, &[-5.0, 2.0, 1.0, -6.0]);
        let u0 = DMatrix::from_row_slice(2, 1, &[1.0, 0.5]);
        let l0 = DMatrix::from_row_slice(1, 2, &[2.0, 1.0]);
        let u1 = DMatrix::from_row_slice(1, 2, &[0.5, 0.25]);
        let l1 = DMatrix::from_row_slice(2, 1, &[1.0, 3.0]);
        BlockTridiag::new(vec![d0, d1, d2], vec![u0, u1], vec![l0, l1]).unwrap()
    }

    #[test]
    fn products_match_dense() {
        let t = sample();
        let dense = t.to_dense();
        let v = [1.0, -2.0, 0.5, 3.0, -1.0];
        let right = t.mul_vec(&v).unwrap();
        let left = t.vec_mul(&v).unwrap();
        let dv = DVector::from_column_slice(&v);
        let want_r = &dense * &dv;
        let want_l = dv.transpose() * &dense;
        for k in 0..5 {
            assert!((right[k] - want_r[k]).abs() < 1e-14);
            assert!((left[k] - want_l[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn reversed_is_permuted_dense() {
        let t = sample();
        let r = t.reversed().to_dense();
        let d = t.to_dense();
        // block order 2,1,0 with sizes 2,1,2
        let perm = [3, 4, 2, 0, 1];
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(r[(a, b)], d[(perm[a], perm[b])]);
            }
        }
    }

    #[test]
    fn restrict_picks_principal_submatrix() {
        let t = sample();
        let s = t.restrict(&[vec![1], vec![], vec![0, 1]]).unwrap();
        let d = t.to_dense();
        let sd = s.to_dense();
        let idx = [1, 3, 4];
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(sd[(a, b)], d[(idx[a], idx[b])]);
            }
        }
    }

    #[test]
    fn singular_block_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(checked_inverse(&m, 7), Err(Error::SingularBlock { index: 7, .. })));
    }

    #[test]
    fn shape_validation() {
        let d = DMatrix::zeros(2, 2);
        assert!(BlockTridiag::new(vec![d.clone(), d.clone()], vec![], vec![]).is_err());
        assert!(BlockTridiag::new(vec![], vec![], vec![]).is_err());
    }
}
