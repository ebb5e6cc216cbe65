use nalgebra::{DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::linalg::{checked_inverse, BlockTridiag};

/// UL-type factorization `T = (I - R_U) U_D (I - G_L)` of a finite block-tridiagonal matrix.
///
/// `r[k] = upper[k] (-U_{k+1})^{-1}` and `g[k] = (-U_{k+1})^{-1} lower[k]`.
#[derive(Debug, Clone)]
pub struct UlFactorization {
    pub u: Vec<DMatrix<f64>>,
    /// `(-U_k)^{-1}`, kept explicitly for the sweeps.
    pub neg_u_inv: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
}

pub fn ul_factorize(t: &BlockTridiag) -> Result<UlFactorization> {
    let nb = t.blocks();
    let mut u = vec![DMatrix::zeros(0, 0); nb];
    let mut neg_u_inv = vec![DMatrix::zeros(0, 0); nb];
    let mut r = vec![DMatrix::zeros(0, 0); nb.saturating_sub(1)];
    let mut g = vec![DMatrix::zeros(0, 0); nb.saturating_sub(1)];
    u[nb - 1] = t.diag[nb - 1].clone();
    neg_u_inv[nb - 1] = -checked_inverse(&u[nb - 1], nb - 1)?;
    for k in (0..nb - 1).rev() {
        r[k] = &t.upper[k] * &neg_u_inv[k + 1];
        g[k] = &neg_u_inv[k + 1] * &t.lower[k];
        u[k] = &t.diag[k] + &r[k] * &t.lower[k];
        neg_u_inv[k] = -checked_inverse(&u[k], k)?;
    }
    Ok(UlFactorization { u, neg_u_inv, r, g })
}

impl UlFactorization {
    pub fn blocks(&self) -> usize {
        self.u.len()
    }

    pub fn dim(&self) -> usize {
        self.u.iter().map(|b| b.nrows()).sum()
    }

    fn split(&self, v: &[f64]) -> Result<Vec<DVector<f64>>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let mut out = Vec::with_capacity(self.blocks());
        let mut at = 0;
        for b in &self.u {
            out.push(DVector::from_column_slice(&v[at..at + b.nrows()]));
            at += b.nrows();
        }
        Ok(out)
    }

    /// `T^{-1} v`.
    pub fn solve_right(&self, v: &[f64]) -> Result<Vec<f64>> {
        let nb = self.blocks();
        let mut a = self.split(v)?;
        for k in (0..nb - 1).rev() {
            let next = &self.r[k] * &a[k + 1];
            a[k] += next;
        }
        let mut x: Vec<DVector<f64>> = a.iter().zip(&self.neg_u_inv).map(|(ak, ni)| -(ni * ak)).collect();
        for k in 1..nb {
            let prev = &self.g[k - 1] * &x[k - 1];
            x[k] += prev;
        }
        Ok(x.iter().flat_map(|b| b.iter().copied()).collect())
    }

    /// `v T^{-1}` for a row vector.
    pub fn solve_left(&self, v: &[f64]) -> Result<Vec<f64>> {
        let nb = self.blocks();
        let mut z: Vec<RowDVector<f64>> = self.split(v)?.into_iter().map(|c| c.transpose()).collect();
        for k in (0..nb - 1).rev() {
            let next = &z[k + 1] * &self.g[k];
            z[k] += next;
        }
        let mut x: Vec<RowDVector<f64>> = z.iter().zip(&self.neg_u_inv).map(|(zk, ni)| -(zk * ni)).collect();
        for k in 1..nb {
            let prev = &x[k - 1] * &self.r[k - 1];
            x[k] += prev;
        }
        Ok(x.iter().flat_map(|b| b.iter().copied()).collect())
    }

    /// Dense `(I - R_U) U_D (I - G_L)`, for verification.
    pub fn reconstruct(&self) -> BlockTridiag {
        let nb = self.blocks();
        let mut diag = Vec::with_capacity(nb);
        let mut upper = Vec::with_capacity(nb.saturating_sub(1));
        let mut lower = Vec::with_capacity(nb.saturating_sub(1));
        for k in 0..nb {
            let mut d = self.u[k].clone();
            if k + 1 < nb {
                // (-R_k U_{k+1}) (-G_k)
                d += &self.r[k] * &self.u[k + 1] * &self.g[k];
                upper.push(-(&self.r[k] * &self.u[k + 1]));
                lower.push(-(&self.u[k + 1] * &self.g[k]));
            }
            diag.push(d);
        }
        BlockTridiag { diag, upper, lower }
    }
}

/// Convenience wrapper: `T^{-1} v` through a fresh factorization.
pub fn apply_unilateral_inverse(f: &UlFactorization, v: &[f64]) -> Result<Vec<f64>> {
    f.solve_right(v)
}
