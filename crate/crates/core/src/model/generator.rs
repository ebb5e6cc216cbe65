use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{build_block, coords_to_levelphase, levelphase_to_coords, BlockRole, LevelPhase, ModelParams, StateCoords};
use crate::error::{Error, Result};
use crate::linalg::BlockTridiag;

/// Retained levels `-k_neg ..= k_pos`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub k_neg: usize,
    pub k_pos: usize,
}

impl Window {
    pub fn new(k_neg: usize, k_pos: usize) -> Self {
        Self { k_neg, k_pos }
    }

    pub fn levels(&self) -> usize {
        self.k_neg + self.k_pos + 1
    }

    pub fn contains(&self, level: i64) -> bool {
        level >= -(self.k_neg as i64) && level <= self.k_pos as i64
    }

    /// Block index of `level` inside the window.
    pub fn index(&self, level: i64) -> Option<usize> {
        self.contains(level).then(|| (level + self.k_neg as i64) as usize)
    }

    pub fn level(&self, index: usize) -> i64 {
        index as i64 - self.k_neg as i64
    }
}

/// How transitions leaving the window are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Closure {
    /// Outward jumps are removed and their rate folded back into the diagonal.
    Reflecting,
}

#[derive(Debug, Clone)]
pub struct TruncatedGenerator {
    pub params: ModelParams,
    pub window: Window,
    pub closure: Closure,
    pub blocks: BlockTridiag,
    /// Outward rate removed from each row by the closure.
    pub defect: Vec<f64>,
}

pub fn build_truncated_generator(p: &ModelParams, k_neg: usize, k_pos: usize) -> Result<TruncatedGenerator> {
    if k_neg < 2 || k_pos < 2 {
        return Err(Error::WindowTooSmall { k_neg, k_pos });
    }
    let window = Window::new(k_neg, k_pos);
    let blk = |role, level| build_block(role, level, p).map(|b| b.entries);
    let nb = window.levels();
    let mut diag = Vec::with_capacity(nb);
    let mut upper = Vec::with_capacity(nb - 1);
    let mut lower = Vec::with_capacity(nb - 1);
    for idx in 0..nb {
        let level = window.level(idx);
        let d = match level {
            0 => blk(BlockRole::C, 0)?,
            l if l > 0 => blk(BlockRole::A1, l)?,
            l => blk(BlockRole::B1, l)?,
        };
        diag.push(d);
        if idx + 1 < nb {
            upper.push(match level {
                l if l >= 0 => blk(BlockRole::A0, l)?,
                -1 => blk(BlockRole::B2Boundary, -1)?,
                l => blk(BlockRole::B2, l)?,
            });
            let below = level + 1;
            lower.push(match below {
                l if l >= 1 => blk(BlockRole::A2, l)?,
                0 => blk(BlockRole::B0Boundary, 0)?,
                l => blk(BlockRole::B0, l)?,
            });
        }
    }

    let mn = p.phases();
    let mut defect = vec![0.0; nb * mn];
    let top = blk(BlockRole::A0, k_pos as i64)?;
    let bottom = blk(BlockRole::B0, -(k_neg as i64))?;
    fold_outward(&mut diag[nb - 1], &top, &mut defect[(nb - 1) * mn..]);
    fold_outward(&mut diag[0], &bottom, &mut defect[..mn]);

    Ok(TruncatedGenerator {
        params: *p,
        window,
        closure: Closure::Reflecting,
        blocks: BlockTridiag::new(diag, upper, lower)?,
        defect,
    })
}

fn fold_outward(diag: &mut DMatrix<f64>, dropped: &DMatrix<f64>, defect: &mut [f64]) {
    for r in 0..diag.nrows() {
        let lost = dropped.row(r).sum();
        diag[(r, r)] += lost;
        defect[r] = lost;
    }
}

impl TruncatedGenerator {
    pub fn dim(&self) -> usize {
        self.blocks.dim()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.blocks.to_dense()
    }

    /// Global row/column index of a state, if it lies inside the window.
    pub fn index_of(&self, s: StateCoords) -> Option<usize> {
        let lp = coords_to_levelphase(s, &self.params).ok()?;
        let b = self.window.index(lp.level)?;
        Some(b * self.params.phases() + lp.phase)
    }

    pub fn coords_of(&self, index: usize) -> Result<StateCoords> {
        let mn = self.params.phases();
        if index >= self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: index,
            });
        }
        levelphase_to_coords(
            LevelPhase {
                level: self.window.level(index / mn),
                phase: index % mn,
            },
            &self.params,
        )
    }

    /// All states in global index order.
    pub fn states(&self) -> Vec<StateCoords> {
        (0..self.dim()).map(|k| self.coords_of(k).expect("in range")).collect()
    }

    /// Largest absolute row sum over rows whose level is strictly inside the window.
    pub fn interior_row_defect(&self) -> f64 {
        let mn = self.params.phases();
        let sums = self.blocks.row_sums();
        sums[mn..sums.len() - mn].iter().fold(0.0, |a, &x| a.max(x.abs()))
    }
}
