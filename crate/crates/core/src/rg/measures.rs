use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ul_factorize;
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, BlockTridiag};
use crate::model::{build_block, BlockRole, ModelParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    Positive,
    Negative,
}

impl Axis {
    fn level(self, depth: usize) -> i64 {
        match self {
            Axis::Positive => depth as i64,
            Axis::Negative => -(depth as i64),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct RgOptions {
    /// Initial level cap; doubled until the leading rate matrices settle.
    pub cap: usize,
    pub residual_tol: f64,
    pub convergence_tol: f64,
    pub max_cap: usize,
}

impl Default for RgOptions {
    fn default() -> Self {
        Self {
            cap: 16,
            residual_tol: 1e-12,
            convergence_tol: 1e-10,
            max_cap: 1 << 16,
        }
    }
}

/// Rate (`R`), first-passage (`G`) and censored-generator (`U`) matrices along one axis.
///
/// Indices are depths `d = |level|`: `r[d]` for `d < cap`, `g[d-1]` for
/// `1 <= d <= cap`, `u[d]` for `d <= cap`.
#[derive(Debug, Clone)]
pub struct RgMeasures {
    pub axis: Axis,
    pub cap: usize,
    pub r: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
    pub u: Vec<DMatrix<f64>>,
    /// Per-depth residual of the rate equation, same indexing as `r`.
    pub residual_r: Vec<f64>,
    /// Per-depth residual of the first-passage equation, same indexing as `g`.
    pub residual_g: Vec<f64>,
    pub residual: f64,
}

impl RgMeasures {
    fn depth(&self, level: i64) -> Result<usize> {
        let ok = match self.axis {
            Axis::Positive => level >= 0,
            Axis::Negative => level <= 0,
        };
        if !ok {
            return Err(Error::InvalidBlockLevel { role: "rg", level });
        }
        Ok(level.unsigned_abs() as usize)
    }

    /// Rate matrix from `level` one step outward.
    pub fn r_at(&self, level: i64) -> Result<&DMatrix<f64>> {
        let d = self.depth(level)?;
        self.r.get(d).ok_or(Error::CapExhausted { cap: self.cap })
    }

    pub fn g_at(&self, level: i64) -> Result<&DMatrix<f64>> {
        let d = self.depth(level)?;
        if d == 0 {
            return Err(Error::InvalidBlockLevel { role: "G", level });
        }
        self.g.get(d - 1).ok_or(Error::CapExhausted { cap: self.cap })
    }

    pub fn u_at(&self, level: i64) -> Result<&DMatrix<f64>> {
        let d = self.depth(level)?;
        self.u.get(d).ok_or(Error::CapExhausted { cap: self.cap })
    }
}

struct AxisBlocks<'a> {
    axis: Axis,
    p: &'a ModelParams,
}

impl AxisBlocks<'_> {
    fn get(&self, role: BlockRole, level: i64) -> DMatrix<f64> {
        build_block(role, level, self.p).expect("role/level consistent by construction").entries
    }

    fn outward(&self, d: usize) -> DMatrix<f64> {
        match (self.axis, d) {
            (Axis::Positive, _) => self.get(BlockRole::A0, d as i64),
            (Axis::Negative, 0) => self.get(BlockRole::B0Boundary, 0),
            (Axis::Negative, _) => self.get(BlockRole::B0, self.axis.level(d)),
        }
    }

    fn local(&self, d: usize) -> DMatrix<f64> {
        match (self.axis, d) {
            (_, 0) => self.get(BlockRole::C, 0),
            (Axis::Positive, _) => self.get(BlockRole::A1, d as i64),
            (Axis::Negative, _) => self.get(BlockRole::B1, self.axis.level(d)),
        }
    }

    fn inward(&self, d: usize) -> DMatrix<f64> {
        match (self.axis, d) {
            (Axis::Positive, _) => self.get(BlockRole::A2, d as i64),
            (Axis::Negative, 1) => self.get(BlockRole::B2Boundary, -1),
            (Axis::Negative, _) => self.get(BlockRole::B2, self.axis.level(d)),
        }
    }
}

fn measures_at_cap(blocks: &AxisBlocks, cap: usize) -> Result<RgMeasures> {
    // Depths 1..=cap+1, killed beyond the cap.
    let diag = (1..=cap + 1).map(|d| blocks.local(d)).collect();
    let upper = (1..=cap).map(|d| blocks.outward(d)).collect();
    let lower = (2..=cap + 1).map(|d| blocks.inward(d)).collect();
    let f = ul_factorize(&BlockTridiag::new(diag, upper, lower)?)?;

    let out0 = blocks.outward(0);
    let in1 = blocks.inward(1);
    let r0 = &out0 * &f.neg_u_inv[0];
    let g1 = &f.neg_u_inv[0] * &in1;
    let u0 = blocks.local(0) + &r0 * &in1;

    let mut r = Vec::with_capacity(cap + 1);
    r.push(r0);
    r.extend(f.r.iter().cloned());
    let mut g = Vec::with_capacity(cap + 1);
    g.push(g1);
    g.extend(f.g.iter().cloned());
    let mut u = Vec::with_capacity(cap + 1);
    u.push(u0);
    u.extend(f.u[..cap].iter().cloned());

    let mut residual_r = Vec::with_capacity(cap);
    for d in 0..cap {
        let res = blocks.outward(d) + &r[d] * (blocks.local(d + 1) + &r[d + 1] * blocks.inward(d + 2));
        residual_r.push(norm_inf(&res));
    }
    let mut residual_g = Vec::with_capacity(cap);
    for d in 1..=cap {
        let gd = &g[d - 1];
        let res = blocks.outward(d) * &g[d] * gd + blocks.local(d) * gd + blocks.inward(d);
        residual_g.push(norm_inf(&res));
    }
    r.truncate(cap);
    g.truncate(cap);
    let residual = residual_r.iter().chain(&residual_g).fold(0.0f64, |a, &b| a.max(b));
    Ok(RgMeasures {
        axis: blocks.axis,
        cap,
        r,
        g,
        u,
        residual_r,
        residual_g,
        residual,
    })
}

fn compute(axis: Axis, p: &ModelParams, opts: &RgOptions) -> Result<RgMeasures> {
    if opts.cap < 3 {
        return Err(Error::Invalid(format!("level cap must be >= 3, got {}", opts.cap)));
    }
    let blocks = AxisBlocks { axis, p };
    let mut cap = opts.cap;
    let mut prev = measures_at_cap(&blocks, cap)?;
    loop {
        let next_cap = cap * 2;
        if next_cap > opts.max_cap {
            return Err(Error::CapExhausted { cap });
        }
        let next = measures_at_cap(&blocks, next_cap)?;
        let change = (0..2).map(|d| norm_inf(&(&next.r[d] - &prev.r[d]))).fold(0.0, f64::max);
        cap = next_cap;
        prev = next;
        if change < opts.convergence_tol {
            break;
        }
    }
    let mut worst = 0.0f64;
    for (k, &res) in prev.residual_r.iter().enumerate() {
        let scale = norm_inf(&blocks.local(k + 1)).max(1.0);
        worst = worst.max(res / scale);
    }
    for (k, &res) in prev.residual_g.iter().enumerate() {
        let scale = norm_inf(&blocks.local(k + 1)).max(1.0);
        worst = worst.max(res / scale);
    }
    if worst > opts.residual_tol {
        return Err(Error::Residual {
            what: "rate/first-passage equations",
            residual: worst,
            tol: opts.residual_tol,
        });
    }
    Ok(prev)
}

/// Rate sequences on levels `0, 1, 2, ...`.
pub fn compute_rg_positive(p: &ModelParams, opts: &RgOptions) -> Result<RgMeasures> {
    compute(Axis::Positive, p, opts)
}

/// Rate sequences on levels `0, -1, -2, ...`.
pub fn compute_rg_negative(p: &ModelParams, opts: &RgOptions) -> Result<RgMeasures> {
    compute(Axis::Negative, p, opts)
}
