use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

/// Position of a block in the level structure of the generator.
///
/// `A0`/`A2` move one level up/down on the A-surplus side, `B0`/`B2` one level
/// further out/back in on the B-surplus side; `A1`, `B1` and `C` stay put.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockRole {
    A0,
    A1,
    A2,
    C,
    B0,
    B1,
    B2,
    B0Boundary,
    B2Boundary,
}

impl BlockRole {
    pub fn name(self) -> &'static str {
        match self {
            BlockRole::A0 => "A0",
            BlockRole::A1 => "A1",
            BlockRole::A2 => "A2",
            BlockRole::C => "C",
            BlockRole::B0 => "B0",
            BlockRole::B1 => "B1",
            BlockRole::B2 => "B2",
            BlockRole::B0Boundary => "B0_boundary",
            BlockRole::B2Boundary => "B2_boundary",
        }
    }

    fn accepts(self, level: i64) -> bool {
        match self {
            BlockRole::A0 => level >= 0,
            BlockRole::A1 | BlockRole::A2 => level >= 1,
            BlockRole::C | BlockRole::B0Boundary => level == 0,
            BlockRole::B0 | BlockRole::B1 => level <= -1,
            BlockRole::B2 => level <= -2,
            BlockRole::B2Boundary => level == -1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelBlock {
    pub role: BlockRole,
    pub level: i64,
    pub entries: DMatrix<f64>,
}

/// Builds one `mn x mn` block of the generator.
pub fn build_block(role: BlockRole, level: i64, p: &ModelParams) -> Result<LevelBlock> {
    if !role.accepts(level) {
        return Err(Error::InvalidBlockLevel {
            role: role.name(),
            level,
        });
    }
    let entries = match role {
        BlockRole::A0 => a_up(p),
        BlockRole::A1 => a_local(level as usize, p),
        BlockRole::C => a_local(0, p),
        BlockRole::A2 => a_down(level as usize, p),
        BlockRole::B0 => b_out(p),
        BlockRole::B1 => b_local((-level) as usize, p),
        BlockRole::B2 => b_in((-level) as usize, p),
        BlockRole::B0Boundary => b0_boundary(p),
        BlockRole::B2Boundary => b2_boundary(p),
    };
    Ok(LevelBlock { role, level, entries })
}

fn a_local(k: usize, p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut a = DMatrix::zeros(m * n, m * n);
    for i in 0..m {
        let count_a = (k * m + i) as f64 * p.theta1;
        for j in 0..n {
            let s = i * n + j;
            a[(s, s)] = -(p.lambda1 + p.lambda2 + j as f64 * p.theta2 + count_a);
            if j + 1 < n {
                a[(s, s + 1)] += p.lambda2;
            }
            if j >= 1 {
                a[(s, s - 1)] += j as f64 * p.theta2;
            }
            if i + 1 < m {
                a[(s, s + n)] += p.lambda1;
            }
            if i >= 1 {
                a[(s, s - n)] += count_a;
            }
        }
    }
    a
}

fn a_up(p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut a = DMatrix::zeros(m * n, m * n);
    for j in 0..n {
        a[((m - 1) * n + j, j)] += p.lambda1;
    }
    a
}

fn a_down(k: usize, p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut a = DMatrix::zeros(m * n, m * n);
    for i in 0..m {
        a[(i * n + n - 1, i * n)] += p.lambda2;
    }
    let renege = (k * m) as f64 * p.theta1;
    for j in 0..n {
        a[(j, (m - 1) * n + j)] += renege;
    }
    a
}

// Negative levels: phase q = b*m + a with b = n-1-j', a = m-1-i.
fn b_local(depth: usize, p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut b = DMatrix::zeros(m * n, m * n);
    for jr in 0..n {
        let j = depth * n + jr;
        let count_b = j as f64 * p.theta2;
        for i in 0..m {
            let q = (n - 1 - jr) * m + (m - 1 - i);
            let count_a = i as f64 * p.theta1;
            b[(q, q)] = -(p.lambda1 + p.lambda2 + count_a + count_b);
            if i + 1 < m {
                b[(q, q - 1)] += p.lambda1;
            }
            if i >= 1 {
                b[(q, q + 1)] += count_a;
            }
            if jr + 1 < n {
                b[(q, q - m)] += p.lambda2;
            }
            if jr >= 1 {
                b[(q, q + m)] += count_b;
            }
        }
    }
    b
}

fn b_out(p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut b = DMatrix::zeros(m * n, m * n);
    for a in 0..m {
        b[(a, (n - 1) * m + a)] += p.lambda2;
    }
    b
}

fn b_in(depth: usize, p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut b = DMatrix::zeros(m * n, m * n);
    for row in 0..n {
        b[(row * m, row * m + m - 1)] += p.lambda1;
    }
    let renege = (depth * n) as f64 * p.theta2;
    for a in 0..m {
        b[((n - 1) * m + a, a)] += renege;
    }
    b
}

fn b0_boundary(p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut b = DMatrix::zeros(m * n, m * n);
    for i in 0..m {
        b[(i * n + n - 1, (n - 1) * m + m - 1 - i)] += p.lambda2;
    }
    b
}

fn b2_boundary(p: &ModelParams) -> DMatrix<f64> {
    let (m, n) = (p.m, p.n);
    let mut b = DMatrix::zeros(m * n, m * n);
    for row in 0..n {
        b[(row * m, n - 1 - row)] += p.lambda1;
    }
    let renege = n as f64 * p.theta2;
    for i in 0..m {
        b[((n - 1) * m + m - 1 - i, i * n + n - 1)] += renege;
    }
    b
}
