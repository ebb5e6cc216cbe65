//! Mean-drift analysis of the level process.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::model::{build_block, BlockRole, ModelParams};

const DRIFT_MARGIN: f64 = 1e-12;
const WITNESS_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DriftReport {
    pub level: i64,
    pub up_rate: f64,
    pub down_rate: f64,
    pub alpha_or_beta: Vec<f64>,
}

impl DriftReport {
    /// Strict downward drift with the fixed absolute margin.
    pub fn drifts_inward(&self) -> bool {
        self.up_rate + DRIFT_MARGIN < self.down_rate
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct StabilityReport {
    pub stable: bool,
    /// First positive level with strict inward drift.
    pub k_star: i64,
    /// First negative level (closest to zero) with strict inward drift.
    pub l_star: i64,
}

/// `A0 + A1 + A2` at level `k >= 1`.
pub fn drift_generator_a(k: i64, p: &ModelParams) -> Result<DMatrix<f64>> {
    if k < 1 {
        return Err(Error::InvalidBlockLevel { role: "drift_A", level: k });
    }
    Ok(build_block(BlockRole::A0, k, p)?.entries
        + build_block(BlockRole::A1, k, p)?.entries
        + build_block(BlockRole::A2, k, p)?.entries)
}

/// `B0 + B1 + B2` at level `l <= -2`.
pub fn drift_generator_b(l: i64, p: &ModelParams) -> Result<DMatrix<f64>> {
    if l > -2 {
        return Err(Error::InvalidBlockLevel { role: "drift_B", level: l });
    }
    Ok(build_block(BlockRole::B0, l, p)?.entries
        + build_block(BlockRole::B1, l, p)?.entries
        + build_block(BlockRole::B2, l, p)?.entries)
}

/// Stationary vector of a finite conservative irreducible generator.
pub fn stationary_of_finite_generator(g: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = g.nrows();
    if n == 0 || !g.is_square() {
        return Err(Error::Invalid("generator must be square and nonempty".into()));
    }
    let scale = norm_inf(g).max(1.0);
    for r in 0..n {
        let s = g.row(r).sum();
        if s.abs() > 1e-12 * scale {
            return Err(Error::NotConservative { row: r, sum: s });
        }
        for c in 0..n {
            if r != c && g[(r, c)] < 0.0 {
                return Err(Error::Invalid(format!("negative off-diagonal entry at ({r},{c})")));
            }
        }
    }
    if !irreducible(g) {
        return Err(Error::Reducible);
    }
    if n == 1 {
        return Ok(vec![1.0]);
    }
    // alpha G = 0 with the last equation swapped for alpha e = 1.
    let mut a = g.transpose();
    a.row_mut(n - 1).fill(1.0);
    let mut rhs = DVector::zeros(n);
    rhs[n - 1] = 1.0;
    let alpha = a
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Invalid("stationary system is singular".into()))?;
    let resid = (alpha.transpose() * g).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let tol = 1e-12 * scale;
    if resid > tol {
        return Err(Error::Residual {
            what: "stationary vector of finite generator",
            residual: resid,
            tol,
        });
    }
    Ok(alpha.iter().map(|&x| x.max(0.0)).collect())
}

fn irreducible(g: &DMatrix<f64>) -> bool {
    let n = g.nrows();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let w = if forward { g[(u, v)] } else { g[(v, u)] };
                if v != u && w > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|x| x)
    };
    reach(true) && reach(false)
}

/// Outward (up) and inward (down) drift at positive level `k`.
pub fn drift_rates_a(k: i64, p: &ModelParams) -> Result<DriftReport> {
    let alpha = stationary_of_finite_generator(&drift_generator_a(k, p)?)?;
    let n = p.n;
    let mn = p.phases();
    let up = p.lambda1 * alpha[mn - n..].iter().sum::<f64>();
    let last_b_slot: f64 = (0..p.m).map(|i| alpha[i * n + n - 1]).sum();
    let first_a_slot: f64 = alpha[..n].iter().sum();
    let down = p.lambda2 * last_b_slot + (k as usize * p.m) as f64 * p.theta1 * first_a_slot;
    Ok(DriftReport {
        level: k,
        up_rate: up,
        down_rate: down,
        alpha_or_beta: alpha,
    })
}

/// Outward (more B's) and inward drift at negative level `l <= -2`.
pub fn drift_rates_b(l: i64, p: &ModelParams) -> Result<DriftReport> {
    let beta = stationary_of_finite_generator(&drift_generator_b(l, p)?)?;
    let m = p.m;
    let mn = p.phases();
    let up = p.lambda2 * beta[..m].iter().sum::<f64>();
    let full_a: f64 = (0..p.n).map(|b| beta[b * m]).sum();
    let first_b_slot: f64 = beta[mn - m..].iter().sum();
    let down = p.lambda1 * full_a + ((-l) as usize * p.n) as f64 * p.theta2 * first_b_slot;
    Ok(DriftReport {
        level: l,
        up_rate: up,
        down_rate: down,
        alpha_or_beta: beta,
    })
}

/// Scans outward on both axes for the first level with strict inward drift.
pub fn is_stable(p: &ModelParams) -> Result<StabilityReport> {
    let mut k_star = None;
    for k in 1..=WITNESS_CAP as i64 {
        if drift_rates_a(k, p)?.drifts_inward() {
            k_star = Some(k);
            break;
        }
    }
    let mut l_star = None;
    for d in 2..=WITNESS_CAP as i64 {
        if drift_rates_b(-d, p)?.drifts_inward() {
            l_star = Some(-d);
            break;
        }
    }
    Ok(StabilityReport {
        stable: k_star.is_some() && l_star.is_some(),
        k_star: k_star.unwrap_or(0),
        l_star: l_star.unwrap_or(0),
    })
}

/// Drift table for levels `-depth ..= -2` and `1 ..= depth`.
pub fn drift_table(p: &ModelParams, depth: usize) -> Result<Vec<DriftReport>> {
    let mut out = Vec::new();
    for d in (2..=depth as i64).rev() {
        out.push(drift_rates_b(-d, p)?);
    }
    for k in 1..=depth as i64 {
        out.push(drift_rates_a(k, p)?);
    }
    Ok(out)
}
