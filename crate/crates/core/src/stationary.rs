//! Boundary equations, level-by-level assembly and queue-length moments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::norm_inf;
use crate::model::{build_block, levelphase_to_coords, BlockRole, LevelPhase, ModelParams, StateCoords, Window};
use crate::rg::{Axis, RgMeasures};

/// Unnormalized vectors at levels -1, 0, 1, scaled so the largest entry is 1.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Boundary {
    pub minus1: Vec<f64>,
    pub zero: Vec<f64>,
    pub plus1: Vec<f64>,
    /// Largest residual of the three block equations.
    pub residual: f64,
}

impl Boundary {
    #[cfg(test)]
    fn flat(&self) -> Vec<f64> {
        let mut v = self.minus1.clone();
        v.extend(&self.zero);
        v.extend(&self.plus1);
        v
    }

    fn from_flat(x: &[f64], mn: usize, residual: f64) -> Self {
        Self {
            minus1: x[..mn].to_vec(),
            zero: x[mn..2 * mn].to_vec(),
            plus1: x[2 * mn..].to_vec(),
            residual,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StationaryDist {
    pub params: ModelParams,
    pub window: Window,
    /// Probability vector of each level, indexed by `level + k_neg`.
    pub pi_levels: Vec<Vec<f64>>,
    pub c: f64,
    /// Geometric-extrapolation estimate of the mass outside the window.
    pub tail_mass_bound: f64,
    pub boundary: Boundary,
}

fn check_axes(pos: &RgMeasures, neg: &RgMeasures) -> Result<()> {
    if pos.axis != Axis::Positive || neg.axis != Axis::Negative {
        return Err(Error::Invalid("rate measures passed on the wrong axes".into()));
    }
    Ok(())
}

/// The `3mn x 3mn` homogeneous system `x M = 0` for `x = (v_{-1}, v_0, v_1)`.
pub fn boundary_matrix(p: &ModelParams, pos: &RgMeasures, neg: &RgMeasures) -> Result<DMatrix<f64>> {
    check_axes(pos, neg)?;
    let mn = p.phases();
    let b = |role, level| build_block(role, level, p).map(|x| x.entries);
    let mut m = DMatrix::zeros(3 * mn, 3 * mn);
    let mut put = |r: usize, c: usize, blk: &DMatrix<f64>| {
        m.view_mut((r * mn, c * mn), (mn, mn)).copy_from(blk);
    };
    put(0, 0, &(b(BlockRole::B1, -1)? + neg.r_at(-1)? * b(BlockRole::B2, -2)?));
    put(0, 1, &b(BlockRole::B2Boundary, -1)?);
    put(1, 0, &b(BlockRole::B0Boundary, 0)?);
    put(1, 1, &b(BlockRole::C, 0)?);
    put(1, 2, &b(BlockRole::A0, 0)?);
    put(2, 1, &b(BlockRole::A2, 1)?);
    put(2, 2, &(b(BlockRole::A1, 1)? + pos.r_at(1)? * b(BlockRole::A2, 2)?));
    Ok(m)
}

fn finish(x: DVector<f64>, m: &DMatrix<f64>, mn: usize) -> Result<Boundary> {
    let top = x.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::DegenerateBoundary("null vector is zero or not finite".into()));
    }
    let sign = if x.sum() < 0.0 { -1.0 } else { 1.0 };
    let x = x * (sign / top);
    if x.iter().any(|&v| v < -1e-10) {
        return Err(Error::DegenerateBoundary("null vector has negative entries".into()));
    }
    let x = x.map(|v| v.max(0.0));
    let residual = (x.transpose() * m).iter().fold(0.0f64, |a, &v| a.max(v.abs()));
    let tol = 1e-10 * norm_inf(m).max(1.0);
    if residual > tol {
        return Err(Error::Residual {
            what: "boundary equations",
            residual,
            tol,
        });
    }
    Ok(Boundary::from_flat(x.as_slice(), mn, residual))
}

/// Pinned solve: one equation replaced by "first entry of `v_0` equals 1".
pub fn solve_boundary(p: &ModelParams, pos: &RgMeasures, neg: &RgMeasures) -> Result<Boundary> {
    let m = boundary_matrix(p, pos, neg)?;
    let mn = p.phases();
    let mut a = m.transpose();
    a.row_mut(0).fill(0.0);
    a[(0, mn)] = 1.0;
    let mut rhs = DVector::zeros(3 * mn);
    rhs[0] = 1.0;
    let pinned = a.lu().solve(&rhs).ok_or_else(|| Error::DegenerateBoundary("pinned system is singular".into()));
    match pinned.and_then(|x| finish(x, &m, mn)) {
        Ok(b) => Ok(b),
        Err(_) => solve_boundary_svd(p, pos, neg),
    }
}

/// Nullspace through the singular value decomposition, with a rank check.
pub fn solve_boundary_svd(p: &ModelParams, pos: &RgMeasures, neg: &RgMeasures) -> Result<Boundary> {
    let m = boundary_matrix(p, pos, neg)?;
    let mn = p.phases();
    let svd = m.transpose().svd(false, true);
    let sv = &svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let smax = sv[order[sv.len() - 1]];
    let (s0, s1) = (sv[order[0]], sv[order[1]]);
    if s0 > 1e-9 * smax || s1 < 1e-12 * smax {
        return Err(Error::DegenerateBoundary(format!(
            "numerical rank is not one short of full (smallest singular values {s0:e}, {s1:e})"
        )));
    }
    let v_t = svd.v_t.ok_or_else(|| Error::DegenerateBoundary("svd failed".into()))?;
    let x = v_t.row(order[0]).transpose();
    finish(x, &m, mn)
}

/// Extends the boundary vectors by rate products over `window` and normalizes.
pub fn assemble_stationary(
    p: &ModelParams,
    pos: &RgMeasures,
    neg: &RgMeasures,
    boundary: &Boundary,
    window: Window,
) -> Result<StationaryDist> {
    check_axes(pos, neg)?;
    if window.k_neg < 2 || window.k_pos < 2 {
        return Err(Error::WindowTooSmall {
            k_neg: window.k_neg,
            k_pos: window.k_pos,
        });
    }
    let row = |v: &[f64]| DVector::from_column_slice(v).transpose();
    let mut up = vec![row(&boundary.plus1)];
    for k in 1..window.k_pos as i64 {
        let next = up.last().unwrap() * pos.r_at(k)?;
        up.push(next);
    }
    let mut down = vec![row(&boundary.minus1)];
    for d in 1..window.k_neg as i64 {
        let next = down.last().unwrap() * neg.r_at(-d)?;
        down.push(next);
    }
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(window.levels());
    for v in down.iter().rev() {
        levels.push(v.iter().copied().collect());
    }
    levels.push(boundary.zero.clone());
    for v in &up {
        levels.push(v.iter().copied().collect());
    }
    let total: f64 = levels.iter().flatten().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::TailNotConverged { levels: window.levels() });
    }
    let c = 1.0 / total;
    for l in &mut levels {
        for x in l.iter_mut() {
            *x *= c;
        }
    }
    let mass = |l: &Vec<f64>| l.iter().sum::<f64>();
    let extrapolate = |last: f64, prev: f64| {
        if prev > 0.0 && last < prev {
            let q = last / prev;
            last * q / (1.0 - q)
        } else {
            last
        }
    };
    let nl = levels.len();
    let tail_mass_bound =
        extrapolate(mass(&levels[0]), mass(&levels[1])) + extrapolate(mass(&levels[nl - 1]), mass(&levels[nl - 2]));
    Ok(StationaryDist {
        params: *p,
        window,
        pi_levels: levels,
        c,
        tail_mass_bound,
        boundary: boundary.clone(),
    })
}

impl StationaryDist {
    pub fn level(&self, level: i64) -> Option<&[f64]> {
        self.window.index(level).map(|k| self.pi_levels[k].as_slice())
    }

    /// Stationary vector in the global index order of the truncated generator.
    pub fn flat(&self) -> Vec<f64> {
        self.pi_levels.iter().flatten().copied().collect()
    }

    pub fn total(&self) -> f64 {
        self.pi_levels.iter().flatten().sum()
    }

    /// Mass held in the outermost `count` levels on each side.
    pub fn edge_mass(&self, count: usize) -> (f64, f64) {
        let nl = self.pi_levels.len();
        let sum = |r: std::ops::Range<usize>| r.map(|k| self.pi_levels[k].iter().sum::<f64>()).sum::<f64>();
        (sum(0..count.min(nl)), sum(nl.saturating_sub(count)..nl))
    }

    /// Iterates `(state, probability)` over the window.
    pub fn states(&self) -> impl Iterator<Item = (StateCoords, f64)> + '_ {
        self.pi_levels.iter().enumerate().flat_map(move |(k, v)| {
            let level = self.window.level(k);
            v.iter().enumerate().map(move |(phase, &pr)| {
                let s = levelphase_to_coords(LevelPhase { level, phase }, &self.params).expect("phase in range");
                (s, pr)
            })
        })
    }

    /// The same distribution seen from the model with A and B exchanged.
    pub fn swapped(&self) -> StationaryDist {
        let p = self.params.swapped();
        let window = Window::new(self.window.k_pos, self.window.k_neg);
        let pi_levels = (0..window.levels())
            .map(|k| {
                let level = window.level(k);
                (0..p.phases())
                    .map(|phase| {
                        let s = levelphase_to_coords(LevelPhase { level, phase }, &p).expect("phase in range");
                        self.prob(StateCoords::new(s.j, s.i))
                    })
                    .collect()
            })
            .collect();
        StationaryDist {
            params: p,
            window,
            pi_levels,
            c: self.c,
            tail_mass_bound: self.tail_mass_bound,
            boundary: self.boundary.clone(),
        }
    }

    pub fn prob(&self, s: StateCoords) -> f64 {
        match crate::model::coords_to_levelphase(s, &self.params) {
            Ok(lp) => self.level(lp.level).map_or(0.0, |v| v[lp.phase]),
            Err(_) => 0.0,
        }
    }
}

/// Mean number of waiting A-customers.
pub fn mean_queue_length_a(dist: &StationaryDist) -> f64 {
    dist.states().map(|(s, pr)| s.i as f64 * pr).sum()
}

/// Mean number of waiting B-customers.
pub fn mean_queue_length_b(dist: &StationaryDist) -> f64 {
    dist.states().map(|(s, pr)| s.j as f64 * pr).sum()
}
