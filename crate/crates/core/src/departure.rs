//! Marked departure process: matrices split by departure type, rates and mark probabilities.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::BlockTridiag;
use crate::model::{build_truncated_generator, coords_to_levelphase, transitions, Mark, ModelParams, Window};
use crate::rg::SplitInverse;
use crate::stationary::StationaryDist;

/// Longest mark sequence accepted by [`consecutive_mark_probability`].
pub const MAX_SEQUENCE: usize = 8;

#[derive(Debug, Clone)]
pub struct MmapSet {
    pub params: ModelParams,
    pub window: Window,
    pub q: BlockTridiag,
    /// Transitions without a departure.
    pub d0: BlockTridiag,
    pub da: BlockTridiag,
    pub db: BlockTridiag,
    pub dab: BlockTridiag,
}

fn zeros_like(t: &BlockTridiag) -> BlockTridiag {
    let z = |m: &nalgebra::DMatrix<f64>| nalgebra::DMatrix::zeros(m.nrows(), m.ncols());
    BlockTridiag {
        diag: t.diag.iter().map(z).collect(),
        upper: t.upper.iter().map(z).collect(),
        lower: t.lower.iter().map(z).collect(),
    }
}

fn entry(t: &mut BlockTridiag, rb: usize, cb: usize, r: usize, c: usize) -> &mut f64 {
    if rb == cb {
        &mut t.diag[rb][(r, c)]
    } else if cb == rb + 1 {
        &mut t.upper[rb][(r, c)]
    } else {
        &mut t.lower[cb][(r, c)]
    }
}

fn get(t: &BlockTridiag, rb: usize, cb: usize, r: usize, c: usize) -> f64 {
    if rb == cb {
        t.diag[rb][(r, c)]
    } else if cb == rb + 1 {
        t.upper[rb][(r, c)]
    } else {
        t.lower[cb][(r, c)]
    }
}

/// Splits the truncated generator by the physical event behind every transition.
pub fn build_mmap(p: &ModelParams, window: Window) -> Result<MmapSet> {
    let gen = build_truncated_generator(p, window.k_neg, window.k_pos)?;
    let q = gen.blocks;
    let mut d0 = zeros_like(&q);
    let mut da = zeros_like(&q);
    let mut db = zeros_like(&q);
    let mut dab = zeros_like(&q);
    let mn = p.phases();
    for rb in 0..q.blocks() {
        for r in 0..mn {
            let s = gen_coords(p, window, rb, r)?;
            for t in transitions(s, p) {
                let lp = coords_to_levelphase(t.to, p)?;
                let Some(cb) = window.index(lp.level) else {
                    if t.mark.is_some() {
                        return Err(mismatch(s, t.to));
                    }
                    continue;
                };
                if cb + 1 < rb || cb > rb + 1 {
                    return Err(mismatch(s, t.to));
                }
                let target = match t.mark {
                    None => &mut d0,
                    Some(Mark::A) => &mut da,
                    Some(Mark::B) => &mut db,
                    Some(Mark::AB) => &mut dab,
                };
                *entry(target, rb, cb, r, lp.phase) += t.rate;
            }
            d0.diag[rb][(r, r)] = q.diag[rb][(r, r)];
        }
    }
    for rb in 0..q.blocks() {
        for cb in rb.saturating_sub(1)..(rb + 2).min(q.blocks()) {
            for r in 0..mn {
                for c in 0..mn {
                    let sum = get(&d0, rb, cb, r, c) + get(&da, rb, cb, r, c) + get(&db, rb, cb, r, c)
                        + get(&dab, rb, cb, r, c);
                    if sum != get(&q, rb, cb, r, c) {
                        return Err(mismatch(gen_coords(p, window, rb, r)?, gen_coords(p, window, cb, c)?));
                    }
                }
            }
        }
    }
    Ok(MmapSet {
        params: *p,
        window,
        q,
        d0,
        da,
        db,
        dab,
    })
}

fn gen_coords(p: &ModelParams, w: Window, block: usize, phase: usize) -> Result<crate::model::StateCoords> {
    crate::model::levelphase_to_coords(
        crate::model::LevelPhase {
            level: w.level(block),
            phase,
        },
        p,
    )
}

fn mismatch(from: crate::model::StateCoords, to: crate::model::StateCoords) -> Error {
    Error::GeneratorMismatch {
        from_i: from.i,
        from_j: from.j,
        to_i: to.i,
        to_j: to.j,
    }
}

impl MmapSet {
    pub fn marked(&self, mark: Mark) -> &BlockTridiag {
        match mark {
            Mark::A => &self.da,
            Mark::B => &self.db,
            Mark::AB => &self.dab,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DepartureRates {
    pub mu_a_impatient: f64,
    pub mu_b_impatient: f64,
    pub mu_ab: f64,
    pub mu_a_total: f64,
    pub mu_b_total: f64,
    pub mu_all: f64,
}

fn check_window(dist: &StationaryDist, mmap: &MmapSet) -> Result<()> {
    if dist.window != mmap.window || dist.params != mmap.params {
        return Err(Error::Invalid("stationary vector and marked matrices use different windows".into()));
    }
    Ok(())
}

fn rate(pi: &[f64], d: &BlockTridiag) -> f64 {
    d.vec_mul(pi).expect("conformal").iter().sum()
}

pub fn departure_rates(dist: &StationaryDist, mmap: &MmapSet) -> Result<DepartureRates> {
    check_window(dist, mmap)?;
    let pi = dist.flat();
    let a = rate(&pi, &mmap.da);
    let b = rate(&pi, &mmap.db);
    let ab = rate(&pi, &mmap.dab);
    let (m, n) = (mmap.params.m as f64, mmap.params.n as f64);
    Ok(DepartureRates {
        mu_a_impatient: a,
        mu_b_impatient: b,
        mu_ab: ab,
        mu_a_total: a + m * ab,
        mu_b_total: b + n * ab,
        mu_all: a + b + (m + n) * ab,
    })
}

/// Probabilities indexed by [`Mark::index`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarkProbabilities {
    /// Type of the last departure before an arbitrary time.
    pub backward: [f64; 3],
    /// Type of the first departure after an arbitrary time.
    pub forward: [f64; 3],
    /// Type of an arbitrary departure.
    pub at_departure: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Backward,
    Forward,
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "backward" => Ok(Direction::Backward),
            "forward" => Ok(Direction::Forward),
            other => Err(Error::Invalid(format!("unknown direction '{other}'"))),
        }
    }
}

/// Stationary vector plus a factorization of `D0`, shared by all mark queries.
pub struct MarkCalculator<'a> {
    mmap: &'a MmapSet,
    pi: Vec<f64>,
    d0_inv: SplitInverse,
}

impl<'a> MarkCalculator<'a> {
    pub fn new(dist: &StationaryDist, mmap: &'a MmapSet) -> Result<Self> {
        check_window(dist, mmap)?;
        let d0_inv = SplitInverse::new(&mmap.d0, mmap.window.k_neg + 1)?;
        Ok(Self {
            mmap,
            pi: dist.flat(),
            d0_inv,
        })
    }

    /// `x (-D0)^{-1}`.
    fn occupy_left(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.d0_inv.apply_left(x)?.into_iter().map(|v| -v).collect())
    }

    pub fn probabilities(&self) -> Result<MarkProbabilities> {
        let ones = vec![1.0; self.pi.len()];
        let hold: Vec<f64> = self.d0_inv.apply_right(&ones)?.into_iter().map(|v| -v).collect();
        let after = self.occupy_left(&self.pi)?;
        let mut out = MarkProbabilities {
            backward: [0.0; 3],
            forward: [0.0; 3],
            at_departure: [0.0; 3],
        };
        for mark in Mark::ALL {
            let d = self.mmap.marked(mark);
            let landed = d.vec_mul(&self.pi)?;
            out.backward[mark.index()] = landed.iter().zip(&hold).map(|(a, b)| a * b).sum();
            out.forward[mark.index()] = d.vec_mul(&after)?.iter().sum();
            out.at_departure[mark.index()] = landed.iter().sum();
        }
        let total: f64 = out.at_departure.iter().sum();
        for x in &mut out.at_departure {
            *x /= total;
        }
        Ok(out)
    }

    /// Probability that the marks around an arbitrary time read `seq`.
    ///
    /// Sequences are chronological in both directions: for `Backward` the last
    /// entry is the departure closest to the observation time.
    pub fn sequence(&self, seq: &[Mark], direction: Direction) -> Result<f64> {
        if seq.is_empty() {
            return Err(Error::Invalid("mark sequence must be nonempty".into()));
        }
        if seq.len() > MAX_SEQUENCE {
            return Err(Error::Invalid(format!("mark sequence longer than {MAX_SEQUENCE}")));
        }
        let mut x = self.pi.clone();
        for &mark in seq {
            let d = self.mmap.marked(mark);
            x = match direction {
                Direction::Forward => d.vec_mul(&self.occupy_left(&x)?)?,
                Direction::Backward => self.occupy_left(&d.vec_mul(&x)?)?,
            };
        }
        Ok(x.iter().sum())
    }
}

pub fn mark_probabilities(dist: &StationaryDist, mmap: &MmapSet) -> Result<MarkProbabilities> {
    MarkCalculator::new(dist, mmap)?.probabilities()
}

pub fn consecutive_mark_probability(
    dist: &StationaryDist,
    mmap: &MmapSet,
    sequence: &[Mark],
    direction: Direction,
) -> Result<f64> {
    MarkCalculator::new(dist, mmap)?.sequence(sequence, direction)
}
