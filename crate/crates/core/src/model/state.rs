use serde::{Deserialize, Serialize};

use super::ModelParams;
use crate::error::{Error, Result};

/// Customer counts `(i, j)`: `i` A-customers and `j` B-customers waiting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct StateCoords {
    pub i: usize,
    pub j: usize,
}

impl StateCoords {
    pub fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }

    /// Whether the pair can occur between events: never `i >= m` and `j >= n` together.
    pub fn in_space(&self, p: &ModelParams) -> bool {
        self.i < p.m || self.j < p.n
    }

    /// Applies every pending match of `m` A's against `n` B's.
    pub fn matched(mut self, p: &ModelParams) -> Self {
        while self.i >= p.m && self.j >= p.n {
            self.i -= p.m;
            self.j -= p.n;
        }
        self
    }

    pub fn label(&self) -> String {
        format!("({},{})", self.i, self.j)
    }
}

/// Position of a state inside the level structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LevelPhase {
    pub level: i64,
    pub phase: usize,
}

/// Maps counts to `(level, phase)`.
///
/// Levels `k >= 0` are ordered by `(i mod m, j)` lexicographically; negative
/// levels list B-surplus states in reversed order, last B-slot and last
/// A-count first.
pub fn coords_to_levelphase(s: StateCoords, p: &ModelParams) -> Result<LevelPhase> {
    let (m, n) = (p.m, p.n);
    if !s.in_space(p) {
        return Err(Error::StateOutsideSpace { i: s.i, j: s.j });
    }
    if s.i >= m {
        Ok(LevelPhase {
            level: (s.i / m) as i64,
            phase: (s.i % m) * n + s.j,
        })
    } else if s.j >= n {
        let depth = s.j / n;
        let jr = s.j % n;
        Ok(LevelPhase {
            level: -(depth as i64),
            phase: (n - 1 - jr) * m + (m - 1 - s.i),
        })
    } else {
        Ok(LevelPhase {
            level: 0,
            phase: s.i * n + s.j,
        })
    }
}

pub fn levelphase_to_coords(lp: LevelPhase, p: &ModelParams) -> Result<StateCoords> {
    let (m, n) = (p.m, p.n);
    if lp.phase >= m * n {
        return Err(Error::PhaseOutOfRange {
            phase: lp.phase,
            phases: m * n,
        });
    }
    if lp.level >= 0 {
        let k = lp.level as usize;
        Ok(StateCoords {
            i: k * m + lp.phase / n,
            j: lp.phase % n,
        })
    } else {
        let depth = (-lp.level) as usize;
        let b = lp.phase / m;
        let a = lp.phase % m;
        Ok(StateCoords {
            i: m - 1 - a,
            j: depth * n + (n - 1 - b),
        })
    }
}
