//! End-to-end analytic pipeline: rate measures, boundary, stationary vector.

use crate::error::{Error, Result};
use crate::model::{build_truncated_generator, ModelParams, TruncatedGenerator, Window};
use crate::rg::{compute_rg_negative, compute_rg_positive, RgMeasures, RgOptions};
use crate::stationary::{assemble_stationary, mean_queue_length_a, mean_queue_length_b, solve_boundary, StationaryDist};

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Fixed window; adaptive selection when `None`.
    pub window: Option<Window>,
    /// Starting half-width of the adaptive window.
    pub min_window: usize,
    /// Mass allowed in the two outermost levels of each side, weighted by their queue length.
    pub tail_tol: f64,
    pub rg: RgOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            window: None,
            min_window: 8,
            tail_tol: 1e-12,
            rg: RgOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub params: ModelParams,
    pub pos: RgMeasures,
    pub neg: RgMeasures,
    pub dist: StationaryDist,
}

fn rg_for(p: &ModelParams, opts: &RgOptions, half_width: usize, axis_pos: bool) -> Result<RgMeasures> {
    let cap = opts.cap.max((half_width + 1).next_power_of_two());
    let o = RgOptions { cap, ..*opts };
    if axis_pos {
        compute_rg_positive(p, &o)
    } else {
        compute_rg_negative(p, &o)
    }
}

impl Analysis {
    pub fn solve(p: &ModelParams, opts: &SolveOptions) -> Result<Self> {
        let mut window = opts.window.unwrap_or(Window::new(opts.min_window.max(2), opts.min_window.max(2)));
        let mut pos = rg_for(p, &opts.rg, window.k_pos, true)?;
        let mut neg = rg_for(p, &opts.rg, window.k_neg, false)?;
        loop {
            if pos.cap < window.k_pos {
                pos = rg_for(p, &opts.rg, window.k_pos, true)?;
            }
            if neg.cap < window.k_neg {
                neg = rg_for(p, &opts.rg, window.k_neg, false)?;
            }
            let boundary = solve_boundary(p, &pos, &neg)?;
            let dist = assemble_stationary(p, &pos, &neg, &boundary, window)?;
            if opts.window.is_some() {
                return Ok(Self {
                    params: *p,
                    pos,
                    neg,
                    dist,
                });
            }
            let (lo, hi) = dist.edge_mass(2);
            let weight_neg = 1.0 + (window.k_neg * p.n) as f64;
            let weight_pos = 1.0 + (window.k_pos * p.m) as f64;
            let grow_neg = lo * weight_neg >= opts.tail_tol;
            let grow_pos = hi * weight_pos >= opts.tail_tol;
            if !grow_neg && !grow_pos {
                return Ok(Self {
                    params: *p,
                    pos,
                    neg,
                    dist,
                });
            }
            if grow_neg {
                window.k_neg *= 2;
            }
            if grow_pos {
                window.k_pos *= 2;
            }
            if window.k_neg.max(window.k_pos) > opts.rg.max_cap / 2 {
                return Err(Error::TailNotConverged {
                    levels: window.levels(),
                });
            }
        }
    }

    pub fn window(&self) -> Window {
        self.dist.window
    }

    /// Truncated generator on the same window as the stationary vector.
    pub fn generator(&self) -> Result<TruncatedGenerator> {
        let w = self.window();
        build_truncated_generator(&self.params, w.k_neg, w.k_pos)
    }

    pub fn mean_q1(&self) -> f64 {
        mean_queue_length_a(&self.dist)
    }

    pub fn mean_q2(&self) -> f64 {
        mean_queue_length_b(&self.dist)
    }
}
