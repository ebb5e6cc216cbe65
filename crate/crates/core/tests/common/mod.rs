//! Independent oracles built directly on (i, j) coordinates.
#![allow(dead_code, clippy::excessive_precision)]

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use matchq::model::{Mark, ModelParams};

/// Truncated chain on `i < i_cap`, `j < j_cap`, with transitions leaving the set dropped.
pub struct RawChain {
    pub states: Vec<(usize, usize)>,
    pub index: HashMap<(usize, usize), usize>,
    pub q: DMatrix<f64>,
    pub d0: DMatrix<f64>,
    /// Marked parts in the order A, B, AB.
    pub marked: [DMatrix<f64>; 3],
}

fn mark_slot(m: Mark) -> usize {
    match m {
        Mark::A => 0,
        Mark::B => 1,
        Mark::AB => 2,
    }
}

impl RawChain {
    pub fn new(p: &ModelParams, k_neg: usize, k_pos: usize) -> Self {
        let (m, n) = (p.m, p.n);
        let i_cap = (k_pos + 1) * m;
        let j_cap = (k_neg + 1) * n;
        let inside = |i: usize, j: usize| i < i_cap && j < j_cap && !(i >= m && j >= n);
        let mut states = Vec::new();
        for i in 0..i_cap {
            for j in 0..j_cap {
                if inside(i, j) {
                    states.push((i, j));
                }
            }
        }
        let index: HashMap<_, _> = states.iter().enumerate().map(|(k, &s)| (s, k)).collect();
        let dim = states.len();
        let mut q = DMatrix::zeros(dim, dim);
        let mut marked = [DMatrix::zeros(dim, dim), DMatrix::zeros(dim, dim), DMatrix::zeros(dim, dim)];
        for (from, &(i, j)) in states.iter().enumerate() {
            let mut moves: Vec<((usize, usize), f64, Option<Mark>)> = Vec::new();
            let (ia, ja) = (i + 1, j);
            if ia >= m && ja >= n {
                moves.push(((ia - m, ja - n), p.lambda1, Some(Mark::AB)));
            } else {
                moves.push(((ia, ja), p.lambda1, None));
            }
            let (ib, jb) = (i, j + 1);
            if ib >= m && jb >= n {
                moves.push(((ib - m, jb - n), p.lambda2, Some(Mark::AB)));
            } else {
                moves.push(((ib, jb), p.lambda2, None));
            }
            if i > 0 {
                moves.push(((i - 1, j), i as f64 * p.theta1, Some(Mark::A)));
            }
            if j > 0 {
                moves.push(((i, j - 1), j as f64 * p.theta2, Some(Mark::B)));
            }
            for (to, rate, mark) in moves {
                let Some(&t) = index.get(&to) else {
                    assert!(mark.is_none(), "a marked transition left the truncated set");
                    continue;
                };
                q[(from, t)] += rate;
                q[(from, from)] -= rate;
                if let Some(mk) = mark {
                    marked[mark_slot(mk)][(from, t)] += rate;
                }
            }
        }
        let d0 = &q - &marked[0] - &marked[1] - &marked[2];
        Self {
            states,
            index,
            q,
            d0,
            marked,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn stationary(&self) -> Vec<f64> {
        stationary_dense(&self.q)
    }

    /// Mean time to empty the A-queue from the PASTA post-arrival state, A-arrivals seeing `pi`.
    pub fn mean_time_to_empty_a(&self, p: &ModelParams, pi: &[f64]) -> f64 {
        let busy: Vec<usize> = (0..self.dim()).filter(|&k| self.states[k].0 >= 1).collect();
        let local: HashMap<usize, usize> = busy.iter().enumerate().map(|(a, &b)| (b, a)).collect();
        let t = DMatrix::from_fn(busy.len(), busy.len(), |r, c| self.q[(busy[r], busy[c])]);
        let y = t
            .lu()
            .solve(&DVector::from_element(busy.len(), -1.0))
            .expect("transient block invertible");
        let mut acc = 0.0;
        for (k, &(i, j)) in self.states.iter().enumerate() {
            let (mut pi_, mut pj) = (i + 1, j);
            if pi_ >= p.m && pj >= p.n {
                pi_ -= p.m;
                pj -= p.n;
            }
            if pi_ == 0 {
                continue;
            }
            if let Some(g) = self.index.get(&(pi_, pj)).and_then(|g| local.get(g)) {
                acc += pi[k] * y[*g];
            }
        }
        acc
    }

    /// Chronological mark-sequence probability around an arbitrary time.
    pub fn sequence_probability(&self, pi: &[f64], seq: &[Mark], forward: bool) -> f64 {
        let lu = (-&self.d0).transpose().lu();
        let occupy = |x: &DVector<f64>| lu.solve(x).expect("D0 invertible");
        let mut x = DVector::from_column_slice(pi);
        for &mk in seq {
            let d = &self.marked[mark_slot(mk)];
            x = if forward {
                d.transpose() * occupy(&x)
            } else {
                occupy(&(d.transpose() * &x))
            };
        }
        x.sum()
    }
}

/// Stationary vector of a conservative generator by a dense solve with one equation replaced by normalization.
pub fn stationary_dense(q: &DMatrix<f64>) -> Vec<f64> {
    let n = q.nrows();
    let mut a = q.transpose();
    for c in 0..n {
        a[(n - 1, c)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    a.lu().solve(&b).expect("irreducible generator").iter().copied().collect()
}

pub fn erlang_cdf(lam: f64, r: usize, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..r {
        term *= lam * x / k as f64;
        sum += term;
    }
    1.0 - (-lam * x).exp() * sum
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for k in 0..7 {
        let x = h * XGK[k];
        let s = f(c - x) + f(c + x);
        kron += WGK[k] * s;
        if k % 2 == 1 {
            gauss += WG[k / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature by interval bisection.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut stack = vec![(a, b, tol)];
    let mut total = 0.0;
    while let Some((lo, hi, t)) = stack.pop() {
        let (v, err) = gk15(f, lo, hi);
        if err <= t || hi - lo < 1e-12 {
            total += v;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((lo, mid, t / 2.0));
            stack.push((mid, hi, t / 2.0));
        }
    }
    total
}

/// `int_0^inf exp(-theta x) g(x) dx` for `0 <= g <= 1`, cut where the tail is below 1e-16.
pub fn discounted_integral(theta: f64, g: &dyn Fn(f64) -> f64) -> f64 {
    let upper = (1e16 / theta).ln().max(1.0) / theta;
    integrate(&|x| (-theta * x).exp() * g(x), 0.0, upper, 1e-13)
}
