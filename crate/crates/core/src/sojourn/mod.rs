//! Mean sojourn time of an arriving A-customer: Little's law, case formulas and
//! a first-passage upper bound. B-customer values follow from the swapped model.

mod erlang;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use erlang::{erlang_max_sojourn, erlang_tail_integral};

use crate::error::{Error, Result};
use crate::model::{build_truncated_generator, ModelParams, StateCoords};
use crate::rg::SplitInverse;
use crate::stationary::{mean_queue_length_a, StationaryDist};

/// How an arriving A-customer's entry state is weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// The arrival sees the stationary state `(i, j)` and moves it to `(i + 1, j)`.
    Pasta,
    /// Entry state `(i, j)`, `i >= 1`, weighted by its own stationary probability.
    #[serde(rename = "paper")]
    Occupancy,
}

impl fmt::Display for Convention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Convention::Pasta => "pasta",
            Convention::Occupancy => "paper",
        })
    }
}

impl FromStr for Convention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pasta" => Ok(Convention::Pasta),
            "paper" => Ok(Convention::Occupancy),
            other => Err(Error::Invalid(format!("unknown convention '{other}' (expected pasta or paper)"))),
        }
    }
}

/// Probability of each entry state, counting the arriving customer, before matching.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ArrivalWeights {
    pub convention: Convention,
    pub phi: Vec<(StateCoords, f64)>,
}

pub fn arrival_weights(dist: &StationaryDist, convention: Convention) -> ArrivalWeights {
    let mut phi: Vec<(StateCoords, f64)> = match convention {
        Convention::Pasta => dist
            .states()
            .map(|(s, pr)| (StateCoords::new(s.i + 1, s.j), pr))
            .collect(),
        Convention::Occupancy => dist.states().filter(|(s, _)| s.i >= 1).collect(),
    };
    let total: f64 = phi.iter().map(|(_, w)| w).sum();
    for (_, w) in &mut phi {
        *w /= total;
    }
    ArrivalWeights { convention, phi }
}

/// Expected sojourn of a tagged A-customer whose arrival brings the count to `post`.
///
/// Only the arrivals still needed to complete the tagged customer's batch
/// compete with its own patience.
pub fn conditional_sojourn(post: StateCoords, p: &ModelParams) -> Result<f64> {
    let (i, j) = (post.i, post.j);
    let (m, n) = (p.m, p.n);
    if i == 0 {
        return Err(Error::Invalid("entry state must contain the arriving A-customer".into()));
    }
    if !StateCoords::new(i - 1, j).in_space(p) {
        return Err(Error::StateOutsideSpace { i, j });
    }
    if j >= n {
        return if i == m {
            Ok(0.0)
        } else {
            erlang_tail_integral(p.lambda1, p.theta1, m - i)
        };
    }
    let h = (i - 1) / m;
    let f = (i - 1) % m;
    let b_needed = h * n + n - j;
    if f == m - 1 {
        erlang_tail_integral(p.lambda2, p.theta1, b_needed)
    } else {
        erlang_max_sojourn(p.lambda1, m - f - 1, p.lambda2, b_needed, p.theta1)
    }
}

pub fn mean_sojourn_little(dist: &StationaryDist) -> f64 {
    mean_queue_length_a(dist) / dist.params.lambda1
}

pub fn mean_sojourn_probabilistic(dist: &StationaryDist, convention: Convention) -> Result<f64> {
    let w = arrival_weights(dist, convention);
    let mut sum = 0.0;
    for (s, phi) in &w.phi {
        if *phi > 0.0 {
            sum += phi * conditional_sojourn(*s, &dist.params)?;
        }
    }
    Ok(sum)
}

/// Mean time until no A-customer is left, starting from the weighted entry state.
pub fn mean_first_passage_upper(dist: &StationaryDist, convention: Convention) -> Result<f64> {
    let p = &dist.params;
    let w = dist.window;
    let gen = build_truncated_generator(p, w.k_neg, w.k_pos)?;
    let mn = p.phases();
    let mut keep = vec![Vec::new(); w.levels()];
    let mut local = vec![None; gen.dim()];
    let mut next = 0;
    for (b, kb) in keep.iter_mut().enumerate() {
        for ph in 0..mn {
            let g = b * mn + ph;
            if gen.coords_of(g)?.i >= 1 {
                kb.push(ph);
                local[g] = Some(next);
                next += 1;
            }
        }
    }
    let t = gen.blocks.restrict(&keep)?;
    let inv = SplitInverse::new(&t, w.k_neg + 1)?;
    let occupation = inv.apply_right(&vec![1.0; t.dim()])?;

    let weights = arrival_weights(dist, convention);
    let mut xi = 0.0;
    for (post, phi) in &weights.phi {
        let s = post.matched(p);
        if s.i == 0 || *phi == 0.0 {
            continue;
        }
        if let Some(k) = gen.index_of(s).and_then(|g| local[g]) {
            xi -= phi * occupation[k];
        }
    }
    if convention == Convention::Pasta {
        let little = mean_sojourn_little(dist);
        if little > xi + 1e-9 {
            return Err(Error::Invalid(format!(
                "first-passage bound {xi} is below the Little's-law sojourn {little}"
            )));
        }
    }
    Ok(xi)
}

/// The three A-side estimates evaluated on the swapped model, i.e. for B-customers.
pub fn b_side(dist: &StationaryDist, convention: Convention) -> Result<(f64, f64, f64)> {
    let s = dist.swapped();
    Ok((
        mean_sojourn_little(&s),
        mean_sojourn_probabilistic(&s, convention)?,
        mean_first_passage_upper(&s, convention)?,
    ))
}
