use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{ModelParams, StateCoords};
use crate::error::Error;

/// Departure type: an A abandons, a B abandons, or a full batch is matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mark {
    A,
    B,
    AB,
}

impl Mark {
    pub const ALL: [Mark; 3] = [Mark::A, Mark::B, Mark::AB];

    pub fn index(self) -> usize {
        match self {
            Mark::A => 0,
            Mark::B => 1,
            Mark::AB => 2,
        }
    }
}

impl fmt::Display for Mark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mark::A => "A",
            Mark::B => "B",
            Mark::AB => "AB",
        })
    }
}

impl FromStr for Mark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim() {
            "A" | "a" => Ok(Mark::A),
            "B" | "b" => Ok(Mark::B),
            "AB" | "ab" => Ok(Mark::AB),
            other => Err(Error::Invalid(format!("unknown mark '{other}' (expected A, B or AB)"))),
        }
    }
}

/// One single-event transition out of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub to: StateCoords,
    pub rate: f64,
    /// `None` for an arrival that does not complete a batch.
    pub mark: Option<Mark>,
}

/// Enumerates the four event types out of `s`, applying eager matching after arrivals.
pub fn transitions(s: StateCoords, p: &ModelParams) -> Vec<Transition> {
    let mut out = Vec::with_capacity(4);
    let arrival = |raw: StateCoords, rate: f64| {
        let to = raw.matched(p);
        Transition {
            to,
            rate,
            mark: (to != raw).then_some(Mark::AB),
        }
    };
    out.push(arrival(StateCoords::new(s.i + 1, s.j), p.lambda1));
    out.push(arrival(StateCoords::new(s.i, s.j + 1), p.lambda2));
    if s.i >= 1 {
        out.push(Transition {
            to: StateCoords::new(s.i - 1, s.j),
            rate: s.i as f64 * p.theta1,
            mark: Some(Mark::A),
        });
    }
    if s.j >= 1 {
        out.push(Transition {
            to: StateCoords::new(s.i, s.j - 1),
            rate: s.j as f64 * p.theta2,
            mark: Some(Mark::B),
        });
    }
    out
}
