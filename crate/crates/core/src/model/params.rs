use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates and batch sizes of the matched queue.
///
/// A-customers arrive at rate `lambda1` and abandon at rate `theta1` each;
/// B-customers likewise with `lambda2`, `theta2`. Every time `m` A's and `n`
/// B's are simultaneously present they leave together.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ModelParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub m: usize,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    lambda1: f64,
    lambda2: f64,
    theta1: f64,
    theta2: f64,
    m: usize,
    n: usize,
}

impl TryFrom<RawParams> for ModelParams {
    type Error = Error;

    fn try_from(r: RawParams) -> Result<Self> {
        ModelParams::new(r.lambda1, r.lambda2, r.theta1, r.theta2, r.m, r.n)
    }
}

impl From<ModelParams> for RawParams {
    fn from(p: ModelParams) -> Self {
        RawParams {
            lambda1: p.lambda1,
            lambda2: p.lambda2,
            theta1: p.theta1,
            theta2: p.theta2,
            m: p.m,
            n: p.n,
        }
    }
}

impl ModelParams {
    pub fn new(lambda1: f64, lambda2: f64, theta1: f64, theta2: f64, m: usize, n: usize) -> Result<Self> {
        for (name, v) in [
            ("lambda1", lambda1),
            ("lambda2", lambda2),
            ("theta1", theta1),
            ("theta2", theta2),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParams(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        if m == 0 || n == 0 {
            return Err(Error::InvalidParams(format!("batch sizes must be >= 1, got m={m}, n={n}")));
        }
        Ok(Self {
            lambda1,
            lambda2,
            theta1,
            theta2,
            m,
            n,
        })
    }

    /// Number of phases per level, `m * n`.
    pub fn phases(&self) -> usize {
        self.m * self.n
    }

    /// The mirrored model with the roles of A and B exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            lambda1: self.lambda2,
            lambda2: self.lambda1,
            theta1: self.theta2,
            theta2: self.theta1,
            m: self.n,
            n: self.m,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParams(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("params serialize")
    }
}
