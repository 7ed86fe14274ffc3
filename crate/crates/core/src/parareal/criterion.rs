use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::state::StateVector;
use crate::error::Error;

/// Default convergence threshold on the change of forwarded data.
pub const DEFAULT_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormRule {
    L2,
    Lmax,
    /// `min(‖v‖₂, ‖v‖∞)`.
    #[serde(rename = "min")]
    MinOfBoth,
}

impl NormRule {
    pub fn apply(self, v: &StateVector) -> f64 {
        match self {
            NormRule::L2 => v.norm_l2(),
            NormRule::Lmax => v.norm_max(),
            NormRule::MinOfBoth => v.norm_l2().min(v.norm_max()),
        }
    }
}

impl FromStr for NormRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "l2" => Ok(NormRule::L2),
            "lmax" => Ok(NormRule::Lmax),
            "min" => Ok(NormRule::MinOfBoth),
            other => Err(Error::config(
                "norm",
                format!("unknown norm `{other}` (expected l2, lmax or min)"),
            )),
        }
    }
}

impl fmt::Display for NormRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormRule::L2 => "l2",
            NormRule::Lmax => "lmax",
            NormRule::MinOfBoth => "min",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriterion {
    pub threshold: f64,
    pub norm: NormRule,
}

impl Default for ConvergenceCriterion {
    fn default() -> Self {
        ConvergenceCriterion {
            threshold: DEFAULT_THRESHOLD,
            norm: NormRule::MinOfBoth,
        }
    }
}

impl ConvergenceCriterion {
    pub fn new(threshold: f64, norm: NormRule) -> Self {
        ConvergenceCriterion { threshold, norm }
    }

    pub fn measure(&self, v: &StateVector) -> f64 {
        self.norm.apply(v)
    }

    /// Strict comparison: an estimate equal to the threshold has not converged,
    /// and the `+∞` first-iteration sentinel never converges.
    pub fn is_converged(&self, estimate: f64) -> bool {
        estimate < self.threshold
    }
}
