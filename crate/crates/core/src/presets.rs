//! The two worked examples: a co-convex ball complement in the plane and a
//! mean constrained to a half-line.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::GaussianExperiment;
use crate::hypothesis::Hypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// D = 2, Σ = I, Θ = (1, 0), H = {‖θ‖ > 1}.
    Example1,
    /// One-dimensional mean in `[0, ∞)`, Σ = 1, H = (Θ, ∞).
    Example2,
}

pub const EXAMPLE2_LOWER_BOUND: f64 = 0.0;
pub const EXAMPLE2_DEFAULT_THETA: f64 = 0.0;

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Example1 => "example1",
            Preset::Example2 => "example2",
        }
    }

    /// Experiment and hypothesis. `example2_theta` only affects Example 2.
    pub fn build(&self, example2_theta: Option<f64>) -> Result<(GaussianExperiment, Hypothesis)> {
        match self {
            Preset::Example1 => {
                let exp = GaussianExperiment::isotropic(vec![1.0, 0.0], 1.0)?;
                let h = Hypothesis::ball_complement(vec![0.0, 0.0], 1.0)?;
                Ok((exp, h))
            }
            Preset::Example2 => {
                let theta = example2_theta.unwrap_or(EXAMPLE2_DEFAULT_THETA);
                if !theta.is_finite() || theta < EXAMPLE2_LOWER_BOUND {
                    return Err(Error::domain(format!(
                        "example2 theta must be finite and at least {EXAMPLE2_LOWER_BOUND}, got {theta}"
                    )));
                }
                let exp = GaussianExperiment::isotropic(vec![theta], 1.0)?;
                let h = Hypothesis::half_line(theta, EXAMPLE2_LOWER_BOUND)?;
                Ok((exp, h))
            }
        }
    }

    /// File stem of the figure this preset reproduces.
    pub fn figure_stem(&self) -> &'static str {
        match self {
            Preset::Example1 => "figure2a",
            Preset::Example2 => "figure2b",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "example1" => Ok(Preset::Example1),
            "example2" => Ok(Preset::Example2),
            other => Err(Error::domain(format!("unknown preset {other:?}; expected example1 or example2"))),
        }
    }
}
