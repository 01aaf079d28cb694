//! Synthetic test functions, minimized at the origin with value 0.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{BboxError, Result};
use crate::rng::{standard_normal, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Sphere,
    Rastrigin,
    /// Axis-aligned quadratic with condition number 1e4.
    Ellipsoid,
}

impl Objective {
    pub const ALL: [Objective; 3] = [Objective::Sphere, Objective::Rastrigin, Objective::Ellipsoid];

    pub fn as_str(self) -> &'static str {
        match self {
            Objective::Sphere => "sphere",
            Objective::Rastrigin => "rastrigin",
            Objective::Ellipsoid => "ellipsoid-1e4",
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            Objective::Sphere => x.iter().map(|v| v * v).sum(),
            Objective::Rastrigin => x.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos() + 10.0).sum(),
            Objective::Ellipsoid => {
                let d = x.len();
                x.iter()
                    .enumerate()
                    .map(|(i, v)| {
                        let t = if d > 1 { i as f64 / (d - 1) as f64 } else { 0.0 };
                        10f64.powf(4.0 * t) * v * v
                    })
                    .sum()
            }
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Objective {
    type Err = BboxError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|o| o.as_str() == s).ok_or_else(|| {
            BboxError::InvalidArgument(format!(
                "unknown objective `{s}` (valid: sphere, rastrigin, ellipsoid-1e4)"
            ))
        })
    }
}

/// Best value among `budget` draws from N(0, I).
pub fn random_search(objective: Objective, dim: usize, budget: usize, seed: u64) -> f64 {
    let mut rng = stream(seed, "random-search");
    (0..budget)
        .map(|_| objective.eval(&standard_normal(&mut rng, dim)))
        .fold(f64::INFINITY, f64::min)
}
