//! Parameter priors, box bounds and design spaces.
//!
//! Every parameter and design dimension is boxed. Gaussian-process work is
//! done in the unit cube; the affine maps live here.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SimRng;

/// Prior over one scalar parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prior {
    Uniform { low: f64, high: f64 },
    Beta { alpha: f64, beta: f64 },
}

impl Prior {
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            Prior::Uniform { low, high } => (low, high),
            Prior::Beta { .. } => (0.0, 1.0),
        }
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match *self {
            Prior::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Prior::Beta { alpha, beta } => Beta::new(alpha, beta)
                .expect("beta prior with positive shape")
                .sample(rng),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Prior::Uniform { low, high } => 0.5 * (low + high),
            Prior::Beta { alpha, beta } => alpha / (alpha + beta),
        }
    }
}

/// A named, boxed model parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub prior: Prior,
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, prior: Prior) -> Self {
        Self {
            name: name.into(),
            prior,
        }
    }

    pub fn uniform(name: impl Into<String>, low: f64, high: f64) -> Self {
        Self::new(name, Prior::Uniform { low, high })
    }

    pub fn beta(name: impl Into<String>, alpha: f64, beta: f64) -> Self {
        Self::new(name, Prior::Beta { alpha, beta })
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.prior.bounds()
    }

    pub fn width(&self) -> f64 {
        let (lo, hi) = self.bounds();
        hi - lo
    }
}

pub fn to_unit(params: &[ParamSpec], theta: &[f64]) -> Vec<f64> {
    params
        .iter()
        .zip(theta)
        .map(|(p, &v)| {
            let (lo, hi) = p.bounds();
            (v - lo) / (hi - lo)
        })
        .collect()
}

pub fn from_unit(params: &[ParamSpec], unit: &[f64]) -> Vec<f64> {
    params
        .iter()
        .zip(unit)
        .map(|(p, &u)| {
            let (lo, hi) = p.bounds();
            lo + u.clamp(0.0, 1.0) * (hi - lo)
        })
        .collect()
}

/// One axis of a design space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignDim {
    Continuous { name: String, low: f64, high: f64 },
    /// Integer range, inclusive at both ends.
    Integer { name: String, low: i64, high: i64 },
}

impl DesignDim {
    pub fn name(&self) -> &str {
        match self {
            DesignDim::Continuous { name, .. } | DesignDim::Integer { name, .. } => name,
        }
    }

    fn span(&self) -> (f64, f64) {
        match *self {
            DesignDim::Continuous { low, high, .. } => (low, high),
            DesignDim::Integer { low, high, .. } => (low as f64, high as f64),
        }
    }

    fn contains(&self, v: f64) -> bool {
        match *self {
            DesignDim::Continuous { low, high, .. } => v >= low && v <= high,
            DesignDim::Integer { low, high, .. } => {
                v.fract() == 0.0 && v >= low as f64 && v <= high as f64
            }
        }
    }
}

/// A concrete design: one value per design dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Design(pub Vec<f64>);

impl Design {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Product of design dimensions with a uniform proposal over each axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSpace {
    pub dims: Vec<DesignDim>,
}

impl DesignSpace {
    pub fn new(dims: Vec<DesignDim>) -> Self {
        Self { dims }
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    /// One draw from the proposal distribution p(d).
    pub fn sample(&self, rng: &mut SimRng) -> Design {
        Design(
            self.dims
                .iter()
                .map(|d| match *d {
                    DesignDim::Continuous { low, high, .. } => {
                        low + (high - low) * rng.random::<f64>()
                    }
                    DesignDim::Integer { low, high, .. } => rng.random_range(low..=high) as f64,
                })
                .collect(),
        )
    }

    pub fn to_unit(&self, design: &Design) -> Vec<f64> {
        self.dims
            .iter()
            .zip(&design.0)
            .map(|(d, &v)| {
                let (lo, hi) = d.span();
                if hi > lo {
                    (v - lo) / (hi - lo)
                } else {
                    0.0
                }
            })
            .collect()
    }

    /// Maps a unit-cube point back, rounding integer axes to the nearest
    /// admissible value.
    pub fn from_unit(&self, unit: &[f64]) -> Design {
        Design(
            self.dims
                .iter()
                .zip(unit)
                .map(|(d, &u)| {
                    let (lo, hi) = d.span();
                    let v = lo + u.clamp(0.0, 1.0) * (hi - lo);
                    match d {
                        DesignDim::Continuous { .. } => v.clamp(lo, hi),
                        DesignDim::Integer { .. } => v.round().clamp(lo, hi),
                    }
                })
                .collect(),
        )
    }

    pub fn validate(&self, design: &Design) -> Result<()> {
        if design.0.len() != self.dims.len() {
            return Err(Error::Config(format!(
                "design has {} values, expected {}",
                design.0.len(),
                self.dims.len()
            )));
        }
        for (d, &v) in self.dims.iter().zip(&design.0) {
            if !d.contains(v) {
                return Err(Error::Config(format!(
                    "design value {v} outside axis `{}`",
                    d.name()
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, design: &Design) -> bool {
        self.validate(design).is_ok()
    }
}
