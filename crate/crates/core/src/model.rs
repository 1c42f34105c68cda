//! Candidate models: identity, parameter boxes and forward simulators.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::rng::SimRng;
use crate::space::{self, ParamSpec};

/// Position and short name of a model within a model set.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelId {
    pub name: String,
    pub index: usize,
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(pub Vec<f64>);

impl ParameterVector {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Observed or simulated behaviour for one trial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Response(pub Vec<f64>);

impl Response {
    pub fn scalar(v: f64) -> Self {
        Self(vec![v])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

/// Forward model of one candidate. Implementations must be pure given
/// `(theta, design, rng)`.
pub trait Simulator: Send + Sync {
    fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response;

    /// Log probability (or density) of `response`; `None` when intractable.
    fn log_likelihood(&self, _response: &Response, _theta: &[f64], _design: &[f64]) -> Option<f64> {
        None
    }

    /// Whether `log_likelihood` is implemented.
    fn has_likelihood(&self) -> bool {
        false
    }

    /// Finite response set, when the model has one and a likelihood over it.
    fn response_support(&self) -> Option<Vec<Response>> {
        None
    }
}

/// A candidate model: id, parameter box with priors, and simulator.
#[derive(Clone)]
pub struct ModelSpec {
    pub id: ModelId,
    pub params: Vec<ParamSpec>,
    simulator: Arc<dyn Simulator>,
}

impl fmt::Debug for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelSpec")
            .field("id", &self.id)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl ModelSpec {
    pub fn new(
        name: impl Into<String>,
        index: usize,
        params: Vec<ParamSpec>,
        simulator: impl Simulator + 'static,
    ) -> Self {
        Self {
            id: ModelId {
                name: name.into(),
                index,
            },
            params,
            simulator: Arc::new(simulator),
        }
    }

    pub fn name(&self) -> &str {
        &self.id.name
    }

    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn sample_prior(&self, rng: &mut SimRng) -> Vec<f64> {
        self.params.iter().map(|p| p.prior.sample(rng)).collect()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.params.iter().map(ParamSpec::bounds).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.params.iter().map(ParamSpec::width).collect()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && self
                .params
                .iter()
                .zip(theta)
                .all(|(p, &v)| {
                    let (lo, hi) = p.bounds();
                    v >= lo && v <= hi
                })
    }

    pub fn clip(&self, theta: &mut [f64]) {
        for (p, v) in self.params.iter().zip(theta.iter_mut()) {
            let (lo, hi) = p.bounds();
            *v = v.clamp(lo, hi);
        }
    }

    pub fn to_unit(&self, theta: &[f64]) -> Vec<f64> {
        space::to_unit(&self.params, theta)
    }

    pub fn from_unit(&self, unit: &[f64]) -> Vec<f64> {
        space::from_unit(&self.params, unit)
    }

    pub fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response {
        self.simulator.simulate(theta, design, rng)
    }

    pub fn log_likelihood(&self, response: &Response, theta: &[f64], design: &[f64]) -> Option<f64> {
        self.simulator.log_likelihood(response, theta, design)
    }

    pub fn exact_likelihood(&self, response: &Response, theta: &[f64], design: &[f64]) -> Option<f64> {
        self.log_likelihood(response, theta, design).map(f64::exp)
    }

    pub fn has_likelihood(&self) -> bool {
        self.simulator.has_likelihood()
    }

    pub fn response_support(&self) -> Option<Vec<Response>> {
        self.simulator.response_support()
    }
}

/// Distance between a simulated and an observed response.
#[derive(Clone, Copy, Debug, Default)]
pub enum Discrepancy {
    #[default]
    Euclidean,
    /// Euclidean distance between summaries of the two responses.
    SummaryEuclidean(fn(&Response) -> Vec<f64>),
}

impl Discrepancy {
    pub fn distance(&self, a: &Response, b: &Response) -> f64 {
        match self {
            Discrepancy::Euclidean => euclidean(&a.0, &b.0),
            Discrepancy::SummaryEuclidean(summary) => euclidean(&summary(a), &summary(b)),
        }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn euclidean_discrepancy_is_a_metric(
            a in proptest::collection::vec(-10.0f64..10.0, 2),
            b in proptest::collection::vec(-10.0f64..10.0, 2),
        ) {
            let (ra, rb) = (Response(a), Response(b));
            let d = Discrepancy::Euclidean;
            prop_assert_eq!(d.distance(&ra, &ra), 0.0);
            prop_assert!(d.distance(&ra, &rb) >= 0.0);
            prop_assert!((d.distance(&ra, &rb) - d.distance(&rb, &ra)).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_discrepancy_compares_summaries() {
        fn first(r: &Response) -> Vec<f64> {
            vec![r.0[0]]
        }
        let d = Discrepancy::SummaryEuclidean(first);
        assert_eq!(d.distance(&Response(vec![1.0, 5.0]), &Response(vec![1.0, -3.0])), 0.0);
        assert_eq!(d.distance(&Response(vec![1.0]), &Response(vec![4.0])), 3.0);
    }
}
