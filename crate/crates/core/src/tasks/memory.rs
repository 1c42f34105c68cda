//! Power and exponential retention curves with Bernoulli recall.

use rand::Rng;

use crate::model::{ModelSpec, Response, Simulator};
use crate::rng::SimRng;
use crate::space::{DesignDim, DesignSpace, ParamSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Retention {
    Pow,
    Exp,
}

impl Retention {
    /// Recall probability at lag `d`.
    pub fn recall_probability(self, theta: &[f64], d: f64) -> f64 {
        let p = match self {
            Retention::Pow => theta[0] * (d + 1.0).powf(-theta[1]),
            Retention::Exp => theta[0] * (-theta[1] * d).exp(),
        };
        p.clamp(0.0, 1.0)
    }
}

impl Simulator for Retention {
    fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response {
        let p = self.recall_probability(theta, design[0]);
        Response::scalar(if rng.random::<f64>() < p { 1.0 } else { 0.0 })
    }

    fn log_likelihood(&self, response: &Response, theta: &[f64], design: &[f64]) -> Option<f64> {
        let p = self.recall_probability(theta, design[0]);
        let q = if response.0[0] >= 0.5 { p } else { 1.0 - p };
        Some(q.ln())
    }

    fn has_likelihood(&self) -> bool {
        true
    }

    fn response_support(&self) -> Option<Vec<Response>> {
        Some(vec![Response::scalar(0.0), Response::scalar(1.0)])
    }
}

pub fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new(
            "POW",
            0,
            vec![ParamSpec::beta("theta_a", 2.0, 1.0), ParamSpec::beta("theta_pow", 1.0, 4.0)],
            Retention::Pow,
        ),
        ModelSpec::new(
            "EXP",
            1,
            vec![ParamSpec::beta("theta_a", 2.0, 1.0), ParamSpec::beta("theta_exp", 1.0, 8.0)],
            Retention::Exp,
        ),
    ]
}

pub fn design_space() -> DesignSpace {
    DesignSpace::new(vec![DesignDim::Continuous {
        name: "lag".into(),
        low: 0.0,
        high: 100.0,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn certain_recall() {
        let mut rng = crate::rng::rng_from(3);
        for d in [0.0, 10.0, 100.0] {
            for _ in 0..100 {
                assert_eq!(Retention::Pow.simulate(&[1.0, 0.0], &[d], &mut rng).0[0], 1.0);
            }
        }
    }

    #[test]
    fn curves_agree_at_zero_lag_and_by_hand() {
        let th = [0.7, 0.4];
        assert_eq!(Retention::Pow.recall_probability(&th, 0.0), Retention::Exp.recall_probability(&th, 0.0));
        assert!((Retention::Pow.recall_probability(&[0.8, 0.5], 3.0) - 0.4).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn recall_never_increases_with_lag(a in 0.0..=1.0f64, b in 0.0..=1.0f64, d in 0.0..99.0f64, step in 0.0..1.0f64) {
            for m in [Retention::Pow, Retention::Exp] {
                prop_assert!(m.recall_probability(&[a, b], d + step) <= m.recall_probability(&[a, b], d) + 1e-15);
            }
        }
    }
}
