//! Choices between two three-outcome lotteries.
//!
//! A design is `(pl_A, ph_A, pl_B, ph_B)`. Each lottery's middle probability
//! is `2 - pl - ph`, then the triple is scaled to sum to 1. Models compare the
//! normalized lotteries and choose the preferred one with probability
//! `1 - theta_eps`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::model::{ModelSpec, Response, Simulator};
use crate::rng::SimRng;
use crate::space::{DesignDim, DesignSpace, ParamSpec};

const INDIFFERENCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lottery {
    pub p_low: f64,
    pub p_mid: f64,
    pub p_high: f64,
}

impl Lottery {
    /// Lottery from the raw low/high design values.
    pub fn from_design(pl: f64, ph: f64) -> Self {
        Lottery {
            p_low: pl,
            p_mid: 2.0 - pl - ph,
            p_high: ph,
        }
        .normalized()
    }

    pub fn normalized(self) -> Self {
        let s = self.p_low + self.p_mid + self.p_high;
        Lottery {
            p_low: self.p_low / s,
            p_mid: self.p_mid / s,
            p_high: self.p_high / s,
        }
    }
}

pub fn lotteries(design: &[f64]) -> (Lottery, Lottery) {
    (
        Lottery::from_design(design[0], design[1]),
        Lottery::from_design(design[2], design[3]),
    )
}

/// Probability weighting `w(p) = p^r / (p^r + (1-p)^r)^(1/r)`.
pub fn weight(p: f64, r: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    if p == 0.0 || p == 1.0 {
        return p;
    }
    let a = p.powf(r);
    a / (a + (1.0 - p).powf(r)).powf(1.0 / r)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RiskModel {
    Eu,
    Weu,
    Opt,
    Cpt,
}

impl RiskModel {
    /// Positive when A is preferred, negative when B is, zero when indifferent.
    pub fn preference(self, theta: &[f64], a: &Lottery, b: &Lottery) -> f64 {
        let raw = match self {
            RiskModel::Eu => (a.p_high - b.p_high) - theta[0] * (a.p_low - b.p_low),
            RiskModel::Weu => {
                let slope = |l: &Lottery| {
                    let num = (l.p_high - theta[1]).abs();
                    let den = (l.p_low - theta[0]).abs();
                    if den == 0.0 { f64::INFINITY } else { num / den }
                };
                let (sa, sb) = (slope(a), slope(b));
                if sa == sb { 0.0 } else { sa - sb }
            }
            RiskModel::Opt => self.utility(theta, a) - self.utility(theta, b),
            RiskModel::Cpt => self.utility(theta, a) - self.utility(theta, b),
        };
        if raw.abs() <= INDIFFERENCE { 0.0 } else { raw }
    }

    /// Subjective utility for the weighting models.
    pub fn utility(self, theta: &[f64], l: &Lottery) -> f64 {
        let (v, r) = (theta[0], theta[1]);
        match self {
            RiskModel::Opt if l.p_low == 0.0 => weight(l.p_high, r) + v * (1.0 - weight(l.p_high, r)),
            RiskModel::Opt => weight(l.p_high, r) + weight(1.0 - l.p_high - l.p_low, r) * v,
            RiskModel::Cpt => weight(l.p_high, r) + (weight(1.0 - l.p_low, r) - weight(l.p_high, r)) * v,
            _ => f64::NAN,
        }
    }

    /// Probability of choosing A.
    pub fn choice_probability(self, theta: &[f64], design: &[f64]) -> f64 {
        let (a, b) = lotteries(design);
        let eps = *theta.last().expect("theta_eps");
        let pref = self.preference(theta, &a, &b);
        if pref > 0.0 {
            1.0 - eps
        } else if pref < 0.0 {
            eps
        } else {
            0.5
        }
    }
}

impl Simulator for RiskModel {
    fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response {
        let p = self.choice_probability(theta, design);
        Response::scalar(if rng.random::<f64>() < p { 1.0 } else { 0.0 })
    }

    fn log_likelihood(&self, response: &Response, theta: &[f64], design: &[f64]) -> Option<f64> {
        let p = self.choice_probability(theta, design);
        Some(if response.0[0] >= 0.5 { p } else { 1.0 - p }.ln())
    }

    fn has_likelihood(&self) -> bool {
        true
    }

    fn response_support(&self) -> Option<Vec<Response>> {
        Some(vec![Response::scalar(0.0), Response::scalar(1.0)])
    }
}

fn epsilon() -> ParamSpec {
    ParamSpec::uniform("theta_eps", 0.0, 0.5)
}

pub fn models() -> Vec<ModelSpec> {
    let weighting = || {
        vec![
            ParamSpec::uniform("theta_v", 0.0, 1.0),
            ParamSpec::uniform("theta_r", 0.01, 1.0),
            epsilon(),
        ]
    };
    vec![
        ModelSpec::new("EU", 0, vec![ParamSpec::uniform("theta_a", 0.0, 10.0), epsilon()], RiskModel::Eu),
        ModelSpec::new(
            "WEU",
            1,
            vec![
                ParamSpec::uniform("theta_x", -100.0, 0.0),
                ParamSpec::uniform("theta_y", -100.0, 0.0),
                epsilon(),
            ],
            RiskModel::Weu,
        ),
        ModelSpec::new("OPT", 2, weighting(), RiskModel::Opt),
        ModelSpec::new("CPT", 3, weighting(), RiskModel::Cpt),
    ]
}

pub fn design_space() -> DesignSpace {
    let axis = |name: &str| DesignDim::Continuous {
        name: name.into(),
        low: 0.0,
        high: 1.0,
    };
    DesignSpace::new(vec![axis("p_low_a"), axis("p_high_a"), axis("p_low_b"), axis("p_high_b")])
}
