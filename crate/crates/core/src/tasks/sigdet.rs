//! Sequential signal detection with a look budget.
//!
//! Each episode draws signal presence from a fair coin. Observations are
//! `1[present] * d_str + theta_sens * z`. The agent sees one observation, then
//! either decides or looks again, up to `d_obs` observations in total. The
//! response is `(decision, looks)` with decision 1 for "present".
//!
//! Two agents share that process:
//!
//! * `PR` thresholds a likelihood ratio `f` of absence against presence,
//!   built from observations binarized at `c = 1 / (theta_hit - 1)`.
//! * `KFA` tracks the signal mean with a Kalman filter and reports
//!   "present" once the posterior probability exceeds
//!   `theta_hit / (theta_hit + 2)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::model::{ModelSpec, Response, Simulator};
use crate::rng::SimRng;
use crate::space::{DesignDim, DesignSpace, ParamSpec};
use crate::stats::norm_cdf;

pub const PRESENT: f64 = 1.0;
pub const ABSENT: f64 = 0.0;

const HIT_RANGE: (f64, f64) = (1.01, 7.0);

/// Probability-ratio agent. Parameters: `theta_sens, theta_hit, theta_low, theta_len`.
#[derive(Clone, Copy, Debug)]
pub struct ProbabilityRatio;

/// Kalman-filter accumulator. Parameters: `theta_sens, theta_hit`.
#[derive(Clone, Copy, Debug)]
pub struct KalmanAccumulator;

fn observe(present: bool, strength: f64, sens: f64, rng: &mut SimRng) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    if present { strength + sens * z } else { sens * z }
}

fn episode(design: &[f64], rng: &mut SimRng) -> (bool, f64, usize) {
    let present = rng.random::<bool>();
    let max_obs = (design[1].round() as usize).max(1);
    (present, design[0], max_obs)
}

fn response(decision: f64, looks: usize) -> Response {
    Response(vec![decision, looks as f64])
}

impl ProbabilityRatio {
    /// Per-observation log ratios `log P(b | absent) - log P(b | present)` for
    /// `b = below` and `b = above` the cut.
    pub fn log_ratios(sens: f64, hit: f64, strength: f64) -> (f64, f64) {
        let cut = 1.0 / (hit.clamp(HIT_RANGE.0, HIT_RANGE.1) - 1.0);
        let below_present = norm_cdf((cut - strength) / sens).clamp(1e-300, 1.0);
        let below_absent = norm_cdf(cut / sens).clamp(1e-300, 1.0);
        let above_present = (1.0 - norm_cdf((cut - strength) / sens)).max(1e-300);
        let above_absent = (1.0 - norm_cdf(cut / sens)).max(1e-300);
        (
            below_absent.ln() - below_present.ln(),
            above_absent.ln() - above_present.ln(),
        )
    }
}

impl Simulator for ProbabilityRatio {
    fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response {
        let (sens, hit, low, len) = (theta[0], theta[1], theta[2], theta[3]);
        let (present, strength, max_obs) = episode(design, rng);
        let cut = 1.0 / (hit.clamp(HIT_RANGE.0, HIT_RANGE.1) - 1.0);
        let (lr_below, lr_above) = Self::log_ratios(sens, hit, strength);
        let mut log_f = 0.0;
        for t in 0..max_obs {
            let o = observe(present, strength, sens, rng);
            log_f += if o <= cut { lr_below } else { lr_above };
            let f = log_f.exp();
            if f <= low {
                return response(PRESENT, t);
            }
            if f >= low + len {
                return response(ABSENT, t);
            }
            if t + 1 == max_obs {
                let decision = if (f - low).abs() <= (low + len - f).abs() { PRESENT } else { ABSENT };
                return response(decision, t);
            }
        }
        unreachable!("loop always returns on the last observation")
    }
}

impl KalmanAccumulator {
    /// Threshold on the posterior probability of presence.
    pub fn threshold(hit: f64) -> f64 {
        hit / (hit + 2.0)
    }
}

impl Simulator for KalmanAccumulator {
    fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response {
        let (sens, hit) = (theta[0], theta[1]);
        let (present, strength, max_obs) = episode(design, rng);
        let mid = 0.5 * strength;
        let noise = sens * sens;
        let mut mean = mid;
        let mut var = mid * mid + noise;
        let tau = Self::threshold(hit);
        for t in 0..max_obs {
            let o = observe(present, strength, sens, rng);
            let gain = var / (var + noise);
            mean += gain * (o - mean);
            var *= 1.0 - gain;
            let p = norm_cdf((mean - mid) / var.sqrt());
            if p > tau {
                return response(PRESENT, t);
            }
            if t + 1 == max_obs {
                // Out of looks: take the action with higher expected reward.
                let decision = if p > 3.0 / (hit + 4.0) { PRESENT } else { ABSENT };
                return response(decision, t);
            }
        }
        unreachable!("loop always returns on the last observation")
    }
}

fn sensory() -> Vec<ParamSpec> {
    vec![
        ParamSpec::uniform("theta_sens", 0.1, 1.0),
        ParamSpec::uniform("theta_hit", 1.0, 7.0),
    ]
}

pub fn models() -> Vec<ModelSpec> {
    let mut pr = sensory();
    pr.push(ParamSpec::uniform("theta_low", 0.0, 5.0));
    pr.push(ParamSpec::uniform("theta_len", 0.0, 5.0));
    vec![
        ModelSpec::new("KFA", 0, sensory(), KalmanAccumulator),
        ModelSpec::new("PR", 1, pr, ProbabilityRatio),
    ]
}

pub fn design_space() -> DesignSpace {
    DesignSpace::new(vec![
        DesignDim::Continuous {
            name: "signal_strength".into(),
            low: 0.0,
            high: 4.0,
        },
        DesignDim::Integer {
            name: "max_observations".into(),
            low: 2,
            high: 10,
        },
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn wide_band_forces_decision_at_cap() {
        // Strength 0 keeps every ratio at 1, inside (0, 5).
        let mut rng = rng_from(4);
        for d_obs in 2..=10 {
            let r = ProbabilityRatio.simulate(&[0.5, 3.0, 0.0, 5.0], &[0.0, d_obs as f64], &mut rng);
            assert_eq!(r.0[1], (d_obs - 1) as f64);
        }
    }

    fn present_rate(spec: &ModelSpec, theta: &[f64], design: &[f64], present_only: bool, seed: u64) -> f64 {
        // Re-run episodes until enough of the requested kind are collected.
        let mut rng = rng_from(seed);
        let mut hits = 0;
        let mut n = 0;
        while n < 100 {
            let mut probe = rng.clone();
            let present = probe.random::<bool>();
            let r = spec.simulate(theta, design, &mut rng);
            if present_only && !present {
                continue;
            }
            n += 1;
            hits += (r.0[0] == PRESENT) as usize;
        }
        hits as f64 / n as f64
    }

    #[test]
    fn strong_signal_is_detected() {
        let ms = models();
        let kfa = present_rate(&ms[0], &[0.1, 4.0], &[4.0, 5.0], true, 1);
        let pr = present_rate(&ms[1], &[0.1, 4.0, 0.5, 2.0], &[4.0, 5.0], true, 2);
        assert!(kfa >= 0.99, "{kfa}");
        assert!(pr >= 0.99, "{pr}");
    }

    #[test]
    fn zero_strength_is_chance() {
        let ms = models();
        for (spec, theta) in [(&ms[0], vec![0.5, 3.0]), (&ms[1], vec![0.5, 3.0, 0.5, 1.0])] {
            let mut rng = rng_from(6);
            let mut correct = 0;
            for _ in 0..1000 {
                let mut probe = rng.clone();
                let present = probe.random::<bool>();
                let r = spec.simulate(&theta, &[0.0, 5.0], &mut rng);
                correct += ((r.0[0] == PRESENT) == present) as usize;
            }
            let acc = correct as f64 / 1000.0;
            assert!((acc - 0.5).abs() <= 0.1, "{} {acc}", spec.name());
        }
    }

    #[test]
    fn responses_respect_types() {
        let ms = models();
        let space = design_space();
        let mut rng = rng_from(8);
        for _ in 0..2000 {
            let d = space.sample(&mut rng);
            for m in &ms {
                let th = m.sample_prior(&mut rng);
                let r = m.simulate(&th, &d.0, &mut rng);
                assert!(r.0[0] == PRESENT || r.0[0] == ABSENT);
                assert!(r.0[1] >= 0.0 && r.0[1] <= d.0[1] - 1.0 && r.0[1].fract() == 0.0);
            }
        }
    }
}
