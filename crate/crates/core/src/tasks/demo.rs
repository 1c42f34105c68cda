//! Two Gaussian models with opposite means; the design sets the noise SD.

use rand_distr::{Distribution, StandardNormal};

use crate::model::{ModelSpec, Response, Simulator};
use crate::rng::SimRng;
use crate::space::{DesignDim, DesignSpace, ParamSpec};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `x ~ N(sign * theta_mu, d^2)`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianMean {
    pub sign: f64,
}

impl Simulator for GaussianMean {
    fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response {
        let z: f64 = StandardNormal.sample(rng);
        Response::scalar(self.sign * theta[0] + design[0] * z)
    }

    fn log_likelihood(&self, response: &Response, theta: &[f64], design: &[f64]) -> Option<f64> {
        let sd = design[0];
        let u = (response.0[0] - self.sign * theta[0]) / sd;
        Some(-0.5 * u * u - sd.ln() - LN_SQRT_2PI)
    }

    fn has_likelihood(&self) -> bool {
        true
    }
}

pub fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::new("PM", 0, vec![ParamSpec::uniform("theta_mu", 0.0, 5.0)], GaussianMean { sign: 1.0 }),
        ModelSpec::new("NM", 1, vec![ParamSpec::uniform("theta_mu", 0.0, 5.0)], GaussianMean { sign: -1.0 }),
    ]
}

pub fn design_space() -> DesignSpace {
    DesignSpace::new(vec![DesignDim::Continuous {
        name: "noise_sd".into(),
        low: 0.001,
        high: 5.0,
    }])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn tiny_noise_stays_near_mean() {
        let ms = models();
        let mut rng = rng_from(1);
        for _ in 0..10_000 {
            let x = ms[0].simulate(&[2.0], &[0.001], &mut rng).0[0];
            assert!((1.99..=2.01).contains(&x));
        }
    }

    #[test]
    fn means_are_mirrored_and_unbiased() {
        let ms = models();
        let mut rng = rng_from(2);
        let n = 100_000;
        let pm: f64 = (0..n).map(|_| ms[0].simulate(&[1.0], &[1.0], &mut rng).0[0]).sum::<f64>() / n as f64;
        let nm: f64 = (0..n).map(|_| ms[1].simulate(&[1.0], &[1.0], &mut rng).0[0]).sum::<f64>() / n as f64;
        assert!((pm - 1.0).abs() < 0.01, "{pm}");
        assert!((nm + 1.0).abs() < 0.01, "{nm}");
    }

    #[test]
    fn density_integrates_to_one() {
        let ms = models();
        let (th, d) = ([1.3], [0.7]);
        let step = 1e-3;
        let total: f64 = (-10_000..10_000)
            .map(|i| ms[1].exact_likelihood(&Response::scalar(i as f64 * step), &th, &d).unwrap() * step)
            .sum();
        assert!((total - 1.0).abs() < 1e-6);
    }
}
