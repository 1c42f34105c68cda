//! Batch acquisition over the unit cube. Both criteria target minimization
//! of the modelled function.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::optimize::{minimize_multistart, MultistartConfig};
use super::{backward_sub, cholesky, forward_sub, GpModel};
use crate::rng::{child_rng, streams, SimRng};
use crate::stats::{norm_cdf, norm_pdf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AcquisitionKind {
    /// Lower confidence bound `mu - w * sqrt(nu)`, minimized.
    Lcb { exploration_weight: f64 },
    /// Monte-Carlo noisy expected improvement, maximized.
    NoisyEi { mc_samples: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionSpec {
    pub kind: AcquisitionKind,
    pub batch_size: usize,
}

impl AcquisitionSpec {
    pub fn lcb(exploration_weight: f64, batch_size: usize) -> Self {
        Self {
            kind: AcquisitionKind::Lcb { exploration_weight },
            batch_size,
        }
    }

    pub fn noisy_ei(mc_samples: usize, batch_size: usize) -> Self {
        Self {
            kind: AcquisitionKind::NoisyEi { mc_samples },
            batch_size,
        }
    }
}

/// Proposes `spec.batch_size` distinct points in the unit cube. Points already
/// chosen in the batch repel later ones through a Gaussian penalty.
pub fn propose_batch(gp: &GpModel, spec: &AcquisitionSpec, seed: u64) -> Vec<Vec<f64>> {
    propose_batch_with(gp, spec, seed, &MultistartConfig::default())
}

pub(crate) fn propose_batch_with(
    gp: &GpModel,
    spec: &AcquisitionSpec,
    seed: u64,
    search: &MultistartConfig,
) -> Vec<Vec<f64>> {
    let dim = gp.dim();
    let mut rng = child_rng(seed, streams::ACQUISITION, 0);
    let nei = match spec.kind {
        AcquisitionKind::NoisyEi { mc_samples } => Some(NoisyEi::new(gp, mc_samples.max(1), &mut rng)),
        AcquisitionKind::Lcb { .. } => None,
    };
    let acq = |x: &[f64]| -> f64 {
        match (&spec.kind, &nei) {
            (AcquisitionKind::Lcb { exploration_weight }, _) => {
                let (m, v) = gp.predict(x);
                m - exploration_weight * v.sqrt()
            }
            (AcquisitionKind::NoisyEi { .. }, Some(nei)) => -nei.value(gp, x),
            _ => unreachable!(),
        }
    };

    let radius = 0.5 * gp.kernel().lengthscales.iter().sum::<f64>() / dim as f64;
    let mut chosen: Vec<Vec<f64>> = Vec::with_capacity(spec.batch_size.max(1));
    let mut scale = 0.0;
    for _ in 0..spec.batch_size.max(1) {
        let penalty = |x: &[f64]| -> f64 {
            chosen
                .iter()
                .map(|c| {
                    let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b).powi(2)).sum();
                    (-0.5 * d2 / (radius * radius)).exp()
                })
                .sum::<f64>()
        };
        let result = minimize_multistart(|x| acq(x) + scale * penalty(x), dim, search, &mut rng);
        if chosen.is_empty() {
            let (lo, hi) = result
                .starts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| {
                    (lo.min(*v), hi.max(*v))
                });
            scale = if hi > lo { hi - lo } else { 1.0 };
        }
        let mut pick = result.best;
        let too_close = |p: &[f64]| {
            chosen
                .iter()
                .any(|c| c.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() <= 1e-6)
        };
        if too_close(&pick) {
            // Flat landscape: fall back to the start farthest from the batch.
            pick = result
                .starts
                .iter()
                .map(|(x, _)| x)
                .max_by(|a, b| min_dist(a, &chosen).total_cmp(&min_dist(b, &chosen)))
                .expect("starts")
                .clone();
        }
        chosen.push(pick);
    }
    chosen
}

fn min_dist(x: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter()
        .map(|c| c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Noisy expected improvement with the incumbent drawn jointly from the
/// posterior at the observed inputs. The candidate's value is integrated
/// analytically conditional on each incumbent sample.
struct NoisyEi {
    n: usize,
    /// Whitened cross terms `L^{-1} k(X, x_i)` for each training input.
    whitened: Vec<Vec<f64>>,
    /// Cholesky factor of the posterior covariance at the training inputs.
    post_chol: Vec<f64>,
    /// `Sigma^{-1} (f_s - mu_X)` per sample.
    projections: Vec<Vec<f64>>,
    incumbents: Vec<f64>,
}

impl NoisyEi {
    fn new(gp: &GpModel, samples: usize, rng: &mut SimRng) -> Self {
        let n = gp.len();
        let inputs = gp.inputs();
        let whitened: Vec<Vec<f64>> = inputs.iter().map(|x| gp.whitened_cross(x).1).collect();
        let mu: Vec<f64> = inputs.iter().map(|x| gp.predict_mean(x)).collect();
        let mut cov = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = gp.kernel().eval(&inputs[i], &inputs[j]);
                let dot: f64 = whitened[i].iter().zip(&whitened[j]).map(|(a, b)| a * b).sum();
                cov[i * n + j] = k - dot;
                cov[j * n + i] = k - dot;
            }
        }
        let mut shift = 1e-10;
        let post_chol = loop {
            if let Some(l) = cholesky(&cov, n, shift) {
                break l;
            }
            shift *= 10.0;
        };
        let mut projections = Vec::with_capacity(samples);
        let mut incumbents = Vec::with_capacity(samples);
        for _ in 0..samples {
            let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
            let mut best = f64::INFINITY;
            for i in 0..n {
                let f: f64 = mu[i] + (0..=i).map(|k| post_chol[i * n + k] * z[k]).sum::<f64>();
                best = best.min(f);
            }
            projections.push(backward_sub(&post_chol, n, &z));
            incumbents.push(best);
        }
        Self {
            n,
            whitened,
            post_chol,
            projections,
            incumbents,
        }
    }

    fn value(&self, gp: &GpModel, x: &[f64]) -> f64 {
        let (k, v) = gp.whitened_cross(x);
        let mean = gp.predict_mean(x);
        let prior = gp.kernel().eval(x, x);
        let var = (prior - v.iter().map(|a| a * a).sum::<f64>()).max(0.0);
        let c: Vec<f64> = (0..self.n)
            .map(|i| k[i] - v.iter().zip(&self.whitened[i]).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        let w = forward_sub(&self.post_chol, self.n, &c);
        let cond_var = (var - w.iter().map(|a| a * a).sum::<f64>()).max(1e-12);
        let sd = cond_var.sqrt();
        let total: f64 = self
            .projections
            .iter()
            .zip(&self.incumbents)
            .map(|(u, &best)| {
                let m = mean + c.iter().zip(u).map(|(a, b)| a * b).sum::<f64>();
                let z = (best - m) / sd;
                (best - m) * norm_cdf(z) + sd * norm_pdf(z)
            })
            .sum();
        total / self.projections.len() as f64
    }
}
