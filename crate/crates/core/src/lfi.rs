//! Likelihood-free belief updates from Gaussian-process discrepancy surrogates.
//!
//! For each live model a GP is fit to `(theta, rho(x_theta, x_obs))` pairs.
//! Parameters are weighted by the probability that their discrepancy falls
//! below `epsilon`, the smallest surrogate mean at the evaluated points. Models
//! are weighted by a Gaussian kernel on their expected discrepancy with a
//! single shared bandwidth `eta`, the smallest expected discrepancy across
//! live models.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Particle, ParticleSet};
use crate::error::{Error, Result};
use crate::gp::{propose_batch_with, AcquisitionSpec, GpModel, Kernel, MultistartConfig, DEFAULT_LENGTHSCALE};
use crate::model::{Discrepancy, ModelSpec, Response};
use crate::rng::{child_rng, derive_seed, streams};
use crate::stats::norm_cdf;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LfiConfig {
    /// Simulations per model per trial.
    pub budget: usize,
    /// Parameters drawn from the current belief before acquisition starts.
    pub n_initial: usize,
    pub batch_size: usize,
    pub exploration_weight: f64,
    pub lengthscale: f64,
    /// GP noise variance on standardized discrepancies.
    pub noise_variance: f64,
    /// Parameter draws per model for the expected discrepancy.
    pub marginal_draws: usize,
}

impl Default for LfiConfig {
    fn default() -> Self {
        Self {
            budget: 100,
            n_initial: 50,
            batch_size: 5,
            exploration_weight: 2.0,
            lengthscale: DEFAULT_LENGTHSCALE,
            noise_variance: 0.1,
            marginal_draws: 512,
        }
    }
}

impl LfiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget < 2 || self.n_initial < 2 || self.batch_size == 0 || self.marginal_draws == 0 {
            return Err(Error::Config(
                "lfi: budget and n_initial must be >= 2, batch_size and marginal_draws >= 1".into(),
            ));
        }
        if !(self.noise_variance > 0.0 && self.lengthscale > 0.0 && self.exploration_weight >= 0.0) {
            return Err(Error::Config("lfi: noise_variance and lengthscale must be positive".into()));
        }
        Ok(())
    }
}

/// Surrogate-backed likelihood approximation for one model at one trial.
#[derive(Clone, Debug)]
pub struct LikelihoodApprox {
    pub model: usize,
    pub surrogate: GpModel,
    /// Acceptance threshold, in discrepancy units.
    pub epsilon: f64,
    pub trial_index: u64,
    pub n_sims: usize,
    offset: f64,
    scale: f64,
}

impl LikelihoodApprox {
    /// Surrogate mean and latent variance of the discrepancy at unit-cube `u`.
    pub fn predict_unit(&self, u: &[f64]) -> (f64, f64) {
        let (m, v) = self.surrogate.predict(u);
        (self.offset + self.scale * m, self.scale * self.scale * v)
    }

    pub fn mean_unit(&self, u: &[f64]) -> f64 {
        self.offset + self.scale * self.surrogate.predict_mean(u)
    }

    /// Noise variance in discrepancy units.
    pub fn noise_variance(&self) -> f64 {
        self.scale * self.scale * self.surrogate.noise_variance()
    }

    /// Surrogate means at the evaluated parameters, in discrepancy units.
    pub fn evaluated_means(&self) -> Vec<f64> {
        self.surrogate.inputs().iter().map(|u| self.mean_unit(u)).collect()
    }

    /// `Phi((epsilon - mu) / sqrt(nu + sigma^2))` at unit-cube `u`.
    pub fn likelihood_unit(&self, u: &[f64]) -> f64 {
        let (m, v) = self.predict_unit(u);
        norm_cdf((self.epsilon - m) / (v + self.noise_variance()).sqrt())
    }
}

pub fn evaluate_parameter_likelihood(approx: &LikelihoodApprox, spec: &ModelSpec, theta: &[f64]) -> f64 {
    approx.likelihood_unit(&spec.to_unit(theta))
}

/// Fits the discrepancy surrogate of `model` for the observation `observed`
/// at `design`.
#[allow(clippy::too_many_arguments)]
pub fn build_surrogate(
    spec: &ModelSpec,
    model: usize,
    belief: &ParticleSet,
    observed: &Response,
    design: &[f64],
    discrepancy: &Discrepancy,
    cfg: &LfiConfig,
    seed: u64,
) -> Result<LikelihoodApprox> {
    let sampler = belief
        .conditional_sampler(model)
        .ok_or_else(|| Error::Numerical(format!("model `{}` has no particles", spec.name())))?;
    let seed = derive_seed(seed, streams::SURROGATE, model as u64);
    let mut draw_rng = child_rng(seed, 0, 0);
    let n_init = cfg.n_initial.min(cfg.budget);

    let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(cfg.budget);
    let mut rhos: Vec<f64> = Vec::with_capacity(cfg.budget);
    let run = |theta: &[f64], k: usize, inputs: &mut Vec<Vec<f64>>, rhos: &mut Vec<f64>| -> Result<()> {
        let mut rng = child_rng(seed, 1, k as u64);
        let x = spec.simulate(theta, design, &mut rng);
        let rho = discrepancy.distance(&x, observed);
        if !rho.is_finite() {
            return Err(Error::Simulator {
                model: spec.name().to_string(),
                theta: theta.to_vec(),
                message: format!("non-finite discrepancy from response {:?}", x.0),
            });
        }
        inputs.push(spec.to_unit(theta));
        rhos.push(rho);
        Ok(())
    };
    for k in 0..n_init {
        let theta = sampler.sample(&mut draw_rng).theta.clone();
        run(&theta, k, &mut inputs, &mut rhos)?;
    }

    let kernel = Kernel::rbf(spec.dim(), cfg.lengthscale);
    let search = MultistartConfig::default();
    let acq = AcquisitionSpec::lcb(cfg.exploration_weight, cfg.batch_size);
    let mut batch = 0u64;
    while inputs.len() + cfg.batch_size <= cfg.budget {
        let (gp, _, _) = fit_standardized(&inputs, &rhos, &kernel, cfg.noise_variance)?;
        for u in propose_batch_with(&gp, &acq, derive_seed(seed, 2, batch), &search) {
            let theta = spec.from_unit(&u);
            let k = inputs.len();
            run(&theta, k, &mut inputs, &mut rhos)?;
        }
        batch += 1;
    }

    let n_sims = inputs.len();
    let (surrogate, offset, scale) = fit_standardized(&inputs, &rhos, &kernel, cfg.noise_variance)?;
    let mut approx = LikelihoodApprox {
        model,
        surrogate,
        epsilon: 0.0,
        trial_index: belief.trial_index,
        n_sims,
        offset,
        scale,
    };
    approx.epsilon = approx
        .evaluated_means()
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(approx)
}

fn fit_standardized(inputs: &[Vec<f64>], rhos: &[f64], kernel: &Kernel, noise: f64) -> Result<(GpModel, f64, f64)> {
    let n = rhos.len() as f64;
    let mean = rhos.iter().sum::<f64>() / n;
    let sd = (rhos.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    let scale = if sd > 1e-9 { sd } else { 1.0 };
    let targets = rhos.iter().map(|r| (r - mean) / scale).collect();
    let gp = GpModel::fit(inputs.to_vec(), targets, kernel.clone(), noise)?;
    Ok((gp, mean, scale))
}

/// Expected discrepancies, the shared bandwidth and kernel values per model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginalLikelihoodReport {
    /// `None` for dead models.
    pub omega: Vec<Option<f64>>,
    pub eta: f64,
    pub kappa: Vec<f64>,
}

/// Unnormalized Gaussian kernel `exp(-u^2 / (2 eta^2))`.
pub fn gaussian_kernel(u: f64, eta: f64) -> f64 {
    (-(u * u) / (2.0 * eta * eta)).exp()
}

/// Builds the report from expected discrepancies of the live models.
pub fn kernel_report(omega: Vec<Option<f64>>) -> Result<MarginalLikelihoodReport> {
    let eta = omega
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !eta.is_finite() {
        return Err(Error::AllModelsDead);
    }
    let eta = eta.max(1e-12);
    let kappa = omega
        .iter()
        .map(|w| w.map_or(0.0, |w| gaussian_kernel(w, eta)))
        .collect();
    Ok(MarginalLikelihoodReport { omega, eta, kappa })
}

/// Averages each surrogate's mean discrepancy over parameters drawn from its
/// model's conditional belief. No simulations are spent here.
pub fn marginal_likelihood(
    approxes: &[LikelihoodApprox],
    models: &[ModelSpec],
    belief: &ParticleSet,
    n_draws: usize,
    seed: u64,
) -> Result<MarginalLikelihoodReport> {
    let mut omega = vec![None; belief.models.len()];
    for a in approxes {
        let Some(sampler) = belief.conditional_sampler(a.model) else {
            continue;
        };
        let mut rng = child_rng(seed, streams::MARGINAL, a.model as u64);
        let spec = &models[a.model];
        let total: f64 = (0..n_draws.max(1))
            .map(|_| a.mean_unit(&spec.to_unit(&sampler.sample(&mut rng).theta)).max(0.0))
            .sum();
        omega[a.model] = Some(total / n_draws.max(1) as f64);
    }
    kernel_report(omega)
}

/// Outcome of a likelihood-free update.
#[derive(Clone, Debug)]
pub struct UpdateOutcome {
    /// Reweighted belief, before resampling.
    pub belief: ParticleSet,
    /// Models whose parameter likelihood vanished on every particle; their
    /// conditional weights were kept.
    pub degenerate_models: Vec<usize>,
}

/// Multiplies each model's mass by its kernel value and moves parameter
/// weights within each model by the surrogate likelihood, normalized per
/// model.
pub fn posterior_update(
    belief: &ParticleSet,
    approxes: &[LikelihoodApprox],
    models: &[ModelSpec],
    report: &MarginalLikelihoodReport,
) -> Result<UpdateOutcome> {
    let k = belief.models.len();
    let mut by_model: Vec<Option<&LikelihoodApprox>> = vec![None; k];
    for a in approxes {
        by_model[a.model] = Some(a);
    }
    let likelihood: Vec<f64> = belief
        .particles
        .par_iter()
        .map(|p: &Particle| {
            if p.weight <= 0.0 {
                return 0.0;
            }
            match by_model[p.model] {
                Some(a) => a.likelihood_unit(&models[p.model].to_unit(&p.theta)),
                None => 0.0,
            }
        })
        .collect();

    let mut mass = vec![0.0; k];
    let mut weighted = vec![0.0; k];
    for (p, l) in belief.particles.iter().zip(&likelihood) {
        mass[p.model] += p.weight;
        weighted[p.model] += p.weight * l;
    }
    let degenerate_models: Vec<usize> = (0..k)
        .filter(|&m| mass[m] > 0.0 && by_model[m].is_some() && !(weighted[m] > 0.0))
        .collect();

    let mut out = belief.clone();
    for (p, l) in out.particles.iter_mut().zip(&likelihood) {
        let m = p.model;
        if mass[m] <= 0.0 || by_model[m].is_none() {
            p.weight = 0.0;
            continue;
        }
        let kappa = report.kappa[m];
        p.weight = if weighted[m] > 0.0 {
            p.weight * l / weighted[m] * mass[m] * kappa
        } else {
            p.weight * kappa
        };
    }
    let total = out.total_weight();
    if !(total > 0.0) {
        return Err(Error::DegenerateUpdate);
    }
    for p in &mut out.particles {
        p.weight /= total;
    }
    Ok(UpdateOutcome {
        belief: out,
        degenerate_models,
    })
}

/// Per-trial audit record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LfiDiagnostics {
    pub trial: u64,
    pub per_model: Vec<ModelDiagnostics>,
    pub eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelDiagnostics {
    pub model: String,
    pub omega: Option<f64>,
    pub kappa: f64,
    pub epsilon: Option<f64>,
    pub n_sims: usize,
}

impl LfiDiagnostics {
    pub fn new(trial: u64, models: &[ModelSpec], approxes: &[LikelihoodApprox], report: &MarginalLikelihoodReport) -> Self {
        let per_model = models
            .iter()
            .enumerate()
            .map(|(i, m)| {
                let a = approxes.iter().find(|a| a.model == i);
                ModelDiagnostics {
                    model: m.name().to_string(),
                    omega: report.omega[i],
                    kappa: report.kappa[i],
                    epsilon: a.map(|a| a.epsilon),
                    n_sims: a.map_or(0, |a| a.n_sims),
                }
            })
            .collect();
        Self {
            trial,
            per_model,
            eta: report.eta,
        }
    }
}

/// One full likelihood-free step: surrogates for every live model, the kernel
/// report, and the reweighted (not yet resampled) belief.
pub fn lfi_step(
    belief: &ParticleSet,
    models: &[ModelSpec],
    observed: &Response,
    design: &[f64],
    discrepancy: &Discrepancy,
    cfg: &LfiConfig,
    seed: u64,
) -> Result<(UpdateOutcome, LfiDiagnostics)> {
    let live = belief.live_models();
    if live.is_empty() {
        return Err(Error::AllModelsDead);
    }
    let approxes = live
        .iter()
        .map(|&m| build_surrogate(&models[m], m, belief, observed, design, discrepancy, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let report = marginal_likelihood(&approxes, models, belief, cfg.marginal_draws, seed)?;
    let outcome = posterior_update(belief, &approxes, models, &report)?;
    let diag = LfiDiagnostics::new(belief.trial_index, models, &approxes, &report);
    Ok((outcome, diag))
}
