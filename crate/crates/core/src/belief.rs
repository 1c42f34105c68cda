//! Weighted particle approximation of the joint posterior over
//! `(model, parameters)`.
//!
//! A [`ParticleSet`] is an immutable value: every operation returns a new set.
//! Particles store their model as an index into the set's model table.
//!
//! Models whose mass drops below `1/N` before resampling receive no particles
//! and are never revived; jitter perturbs parameters only, never model ids.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelId, ModelSpec, ParameterVector};
use crate::rng::{child_rng, streams, SimRng};

/// Default jitter, as a fraction of each parameter's prior box width.
pub const DEFAULT_JITTER: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub model: usize,
    pub theta: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub models: Vec<ModelId>,
    pub particles: Vec<Particle>,
    pub seed: u64,
    pub trial_index: u64,
}

/// A point estimate extracted by a decision rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub model: ModelId,
    pub theta: ParameterVector,
}

/// Kernel bandwidth for the density-mode estimate, in unit-box coordinates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Silverman's rule per dimension on the weighted particles.
    #[default]
    Silverman,
    Fixed(f64),
}

impl ParticleSet {
    /// Uniform model prior, parameters from each model's prior, equal weights.
    pub fn from_priors(models: &[ModelSpec], n_particles: usize, seed: u64) -> Result<Self> {
        let k = models.len();
        Self::from_priors_with(models, &vec![1.0 / k.max(1) as f64; k], n_particles, seed)
    }

    pub fn from_priors_with(
        models: &[ModelSpec],
        model_prior: &[f64],
        n_particles: usize,
        seed: u64,
    ) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::Config("empty model set".into()));
        }
        if n_particles == 0 {
            return Err(Error::Config("particle count must be positive".into()));
        }
        if model_prior.len() != models.len() || model_prior.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Config("model prior must be one nonnegative weight per model".into()));
        }
        let total: f64 = model_prior.iter().sum();
        if total <= 0.0 {
            return Err(Error::Config("model prior has zero mass".into()));
        }
        // Model counts follow the prior exactly (largest remainder), so a
        // fresh belief reports the prior marginals without sampling noise.
        let quota: Vec<f64> = model_prior.iter().map(|p| p / total * n_particles as f64).collect();
        let mut counts: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
        let mut order: Vec<usize> = (0..models.len()).collect();
        order.sort_by(|&a, &b| (quota[b] - quota[b].floor()).total_cmp(&(quota[a] - quota[a].floor())));
        let short = n_particles - counts.iter().sum::<usize>();
        for &m in order.iter().take(short) {
            counts[m] += 1;
        }
        let mut rng = child_rng(seed, streams::INIT, 0);
        let w = 1.0 / n_particles as f64;
        let particles = counts
            .iter()
            .enumerate()
            .flat_map(|(m, &c)| std::iter::repeat_n(m, c))
            .map(|m| Particle {
                model: m,
                theta: models[m].sample_prior(&mut rng),
                weight: w,
            })
            .collect();
        Ok(Self {
            models: models.iter().map(|m| m.id.clone()).collect(),
            particles,
            seed,
            trial_index: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn normalized(&self) -> Self {
        let total = self.total_weight();
        let mut out = self.clone();
        if total > 0.0 {
            for p in &mut out.particles {
                p.weight /= total;
            }
        }
        out
    }

    /// Multiplies each weight by `likelihood(particle)` and renormalizes.
    pub fn reweight(&self, likelihood: impl Fn(&Particle) -> f64) -> Result<Self> {
        let mut out = self.clone();
        for p in &mut out.particles {
            let l = likelihood(p);
            p.weight *= if l.is_finite() && l > 0.0 { l } else { 0.0 };
        }
        if !(out.total_weight() > 0.0) {
            return Err(Error::DegenerateUpdate);
        }
        Ok(out.normalized())
    }

    /// Like [`reweight`](Self::reweight) with log-likelihoods, stable under
    /// extreme values.
    pub fn reweight_log(&self, log_likelihood: impl Fn(&Particle) -> f64) -> Result<Self> {
        let logs: Vec<f64> = self
            .particles
            .iter()
            .map(|p| {
                if p.weight > 0.0 {
                    log_likelihood(p) + p.weight.ln()
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::DegenerateUpdate);
        }
        let mut out = self.clone();
        for (p, l) in out.particles.iter_mut().zip(&logs) {
            p.weight = (l - max).exp();
        }
        Ok(out.normalized())
    }

    /// Summed weight per model (normalized).
    pub fn model_marginals(&self) -> Vec<f64> {
        let mut mass = vec![0.0; self.models.len()];
        for p in &self.particles {
            mass[p.model] += p.weight;
        }
        let total: f64 = mass.iter().sum();
        if total > 0.0 {
            mass.iter_mut().for_each(|m| *m /= total);
        }
        mass
    }

    /// Models that still hold particles with positive weight.
    pub fn live_models(&self) -> Vec<usize> {
        self.model_marginals()
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn effective_sample_size(&self) -> f64 {
        let total = self.total_weight();
        let sq: f64 = self.particles.iter().map(|p| (p.weight / total).powi(2)).sum();
        1.0 / sq
    }

    /// Indices and normalized weights of one model's particles.
    pub fn conditional(&self, model: usize) -> (Vec<usize>, Vec<f64>) {
        let idx: Vec<usize> = self
            .particles
            .iter()
            .enumerate()
            .filter(|(_, p)| p.model == model && p.weight > 0.0)
            .map(|(i, _)| i)
            .collect();
        let total: f64 = idx.iter().map(|&i| self.particles[i].weight).sum();
        let w = idx.iter().map(|&i| self.particles[i].weight / total).collect();
        (idx, w)
    }

    /// Sampler over one model's conditional particle distribution.
    pub fn conditional_sampler(&self, model: usize) -> Option<ParticleSampler<'_>> {
        let (idx, w) = self.conditional(model);
        if idx.is_empty() {
            return None;
        }
        Some(ParticleSampler {
            set: self,
            index: WeightedIndex::new(w.into_iter()),
            members: idx,
        })
    }

    /// Sampler over the joint `(model, theta)` distribution.
    pub fn joint_sampler(&self) -> ParticleSampler<'_> {
        let members: Vec<usize> = (0..self.particles.len()).collect();
        ParticleSampler {
            set: self,
            index: WeightedIndex::new(self.particles.iter().map(|p| p.weight)),
            members,
        }
    }

    /// Systematic resampling to equal weights, then Gaussian jitter with
    /// per-dimension SD `jitter_scale * box width`, clipped to the box.
    pub fn resample_with_jitter(&self, models: &[ModelSpec], jitter_scale: f64, seed: u64) -> Self {
        let n = self.particles.len();
        let threshold = 1.0 / n as f64;
        let marginals = self.model_marginals();
        let mut source = self.normalized();
        for p in &mut source.particles {
            if marginals[p.model] < threshold {
                p.weight = 0.0;
            }
        }
        // If every model fell below 1/N there is nothing sensible to kill.
        if !(source.total_weight() > 0.0) {
            source = self.normalized();
        }
        let source = source.normalized();

        let mut rng = child_rng(seed, streams::RESAMPLE, self.trial_index);
        let step = 1.0 / n as f64;
        let mut u = rng.random::<f64>() * step;
        let mut cumulative = 0.0;
        let mut j = 0;
        let w = 1.0 / n as f64;
        let mut particles = Vec::with_capacity(n);
        for p in source.particles.iter() {
            cumulative += p.weight;
            while u < cumulative && j < n {
                particles.push(Particle {
                    model: p.model,
                    theta: p.theta.clone(),
                    weight: w,
                });
                u += step;
                j += 1;
            }
        }
        // Round-off can leave the tail short by one.
        while particles.len() < n {
            let last = source
                .particles
                .iter()
                .rev()
                .find(|p| p.weight > 0.0)
                .expect("positive mass");
            particles.push(Particle {
                model: last.model,
                theta: last.theta.clone(),
                weight: w,
            });
        }

        if jitter_scale > 0.0 {
            for p in &mut particles {
                let spec = &models[p.model];
                for (v, width) in p.theta.iter_mut().zip(spec.widths()) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *v += z * jitter_scale * width;
                }
                spec.clip(&mut p.theta);
            }
        }

        Self {
            models: self.models.clone(),
            particles,
            seed: self.seed,
            trial_index: self.trial_index,
        }
    }

    pub fn with_trial_index(mut self, trial_index: u64) -> Self {
        self.trial_index = trial_index;
        self
    }

    /// MAP decision rule: most probable model, then the weighted
    /// kernel-density mode among that model's particles.
    pub fn map_estimate(&self, models: &[ModelSpec], bandwidth: Bandwidth) -> Estimate {
        let marginals = self.model_marginals();
        let mut best = 0;
        for (m, &mass) in marginals.iter().enumerate() {
            if mass > marginals[best] {
                best = m;
            }
        }
        self.estimate_for(models, best, bandwidth)
    }

    /// One weighted draw as a point estimate: the predictive baseline used when
    /// no data has been folded in.
    pub fn sampled_estimate(&self, seed: u64) -> Estimate {
        let mut rng = crate::rng::rng_from(seed);
        let sampler = self.joint_sampler();
        let p = sampler.sample(&mut rng);
        Estimate {
            model: self.models[p.model].clone(),
            theta: ParameterVector(p.theta.clone()),
        }
    }

    /// BIC-style rule: `-2 log(mass) + dim * log(t)`, lowest score wins.
    pub fn bic_estimate(&self, models: &[ModelSpec], n_trials: usize, bandwidth: Bandwidth) -> Estimate {
        let scores = self.bic_scores(models, n_trials);
        let mut best = 0;
        for (m, &s) in scores.iter().enumerate() {
            if s < scores[best] {
                best = m;
            }
        }
        self.estimate_for(models, best, bandwidth)
    }

    pub fn bic_scores(&self, models: &[ModelSpec], n_trials: usize) -> Vec<f64> {
        let t = n_trials.max(1) as f64;
        self.model_marginals()
            .iter()
            .zip(models)
            .map(|(&mass, spec)| {
                if mass > 0.0 {
                    -2.0 * mass.ln() + spec.dim() as f64 * t.ln()
                } else {
                    f64::INFINITY
                }
            })
            .collect()
    }

    fn estimate_for(&self, models: &[ModelSpec], model: usize, bandwidth: Bandwidth) -> Estimate {
        let spec = &models[model];
        let theta = match self.density_mode(spec, model, bandwidth) {
            Some(t) => t,
            // A model without particles still needs a parameter guess.
            None => spec.params.iter().map(|p| p.prior.mean()).collect(),
        };
        Estimate {
            model: self.models[model].clone(),
            theta: ParameterVector(theta),
        }
    }

    /// Particle maximizing a weighted Gaussian-kernel density over the
    /// model's particles (box-normalized coordinates). Ties go to the lowest
    /// particle index.
    pub fn density_mode(&self, spec: &ModelSpec, model: usize, bandwidth: Bandwidth) -> Option<Vec<f64>> {
        let (idx, w) = self.conditional(model);
        if idx.is_empty() {
            return None;
        }
        let pts: Vec<Vec<f64>> = idx
            .iter()
            .map(|&i| spec.to_unit(&self.particles[i].theta))
            .collect();
        let dim = spec.dim();
        let h = match bandwidth {
            Bandwidth::Fixed(h) => vec![h.max(1e-9); dim],
            Bandwidth::Silverman => silverman(&pts, &w),
        };
        let inv: Vec<f64> = h.iter().map(|h| 1.0 / h).collect();
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (a, pa) in pts.iter().enumerate() {
            let mut dens = 0.0;
            for (pb, wb) in pts.iter().zip(&w) {
                let mut q = 0.0;
                for d in 0..dim {
                    let z = (pa[d] - pb[d]) * inv[d];
                    q += z * z;
                }
                if q < 60.0 {
                    dens += wb * (-0.5 * q).exp();
                }
            }
            if dens > best.0 {
                best = (dens, a);
            }
        }
        Some(self.particles[idx[best.1]].theta.clone())
    }

    /// Weighted mean and central 90% interval per parameter of one model.
    pub fn parameter_summary(&self, model: usize) -> Option<Vec<ParamSummary>> {
        let (idx, w) = self.conditional(model);
        if idx.is_empty() {
            return None;
        }
        let dim = self.particles[idx[0]].theta.len();
        Some(
            (0..dim)
                .map(|d| {
                    let mut vals: Vec<(f64, f64)> = idx
                        .iter()
                        .zip(&w)
                        .map(|(&i, &wi)| (self.particles[i].theta[d], wi))
                        .collect();
                    let mean = vals.iter().map(|(v, w)| v * w).sum();
                    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
                    ParamSummary {
                        mean,
                        low: weighted_quantile(&vals, 0.05),
                        high: weighted_quantile(&vals, 0.95),
                    }
                })
                .collect(),
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub low: f64,
    pub high: f64,
}

fn weighted_quantile(sorted: &[(f64, f64)], q: f64) -> f64 {
    let mut acc = 0.0;
    for &(v, w) in sorted {
        acc += w;
        if acc >= q {
            return v;
        }
    }
    sorted.last().map(|x| x.0).unwrap_or(f64::NAN)
}

/// Silverman's rule per dimension with the weighted SD and the effective
/// sample size.
pub fn silverman(points: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let dim = points.first().map_or(0, Vec::len);
    let total: f64 = weights.iter().sum();
    let n_eff = total * total / weights.iter().map(|w| w * w).sum::<f64>();
    (0..dim)
        .map(|d| {
            let mean = points.iter().zip(weights).map(|(p, w)| p[d] * w).sum::<f64>() / total;
            let var = points
                .iter()
                .zip(weights)
                .map(|(p, w)| w * (p[d] - mean).powi(2))
                .sum::<f64>()
                / total;
            (1.06 * var.sqrt() * n_eff.powf(-0.2)).max(1e-3)
        })
        .collect()
}

/// Inverse-CDF sampler over nonnegative weights.
#[derive(Clone, Debug)]
pub struct WeightedIndex {
    cumulative: Vec<f64>,
}

impl WeightedIndex {
    pub fn new(weights: impl Iterator<Item = f64>) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .map(|w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        Self { cumulative }
    }

    pub fn sample(&self, rng: &mut SimRng) -> usize {
        let total = *self.cumulative.last().expect("nonempty weights");
        let u = rng.random::<f64>() * total;
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }
}

/// Draws particles (with replacement) proportionally to weight.
pub struct ParticleSampler<'a> {
    set: &'a ParticleSet,
    index: WeightedIndex,
    members: Vec<usize>,
}

impl ParticleSampler<'_> {
    pub fn sample(&self, rng: &mut SimRng) -> &Particle {
        &self.set.particles[self.members[self.index.sample(rng)]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Response, Simulator};
    use crate::space::ParamSpec;

    struct Null;
    impl Simulator for Null {
        fn simulate(&self, _: &[f64], _: &[f64], _: &mut SimRng) -> Response {
            Response::scalar(0.0)
        }
    }

    fn models(dims: &[usize]) -> Vec<ModelSpec> {
        dims.iter()
            .enumerate()
            .map(|(i, &d)| {
                ModelSpec::new(
                    format!("m{i}"),
                    i,
                    (0..d).map(|j| ParamSpec::uniform(format!("p{j}"), 0.0, 1.0)).collect(),
                    Null,
                )
            })
            .collect()
    }

    fn set(models: &[ModelSpec], particles: Vec<Particle>) -> ParticleSet {
        ParticleSet {
            models: models.iter().map(|m| m.id.clone()).collect(),
            particles,
            seed: 0,
            trial_index: 0,
        }
    }

    fn p(model: usize, theta: &[f64], weight: f64) -> Particle {
        Particle {
            model,
            theta: theta.to_vec(),
            weight,
        }
    }

    #[test]
    fn empty_model_list_is_a_config_error() {
        assert!(matches!(ParticleSet::from_priors(&[], 10, 1), Err(Error::Config(_))));
    }

    #[test]
    fn single_model_owns_every_particle() {
        let ms = models(&[2]);
        let s = ParticleSet::from_priors(&ms, 100, 3).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.particles.iter().all(|p| p.model == 0 && ms[0].contains(&p.theta)));
        assert!((s.total_weight() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_particle_reweight() {
        let ms = models(&[1]);
        let s = set(&ms, vec![p(0, &[0.1], 0.5), p(0, &[0.9], 0.5)]);
        let out = s
            .reweight(|q| if q.theta[0] < 0.5 { 2.0 } else { 1.0 })
            .unwrap();
        assert!((out.particles[0].weight - 2.0 / 3.0).abs() < 1e-12);
        assert!((out.particles[1].weight - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_likelihood_leaves_weights() {
        let ms = models(&[1]);
        let s = ParticleSet::from_priors(&ms, 50, 1).unwrap();
        let out = s.reweight(|_| 0.3).unwrap();
        for (a, b) in s.particles.iter().zip(&out.particles) {
            assert!((a.weight - b.weight).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_likelihood_everywhere_is_degenerate() {
        let ms = models(&[1]);
        let s = ParticleSet::from_priors(&ms, 10, 1).unwrap();
        assert!(matches!(s.reweight(|_| 0.0), Err(Error::DegenerateUpdate)));
        assert!(matches!(
            s.reweight_log(|_| f64::NEG_INFINITY),
            Err(Error::DegenerateUpdate)
        ));
    }

    #[test]
    fn resampling_without_jitter_keeps_support_and_equalizes() {
        let ms = models(&[1, 1]);
        let s = ParticleSet::from_priors(&ms, 200, 9).unwrap();
        let s = s.reweight(|q| q.theta[0]).unwrap();
        let out = s.resample_with_jitter(&ms, 0.0, 4);
        assert_eq!(out.len(), 200);
        assert!((out.effective_sample_size() - 200.0).abs() < 1e-6);
        for q in &out.particles {
            assert!(s.particles.iter().any(|o| o.model == q.model && o.theta == q.theta));
        }
    }

    #[test]
    fn single_heavy_particle_takes_over() {
        let ms = models(&[1, 1]);
        let mut parts = vec![p(1, &[0.4], 1.0)];
        parts.extend((0..9).map(|i| p(0, &[i as f64 / 10.0], 0.0)));
        let out = set(&ms, parts).resample_with_jitter(&ms, 0.01, 2);
        assert!(out.particles.iter().all(|q| q.model == 1));
    }

    #[test]
    fn models_below_one_over_n_die() {
        let ms = models(&[1, 1]);
        let mut parts: Vec<Particle> = (0..10).map(|i| p(0, &[i as f64 / 10.0], 1.0)).collect();
        parts[9] = p(1, &[0.5], 0.05);
        let s = set(&ms, parts).normalized();
        assert!(s.model_marginals()[1] < 0.1);
        let out = s.resample_with_jitter(&ms, 0.01, 1);
        assert_eq!(out.model_marginals()[1], 0.0);
        assert_eq!(out.live_models(), vec![0]);
    }

    #[test]
    fn jitter_stays_in_box() {
        let ms = models(&[2]);
        let s = set(&ms, vec![p(0, &[0.0, 1.0], 1.0)]);
        let out = s.resample_with_jitter(&ms, 0.5, 3);
        assert!(ms[0].contains(&out.particles[0].theta));
    }

    #[test]
    fn map_picks_heaviest_model_then_mode() {
        let ms = models(&[1, 1]);
        let s = set(
            &ms,
            vec![
                p(0, &[0.2], 0.35),
                p(0, &[0.9], 0.35),
                p(1, &[0.5], 0.3),
            ],
        );
        let est = s.map_estimate(&ms, Bandwidth::Silverman);
        assert_eq!(est.model.index, 0);
        // Equal density at both particles: lowest index wins.
        assert_eq!(est.theta.0, vec![0.2]);
    }

    #[test]
    fn map_returns_concentrated_particle() {
        let ms = models(&[2]);
        let s = set(
            &ms,
            vec![p(0, &[0.1, 0.1], 0.0), p(0, &[0.7, 0.3], 1.0), p(0, &[0.2, 0.9], 0.0)],
        );
        assert_eq!(s.map_estimate(&ms, Bandwidth::Fixed(0.1)).theta.0, vec![0.7, 0.3]);
    }

    #[test]
    fn bic_prefers_fewer_parameters_at_equal_mass() {
        let ms = models(&[1, 2]);
        let s = set(&ms, vec![p(0, &[0.5], 0.5), p(1, &[0.5, 0.5], 0.5)]);
        assert_eq!(s.bic_estimate(&ms, 20, Bandwidth::Silverman).model.index, 0);
        let s = set(&ms, vec![p(0, &[0.5], 0.0), p(1, &[0.5, 0.5], 1.0)]);
        for t in [1, 20, 1000] {
            assert_eq!(s.bic_estimate(&ms, t, Bandwidth::Silverman).model.index, 1);
        }
    }

    #[test]
    fn json_round_trip() {
        let ms = models(&[1, 2]);
        let s = ParticleSet::from_priors(&ms, 5, 11).unwrap();
        let text = serde_json::to_string(&s).unwrap();
        let back: ParticleSet = serde_json::from_str(&text).unwrap();
        assert_eq!(s, back);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(v["particles"][0]["theta"].is_array());
        assert!(v["seed"].is_number() && v["trial_index"].is_number());
    }
}
