//! Design selection.
//!
//! The simulator-based utility of a design is
//! `E[H(x | d, m, theta)] - H(x | d)`: the mean entropy of responses from
//! individual `(model, theta)` draws minus the entropy of all those responses
//! pooled. It is minimized by Bayesian optimization over the design space.
//! ADO maximizes the mutual information between model and response instead,
//! and needs exact likelihoods over a finite response set.

use serde::{Deserialize, Serialize};

use crate::belief::ParticleSet;
use crate::entropy::{auto_bandwidth, kernel_entropy_diag, BANDWIDTH_FLOOR};
use crate::error::{Error, Result};
use crate::gp::{propose_batch_with, AcquisitionSpec, GpModel, Kernel, MultistartConfig, DEFAULT_LENGTHSCALE};
use crate::model::ModelSpec;
use crate::rng::{child_rng, derive_seed, streams};
use crate::space::{Design, DesignSpace};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyBandwidth {
    /// Silverman's rule per dimension on the pooled responses.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UtilityEvalConfig {
    pub n_model_draws: usize,
    pub n_sims_per_draw: usize,
    pub entropy_bandwidth: EntropyBandwidth,
    pub bo_init: usize,
    pub bo_steps: usize,
    pub lengthscale: f64,
    /// GP noise variance on standardized utilities.
    pub noise_variance: f64,
    pub nei_samples: usize,
}

impl Default for UtilityEvalConfig {
    fn default() -> Self {
        Self {
            n_model_draws: 10,
            n_sims_per_draw: 10,
            entropy_bandwidth: EntropyBandwidth::Auto,
            bo_init: 10,
            bo_steps: 5,
            lengthscale: DEFAULT_LENGTHSCALE,
            noise_variance: 0.05,
            nei_samples: 64,
        }
    }
}

impl UtilityEvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_model_draws == 0 || self.n_sims_per_draw < 2 || self.bo_init == 0 {
            return Err(Error::Config(
                "utility: n_model_draws and bo_init must be >= 1, n_sims_per_draw >= 2".into(),
            ));
        }
        if let EntropyBandwidth::Fixed(h) = self.entropy_bandwidth {
            if !(h > 0.0) {
                return Err(Error::Config("utility: fixed entropy bandwidth must be positive".into()));
            }
        }
        if !(self.noise_variance > 0.0 && self.lengthscale > 0.0) {
            return Err(Error::Config("utility: noise_variance and lengthscale must be positive".into()));
        }
        Ok(())
    }

    /// Simulations spent by one design search.
    pub fn simulation_budget(&self) -> usize {
        (self.bo_init + self.bo_steps) * self.n_model_draws * self.n_sims_per_draw
    }
}

/// One evaluated candidate design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub design: Design,
    pub utility: f64,
}

/// The design-search trace: every evaluated candidate and the chosen one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignSelection {
    pub candidates: Vec<Candidate>,
    pub chosen: Design,
    pub n_sims: usize,
}

/// Utility components at one design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtilityValue {
    pub value: f64,
    pub conditional_entropy: f64,
    pub pooled_entropy: f64,
    pub n_sims: usize,
}

/// The `(model, theta)` draws and simulation seeds behind one utility
/// evaluation. Reusing a plan across designs gives common random numbers.
#[derive(Clone, Debug)]
pub struct UtilityPlan {
    draws: Vec<(usize, Vec<f64>)>,
    seed: u64,
}

impl UtilityPlan {
    pub fn new(belief: &ParticleSet, cfg: &UtilityEvalConfig, seed: u64) -> Self {
        let sampler = belief.joint_sampler();
        let mut rng = child_rng(seed, streams::UTILITY, 0);
        let draws = (0..cfg.n_model_draws)
            .map(|_| {
                let p = sampler.sample(&mut rng);
                (p.model, p.theta.clone())
            })
            .collect();
        Self { draws, seed }
    }
}

/// Evaluates the utility at `design` (lower is better).
pub fn bosmos_utility(
    design: &Design,
    belief: &ParticleSet,
    models: &[ModelSpec],
    cfg: &UtilityEvalConfig,
    seed: u64,
) -> Result<UtilityValue> {
    utility_with_plan(design, &UtilityPlan::new(belief, cfg, seed), models, cfg)
}

pub fn utility_with_plan(
    design: &Design,
    plan: &UtilityPlan,
    models: &[ModelSpec],
    cfg: &UtilityEvalConfig,
) -> Result<UtilityValue> {
    let mut groups: Vec<Vec<Vec<f64>>> = Vec::with_capacity(plan.draws.len());
    for (i, (m, theta)) in plan.draws.iter().enumerate() {
        let mut rng = child_rng(plan.seed, streams::UTILITY, 1 + i as u64);
        let mut group = Vec::with_capacity(cfg.n_sims_per_draw);
        for _ in 0..cfg.n_sims_per_draw {
            let x = models[*m].simulate(theta, &design.0, &mut rng);
            if x.0.iter().any(|v| !v.is_finite()) {
                return Err(Error::Simulator {
                    model: models[*m].name().to_string(),
                    theta: theta.clone(),
                    message: format!("non-finite response {:?}", x.0),
                });
            }
            group.push(x.0);
        }
        groups.push(group);
    }
    let pooled: Vec<Vec<f64>> = groups.iter().flatten().cloned().collect();
    let h = match cfg.entropy_bandwidth {
        EntropyBandwidth::Auto => auto_bandwidth(&pooled),
        EntropyBandwidth::Fixed(h) => vec![h.max(BANDWIDTH_FLOOR); pooled[0].len()],
    };
    let conditional = groups
        .iter()
        .map(|g| kernel_entropy_diag(g, &h).value)
        .sum::<f64>()
        / groups.len() as f64;
    let pooled_entropy = kernel_entropy_diag(&pooled, &h).value;
    Ok(UtilityValue {
        value: conditional - pooled_entropy,
        conditional_entropy: conditional,
        pooled_entropy,
        n_sims: pooled.len(),
    })
}

/// Minimizes the simulator-based utility with Bayesian optimization.
pub fn select_design_bosmos(
    belief: &ParticleSet,
    models: &[ModelSpec],
    space: &DesignSpace,
    cfg: &UtilityEvalConfig,
    seed: u64,
) -> Result<DesignSelection> {
    let plan = UtilityPlan::new(belief, cfg, seed);
    let mut n_sims = 0;
    let mut selection = bayes_opt(space, cfg, seed, |d| {
        let u = utility_with_plan(d, &plan, models, cfg)?;
        n_sims += u.n_sims;
        Ok(u.value)
    })?;
    selection.n_sims = n_sims;
    Ok(selection)
}

/// Mutual information between model identity and the response at `design`,
/// with response probabilities averaged over `n_theta` draws per model.
pub fn ado_utility(
    design: &Design,
    models: &[ModelSpec],
    belief: &ParticleSet,
    n_theta: usize,
    seed: u64,
) -> Result<f64> {
    let draws = ado_draws(models, belief, n_theta, seed)?;
    Ok(ado_with_draws(design, models, &draws))
}

type AdoDraws = Vec<(usize, f64, Vec<Vec<f64>>, Vec<crate::model::Response>)>;

fn ado_draws(models: &[ModelSpec], belief: &ParticleSet, n_theta: usize, seed: u64) -> Result<AdoDraws> {
    let marginals = belief.model_marginals();
    let mut out = Vec::new();
    for m in belief.live_models() {
        let spec = &models[m];
        let support = spec
            .response_support()
            .filter(|_| spec.has_likelihood())
            .ok_or_else(|| Error::UnsupportedModel(spec.name().to_string()))?;
        let sampler = belief.conditional_sampler(m).expect("live model has particles");
        let mut rng = child_rng(seed, streams::UTILITY, 1000 + m as u64);
        let thetas = (0..n_theta.max(1))
            .map(|_| sampler.sample(&mut rng).theta.clone())
            .collect();
        out.push((m, marginals[m], thetas, support));
    }
    Ok(out)
}

fn ado_with_draws(design: &Design, models: &[ModelSpec], draws: &AdoDraws) -> f64 {
    // p(x | m, d) per model over its support.
    let probs: Vec<Vec<f64>> = draws
        .iter()
        .map(|(m, _, thetas, support)| {
            support
                .iter()
                .map(|x| {
                    thetas
                        .iter()
                        .map(|t| models[*m].exact_likelihood(x, t, &design.0).unwrap_or(0.0))
                        .sum::<f64>()
                        / thetas.len() as f64
                })
                .collect()
        })
        .collect();
    let n_resp = probs.first().map_or(0, Vec::len);
    let mixture: Vec<f64> = (0..n_resp)
        .map(|j| draws.iter().zip(&probs).map(|((_, pm, _, _), p)| pm * p[j]).sum())
        .collect();
    let mut u = 0.0;
    for ((_, pm, _, _), p) in draws.iter().zip(&probs) {
        for j in 0..n_resp {
            if p[j] > 0.0 && mixture[j] > 0.0 {
                u += pm * p[j] * (p[j] / mixture[j]).ln();
            }
        }
    }
    u.max(0.0)
}

/// Maximizes the ADO utility with the same Bayesian-optimization loop.
pub fn select_design_ado(
    belief: &ParticleSet,
    models: &[ModelSpec],
    space: &DesignSpace,
    cfg: &UtilityEvalConfig,
    n_theta: usize,
    seed: u64,
) -> Result<DesignSelection> {
    let draws = ado_draws(models, belief, n_theta, seed)?;
    let mut selection = bayes_opt(space, cfg, seed, |d| Ok(-ado_with_draws(d, models, &draws)))?;
    for c in &mut selection.candidates {
        c.utility = -c.utility;
    }
    Ok(selection)
}

/// One draw from the design proposal.
pub fn select_design_random(space: &DesignSpace, seed: u64) -> Design {
    space.sample(&mut child_rng(seed, streams::DESIGN, 0))
}

/// Random initial designs, then single-point noisy-EI steps on a Matern-5/2
/// GP over the unit cube. Returns the evaluated design with the lowest value.
fn bayes_opt(
    space: &DesignSpace,
    cfg: &UtilityEvalConfig,
    seed: u64,
    mut objective: impl FnMut(&Design) -> Result<f64>,
) -> Result<DesignSelection> {
    let mut rng = child_rng(seed, streams::DESIGN, 1);
    let mut candidates: Vec<Candidate> = Vec::with_capacity(cfg.bo_init + cfg.bo_steps);
    for _ in 0..cfg.bo_init.max(1) {
        let design = space.sample(&mut rng);
        let utility = objective(&design)?;
        candidates.push(Candidate { design, utility });
    }
    let kernel = Kernel::matern52(space.dim(), cfg.lengthscale);
    let acq = AcquisitionSpec::noisy_ei(cfg.nei_samples, 1);
    let search = MultistartConfig::default();
    for step in 0..cfg.bo_steps {
        let inputs: Vec<Vec<f64>> = candidates.iter().map(|c| space.to_unit(&c.design)).collect();
        let ys: Vec<f64> = candidates.iter().map(|c| c.utility).collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        let sd = (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64).sqrt();
        let scale = if sd > 1e-12 { sd } else { 1.0 };
        let targets = ys.iter().map(|y| (y - mean) / scale).collect();
        let gp = GpModel::fit(inputs, targets, kernel.clone(), cfg.noise_variance)?;
        let u = propose_batch_with(&gp, &acq, derive_seed(seed, streams::DESIGN, 2 + step as u64), &search)
            .pop()
            .expect("batch of one");
        let design = space.from_unit(&u);
        let utility = objective(&design)?;
        candidates.push(Candidate { design, utility });
    }
    let chosen = candidates
        .iter()
        .min_by(|a, b| a.utility.total_cmp(&b.utility))
        .expect("at least one candidate")
        .design
        .clone();
    Ok(DesignSelection {
        candidates,
        chosen,
        n_sims: 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::Particle;
    use crate::model::{Response, Simulator};
    use crate::rng::SimRng;
    use crate::space::ParamSpec;
    use crate::tasks::Task;

    struct Constant;
    impl Simulator for Constant {
        fn simulate(&self, _: &[f64], _: &[f64], _: &mut SimRng) -> Response {
            Response::scalar(1.0)
        }
    }

    #[test]
    fn identical_deterministic_responses_give_zero_utility() {
        let ms = vec![
            ModelSpec::new("a", 0, vec![ParamSpec::uniform("t", 0.0, 1.0)], Constant),
            ModelSpec::new("b", 1, vec![ParamSpec::uniform("t", 0.0, 1.0)], Constant),
        ];
        let belief = ParticleSet::from_priors(&ms, 100, 1).unwrap();
        let u = bosmos_utility(&Design(vec![0.0]), &belief, &ms, &UtilityEvalConfig::default(), 2).unwrap();
        assert!(u.value.abs() < 1e-9, "{}", u.value);
    }

    #[test]
    fn demo_prefers_low_noise() {
        let task = Task::by_name("demo").unwrap();
        let belief = ParticleSet::from_priors(&task.models, 5000, 3).unwrap();
        let cfg = UtilityEvalConfig::default();
        let mut wins = 0;
        for seed in 0..100 {
            let lo = bosmos_utility(&Design(vec![0.001]), &belief, &task.models, &cfg, seed).unwrap();
            let hi = bosmos_utility(&Design(vec![5.0]), &belief, &task.models, &cfg, seed).unwrap();
            wins += (lo.value < hi.value) as usize;
        }
        assert!(wins >= 95, "{wins}");
    }

    #[test]
    fn demo_search_picks_small_noise_and_counts_sims() {
        let task = Task::by_name("demo").unwrap();
        let belief = ParticleSet::from_priors(&task.models, 5000, 4).unwrap();
        let cfg = UtilityEvalConfig::default();
        let mut small = 0;
        for seed in 0..100 {
            let s = select_design_bosmos(&belief, &task.models, &task.design_space, &cfg, seed).unwrap();
            assert_eq!(s.n_sims, 1500);
            assert_eq!(s.candidates.len(), 15);
            assert!(task.design_space.contains(&s.chosen));
            small += (s.chosen.0[0] <= 1.0) as usize;
        }
        assert!(small >= 90, "{small}");
    }

    #[test]
    fn no_bo_steps_returns_best_initial() {
        let task = Task::by_name("demo").unwrap();
        let belief = ParticleSet::from_priors(&task.models, 500, 4).unwrap();
        let cfg = UtilityEvalConfig {
            bo_steps: 0,
            ..UtilityEvalConfig::default()
        };
        let s = select_design_bosmos(&belief, &task.models, &task.design_space, &cfg, 9).unwrap();
        assert_eq!(s.candidates.len(), 10);
        let best = s.candidates.iter().min_by(|a, b| a.utility.total_cmp(&b.utility)).unwrap();
        assert_eq!(best.design, s.chosen);
    }

    fn point_belief(task: &Task, thetas: &[Vec<f64>]) -> ParticleSet {
        ParticleSet {
            models: task.models.iter().map(|m| m.id.clone()).collect(),
            particles: thetas
                .iter()
                .enumerate()
                .map(|(m, t)| Particle {
                    model: m,
                    theta: t.clone(),
                    weight: 1.0 / thetas.len() as f64,
                })
                .collect(),
            seed: 0,
            trial_index: 0,
        }
    }

    #[test]
    fn ado_separates_memory_models_away_from_zero_lag() {
        let task = Task::by_name("memory").unwrap();
        let belief = point_belief(&task, &[vec![1.0, 0.2], vec![1.0, 0.2]]);
        let at0 = ado_utility(&Design(vec![0.0]), &task.models, &belief, 10, 1).unwrap();
        let at50 = ado_utility(&Design(vec![50.0]), &task.models, &belief, 10, 1).unwrap();
        assert!(at0.abs() < 1e-12);
        assert!(at50 > at0);
    }

    #[test]
    fn ado_single_model_is_zero_and_demo_is_unsupported() {
        let task = Task::by_name("memory").unwrap();
        let single = ParticleSet::from_priors(&task.models[..1], 100, 1).unwrap();
        assert_eq!(ado_utility(&Design(vec![20.0]), &task.models, &single, 50, 1).unwrap(), 0.0);
        let demo = Task::by_name("demo").unwrap();
        let belief = ParticleSet::from_priors(&demo.models, 100, 1).unwrap();
        assert!(matches!(
            ado_utility(&Design(vec![1.0]), &demo.models, &belief, 10, 1),
            Err(Error::UnsupportedModel(_))
        ));
    }

    #[test]
    fn random_designs_are_seeded_and_inside() {
        for name in crate::tasks::TASK_NAMES {
            let task = Task::by_name(name).unwrap();
            for seed in 0..50 {
                let d = select_design_random(&task.design_space, seed);
                assert!(task.design_space.contains(&d));
                assert_eq!(d, select_design_random(&task.design_space, seed));
            }
        }
    }
}
