//! One adaptive-design step: propose a design, then update the belief with
//! the observed response.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::belief::{ParticleSet, DEFAULT_JITTER};
use crate::design::{select_design_ado, select_design_bosmos, select_design_random, DesignSelection, UtilityEvalConfig};
use crate::error::{Error, Result};
use crate::lfi::{lfi_step, LfiConfig, LfiDiagnostics};
use crate::model::Response;
use crate::rng::{derive_seed, streams};
use crate::space::Design;
use crate::tasks::Task;

const LFI_STREAM: u64 = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Simulator-based utility with likelihood-free updates.
    Bosmos,
    /// Mutual-information design with exact-likelihood updates.
    Ado,
    /// Random design with exact-likelihood updates.
    Lbird,
    /// Random design, no updates.
    Prior,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Bosmos, Method::Ado, Method::Lbird, Method::Prior];

    pub fn name(self) -> &'static str {
        match self {
            Method::Bosmos => "bosmos",
            Method::Ado => "ado",
            Method::Lbird => "lbird",
            Method::Prior => "prior",
        }
    }

    /// Rejects pairings the method cannot run.
    pub fn check_task(self, task: &Task) -> Result<()> {
        match self {
            Method::Ado if !task.has_finite_responses() => Err(Error::Config(format!(
                "method `ado` needs exact likelihoods over a finite response set, which task `{}` lacks",
                task.name
            ))),
            Method::Lbird if !task.has_likelihoods() => Err(Error::Config(format!(
                "method `lbird` needs exact likelihoods, which task `{}` lacks",
                task.name
            ))),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`; expected bosmos, ado, lbird or prior")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub n_particles: usize,
    pub jitter: f64,
    pub utility: UtilityEvalConfig,
    pub lfi: LfiConfig,
    /// Parameter draws per model for the ADO utility.
    pub ado_theta_draws: usize,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            n_particles: 5000,
            jitter: DEFAULT_JITTER,
            utility: UtilityEvalConfig::default(),
            lfi: LfiConfig::default(),
            ado_theta_draws: 500,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_particles == 0 {
            return Err(Error::Config("engine.n_particles: must be positive".into()));
        }
        if !(self.jitter >= 0.0) {
            return Err(Error::Config("engine.jitter: must be nonnegative".into()));
        }
        if self.ado_theta_draws == 0 {
            return Err(Error::Config("engine.ado_theta_draws: must be positive".into()));
        }
        self.utility.validate()?;
        self.lfi.validate()
    }
}

/// Result of one belief update.
#[derive(Clone, Debug)]
pub struct TrialUpdate {
    pub belief: ParticleSet,
    pub diagnostics: Option<LfiDiagnostics>,
    /// The update was degenerate and some previous weights were kept.
    pub degenerate: bool,
}

#[derive(Clone, Debug)]
pub struct Engine {
    pub task: Task,
    pub method: Method,
    pub config: EngineConfig,
}

impl Engine {
    pub fn new(task: Task, method: Method, config: EngineConfig) -> Result<Self> {
        method.check_task(&task)?;
        config.validate()?;
        Ok(Self { task, method, config })
    }

    pub fn initial_belief(&self, seed: u64) -> Result<ParticleSet> {
        ParticleSet::from_priors(&self.task.models, self.config.n_particles, seed)
    }

    /// Selects the design for the belief's next trial. Never changes the belief.
    pub fn propose(&self, belief: &ParticleSet) -> Result<DesignSelection> {
        let seed = derive_seed(belief.seed, streams::DESIGN, belief.trial_index);
        let task = &self.task;
        match self.method {
            Method::Bosmos => select_design_bosmos(belief, &task.models, &task.design_space, &self.config.utility, seed),
            Method::Ado => select_design_ado(
                belief,
                &task.models,
                &task.design_space,
                &self.config.utility,
                self.config.ado_theta_draws,
                seed,
            ),
            Method::Lbird | Method::Prior => {
                let design = select_design_random(&task.design_space, seed);
                Ok(DesignSelection {
                    candidates: Vec::new(),
                    chosen: design,
                    n_sims: 0,
                })
            }
        }
    }

    /// Updates the belief with `response` observed at `design`, then
    /// resamples. The returned belief carries the next trial index.
    pub fn update(&self, belief: &ParticleSet, design: &Design, response: &Response) -> Result<TrialUpdate> {
        self.task.design_space.validate(design)?;
        self.task.validate_response(design, response)?;
        let next = belief.trial_index + 1;
        let models = &self.task.models;
        let (reweighted, diagnostics, degenerate) = match self.method {
            Method::Prior => {
                return Ok(TrialUpdate {
                    belief: belief.clone().with_trial_index(next),
                    diagnostics: None,
                    degenerate: false,
                })
            }
            Method::Ado | Method::Lbird => {
                match belief.reweight_log(|p| {
                    models[p.model]
                        .log_likelihood(response, &p.theta, &design.0)
                        .unwrap_or(f64::NEG_INFINITY)
                }) {
                    Ok(b) => (b, None, false),
                    Err(Error::DegenerateUpdate) => (belief.clone(), None, true),
                    Err(e) => return Err(e),
                }
            }
            Method::Bosmos => {
                let seed = derive_seed(belief.seed, LFI_STREAM, belief.trial_index);
                match lfi_step(belief, models, response, &design.0, &self.task.discrepancy, &self.config.lfi, seed) {
                    Ok((outcome, diag)) => {
                        let degenerate = !outcome.degenerate_models.is_empty();
                        (outcome.belief, Some(diag), degenerate)
                    }
                    Err(Error::DegenerateUpdate) => (belief.clone(), None, true),
                    Err(e) => return Err(e),
                }
            }
        };
        let resampled = reweighted
            .resample_with_jitter(models, self.config.jitter, belief.seed)
            .with_trial_index(next);
        Ok(TrialUpdate {
            belief: resampled,
            diagnostics,
            degenerate,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("minebed".parse::<Method>().is_err());
    }

    #[test]
    fn pairing_constraints() {
        let sig = Task::by_name("sigdet").unwrap();
        assert!(Method::Ado.check_task(&sig).is_err());
        assert!(Method::Lbird.check_task(&sig).is_err());
        assert!(Method::Bosmos.check_task(&sig).is_ok());
        let demo = Task::by_name("demo").unwrap();
        assert!(Method::Ado.check_task(&demo).is_err());
        assert!(Method::Lbird.check_task(&demo).is_ok());
        let memory = Task::by_name("memory").unwrap();
        assert!(Method::Ado.check_task(&memory).is_ok());
    }

    #[test]
    fn prior_method_never_moves_belief() {
        let engine = Engine::new(Task::by_name("memory").unwrap(), Method::Prior, EngineConfig::default()).unwrap();
        let b0 = engine.initial_belief(3).unwrap();
        let d = engine.propose(&b0).unwrap().chosen;
        let up = engine.update(&b0, &d, &Response::scalar(1.0)).unwrap();
        assert_eq!(up.belief.particles, b0.particles);
        assert_eq!(up.belief.trial_index, 1);
    }

    #[test]
    fn exact_update_moves_toward_truth_in_demo() {
        let engine = Engine::new(Task::by_name("demo").unwrap(), Method::Lbird, EngineConfig::default()).unwrap();
        let b0 = engine.initial_belief(1).unwrap();
        let up = engine.update(&b0, &Design(vec![0.5]), &Response::scalar(2.0)).unwrap();
        assert!(up.belief.model_marginals()[0] > 0.99);
    }

    #[test]
    fn invalid_response_is_rejected_without_change() {
        let engine = Engine::new(Task::by_name("memory").unwrap(), Method::Lbird, EngineConfig::default()).unwrap();
        let b0 = engine.initial_belief(1).unwrap();
        assert!(matches!(
            engine.update(&b0, &Design(vec![3.0]), &Response::scalar(0.5)),
            Err(Error::InvalidResponse(_))
        ));
    }
}
