//! Live experiment sessions as an event-sourced state machine.
//!
//! Every state change is an event; a session rebuilt from its events is
//! identical to the original. Design search is split into a pure
//! [`Session::compute_proposal`] and [`Session::accept_proposal`] so callers
//! can run the search without holding a lock.

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::belief::{Bandwidth, Estimate, ParamSummary, ParticleSet};
use crate::design::DesignSelection;
use crate::engine::{Engine, EngineConfig, Method};
use crate::error::{Error, Result};
use crate::model::Response;
use crate::space::Design;
use crate::tasks::Task;

pub const SCHEMA_VERSION: u32 = 1;
/// Scatter points kept per model in a snapshot.
pub const MAX_SCATTER: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Proposing,
    AwaitingResponse,
    Finished,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub task: String,
    pub method: Method,
    pub budget: usize,
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineConfig,
}

impl SessionConfig {
    pub fn new(task: &str, method: Method, budget: usize, seed: u64) -> Self {
        Self {
            task: task.into(),
            method,
            budget,
            seed,
            engine: EngineConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum SessionEvent {
    Created {
        v: u32,
        session_id: String,
        config: SessionConfig,
        at_ms: u64,
    },
    DesignProposed {
        v: u32,
        trial_index: u64,
        design: Design,
        n_sims: usize,
        at_ms: u64,
    },
    ResponseSubmitted {
        v: u32,
        trial_index: u64,
        response: Response,
        at_ms: u64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub design: Design,
    pub response: Response,
    /// Time from proposal to response.
    pub wall_time_ms: u64,
    pub model_marginals: Vec<f64>,
    pub degenerate: bool,
}

/// A design search result not yet committed to the session.
#[derive(Clone, Debug)]
pub struct Proposal {
    pub trial_index: u64,
    pub selection: DesignSelection,
}

#[derive(Clone, Debug)]
pub struct Session {
    pub id: String,
    pub config: SessionConfig,
    engine: Engine,
    belief: ParticleSet,
    phase: Phase,
    pending: Option<(Design, u64)>,
    history: Vec<TrialRecord>,
    events: Vec<SessionEvent>,
    created_ms: u64,
    updated_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

impl Session {
    pub fn create(id: impl Into<String>, config: SessionConfig) -> Result<Session> {
        Self::create_at(id, config, now_ms())
    }

    fn create_at(id: impl Into<String>, config: SessionConfig, at_ms: u64) -> Result<Session> {
        if config.budget == 0 {
            return Err(Error::Config("budget: must be at least 1".into()));
        }
        let task = Task::by_name(&config.task)?;
        let engine = Engine::new(task, config.method, config.engine.clone())?;
        let belief = engine.initial_belief(config.seed)?;
        let id = id.into();
        let created = SessionEvent::Created {
            v: SCHEMA_VERSION,
            session_id: id.clone(),
            config: config.clone(),
            at_ms,
        };
        Ok(Session {
            id,
            config,
            engine,
            belief,
            phase: Phase::Proposing,
            pending: None,
            history: Vec::new(),
            events: vec![created],
            created_ms: at_ms,
            updated_ms: at_ms,
        })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn belief(&self) -> &ParticleSet {
        &self.belief
    }

    pub fn task(&self) -> &Task {
        &self.engine.task
    }

    pub fn history(&self) -> &[TrialRecord] {
        &self.history
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.events
    }

    pub fn budget_remaining(&self) -> usize {
        self.config.budget - self.history.len()
    }

    pub fn pending_design(&self) -> Option<&Design> {
        self.pending.as_ref().map(|(d, _)| d)
    }

    /// Runs the design search for the next trial. Does not change the session.
    pub fn compute_proposal(&self) -> Result<Proposal> {
        if self.phase == Phase::Finished {
            return Err(Error::Phase("session is finished".into()));
        }
        Ok(Proposal {
            trial_index: self.belief.trial_index,
            selection: self.engine.propose(&self.belief)?,
        })
    }

    /// Commits a proposal. Returns the pending design, which is the existing
    /// one when a design is already awaiting its response.
    pub fn accept_proposal(&mut self, proposal: Proposal) -> Result<Design> {
        match self.phase {
            Phase::Finished => Err(Error::Phase("session is finished".into())),
            Phase::AwaitingResponse => Ok(self.pending_design().cloned().expect("pending design")),
            Phase::Proposing => {
                if proposal.trial_index != self.belief.trial_index {
                    return Err(Error::Phase(format!(
                        "stale proposal for trial {}, session is at trial {}",
                        proposal.trial_index, self.belief.trial_index
                    )));
                }
                self.apply(SessionEvent::DesignProposed {
                    v: SCHEMA_VERSION,
                    trial_index: proposal.trial_index,
                    design: proposal.selection.chosen,
                    n_sims: proposal.selection.n_sims,
                    at_ms: now_ms(),
                })?;
                Ok(self.pending_design().cloned().expect("pending design"))
            }
        }
    }

    /// Proposes (or returns the already pending) design.
    pub fn next_design(&mut self) -> Result<Design> {
        if let Some(d) = self.pending_design() {
            return Ok(d.clone());
        }
        let proposal = self.compute_proposal()?;
        self.accept_proposal(proposal)
    }

    /// Records the response to the pending design. `trial_index`, when
    /// given, must name the pending trial, which guards against duplicates.
    pub fn submit_response(&mut self, response: Response, trial_index: Option<u64>) -> Result<PosteriorSnapshot> {
        let Some((design, _)) = self.pending.clone() else {
            return Err(Error::Phase(match self.phase {
                Phase::Finished => "session is finished".into(),
                _ => "no design is awaiting a response".into(),
            }));
        };
        let pending_trial = self.belief.trial_index;
        if let Some(t) = trial_index {
            if t != pending_trial {
                return Err(Error::Phase(format!("response for trial {t}, but trial {pending_trial} is pending")));
            }
        }
        self.task().validate_response(&design, &response)?;
        self.apply(SessionEvent::ResponseSubmitted {
            v: SCHEMA_VERSION,
            trial_index: pending_trial,
            response,
            at_ms: now_ms(),
        })?;
        Ok(self.snapshot())
    }

    fn apply(&mut self, event: SessionEvent) -> Result<()> {
        match &event {
            SessionEvent::Created { .. } => return Err(Error::Phase("session already created".into())),
            SessionEvent::DesignProposed {
                trial_index,
                design,
                at_ms,
                ..
            } => {
                if self.phase != Phase::Proposing || *trial_index != self.belief.trial_index {
                    return Err(Error::Phase(format!("unexpected proposal for trial {trial_index}")));
                }
                self.task().design_space.validate(design)?;
                self.pending = Some((design.clone(), *at_ms));
                self.phase = Phase::AwaitingResponse;
                self.updated_ms = *at_ms;
            }
            SessionEvent::ResponseSubmitted {
                trial_index,
                response,
                at_ms,
                ..
            } => {
                let Some((design, proposed_ms)) = self.pending.clone() else {
                    return Err(Error::Phase(format!("unexpected response for trial {trial_index}")));
                };
                if *trial_index != self.belief.trial_index {
                    return Err(Error::Phase(format!("unexpected response for trial {trial_index}")));
                }
                let update = self.engine.update(&self.belief, &design, response)?;
                self.belief = update.belief;
                self.history.push(TrialRecord {
                    trial_index: *trial_index,
                    design,
                    response: response.clone(),
                    wall_time_ms: at_ms.saturating_sub(proposed_ms),
                    model_marginals: self.belief.model_marginals(),
                    degenerate: update.degenerate,
                });
                self.pending = None;
                self.phase = if self.history.len() >= self.config.budget {
                    Phase::Finished
                } else {
                    Phase::Proposing
                };
                self.updated_ms = *at_ms;
            }
        }
        self.events.push(event);
        Ok(())
    }

    /// Rebuilds a session from its event log.
    pub fn replay(events: impl IntoIterator<Item = SessionEvent>) -> Result<Session> {
        let mut events = events.into_iter();
        let mut session = match events.next() {
            Some(SessionEvent::Created {
                v,
                session_id,
                config,
                at_ms,
            }) => {
                check_version(v)?;
                Session::create_at(session_id, config, at_ms)?
            }
            _ => return Err(Error::Phase("event log must start with `created`".into())),
        };
        for e in events {
            let v = match &e {
                SessionEvent::Created { v, .. }
                | SessionEvent::DesignProposed { v, .. }
                | SessionEvent::ResponseSubmitted { v, .. } => *v,
            };
            check_version(v)?;
            session.apply(e)?;
        }
        Ok(session)
    }

    pub fn read_log(path: &Path) -> Result<Session> {
        Self::replay(read_events(path)?)
    }

    /// Writes the whole event log as JSON lines.
    pub fn write_log(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        for e in &self.events {
            writeln!(f, "{}", serde_json::to_string(e)?)?;
        }
        f.flush()?;
        Ok(())
    }

    pub fn state(&self) -> SessionState {
        SessionState {
            v: SCHEMA_VERSION,
            session_id: self.id.clone(),
            task: self.config.task.clone(),
            method: self.config.method,
            seed: self.config.seed,
            budget: self.config.budget,
            budget_remaining: self.budget_remaining(),
            phase: self.phase,
            trial_index: self.belief.trial_index,
            pending_design: self.pending_design().cloned(),
            history: self.history.clone(),
            created_ms: self.created_ms,
            updated_ms: self.updated_ms,
        }
    }

    pub fn snapshot(&self) -> PosteriorSnapshot {
        let task = self.task();
        let marginals = self.belief.model_marginals();
        let models = task
            .models
            .iter()
            .enumerate()
            .map(|(i, spec)| ModelPosterior {
                name: spec.name().to_string(),
                probability: marginals[i],
                params: spec.params.iter().map(|p| p.name.clone()).collect(),
                summary: self.belief.parameter_summary(i).unwrap_or_default(),
                scatter: self.scatter(i),
            })
            .collect();
        let n = self.history.len();
        PosteriorSnapshot {
            v: SCHEMA_VERSION,
            session_id: self.id.clone(),
            trial_index: self.belief.trial_index,
            phase: self.phase,
            models,
            map: self.belief.map_estimate(&task.models, Bandwidth::Silverman),
            bic: (n > 0).then(|| self.belief.bic_estimate(&task.models, n, Bandwidth::Silverman)),
            history: self.history.clone(),
        }
    }

    /// Evenly strided particles of one model, first two parameters.
    fn scatter(&self, model: usize) -> Vec<Vec<f64>> {
        let (idx, _) = self.belief.conditional(model);
        let stride = idx.len().div_ceil(MAX_SCATTER).max(1);
        idx.iter()
            .step_by(stride)
            .map(|&i| self.belief.particles[i].theta.iter().take(2).copied().collect())
            .collect()
    }
}

fn check_version(v: u32) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Config(format!("unsupported event schema version {v}")))
    }
}

pub fn read_events(path: &Path) -> Result<Vec<SessionEvent>> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut out = Vec::new();
    for line in f.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Appends one event to a JSON-lines log.
pub fn append_event(path: &Path, event: &SessionEvent) -> Result<()> {
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", serde_json::to_string(event)?)?;
    f.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionState {
    pub v: u32,
    pub session_id: String,
    pub task: String,
    pub method: Method,
    pub seed: u64,
    pub budget: usize,
    pub budget_remaining: usize,
    pub phase: Phase,
    pub trial_index: u64,
    pub pending_design: Option<Design>,
    pub history: Vec<TrialRecord>,
    pub created_ms: u64,
    pub updated_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelPosterior {
    pub name: String,
    pub probability: f64,
    pub params: Vec<String>,
    /// Empty for a dead model.
    pub summary: Vec<ParamSummary>,
    /// At most [`MAX_SCATTER`] points, first two parameters each.
    pub scatter: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSnapshot {
    pub v: u32,
    pub session_id: String,
    pub trial_index: u64,
    pub phase: Phase,
    pub models: Vec<ModelPosterior>,
    pub map: Estimate,
    pub bic: Option<Estimate>,
    pub history: Vec<TrialRecord>,
}

/// Payload for a proposed design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignPayload {
    pub v: u32,
    pub session_id: String,
    pub trial_index: u64,
    pub design: Design,
    pub render_hint: Value,
}

impl Session {
    pub fn design_payload(&self) -> Option<DesignPayload> {
        let (design, _) = self.pending.as_ref()?;
        Some(DesignPayload {
            v: SCHEMA_VERSION,
            session_id: self.id.clone(),
            trial_index: self.belief.trial_index,
            design: design.clone(),
            render_hint: self.task().render_hint(design),
        })
    }
}
