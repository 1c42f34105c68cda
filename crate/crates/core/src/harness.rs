//! Synthetic-participant benchmarks.
//!
//! Each participant has a ground-truth model and parameters drawn from the
//! task priors. The adaptive loop runs against responses simulated from that
//! truth, and metrics are taken at checkpoints under both decision rules.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{Bandwidth, Estimate, ParticleSet};
use crate::engine::{Engine, EngineConfig, Method};
use crate::error::{Error, Result};
use crate::lfi::LfiDiagnostics;
use crate::model::{ModelId, ParameterVector};
use crate::rng::{child_rng, derive_seed, streams};
use crate::space::Design;
use crate::stats;
use crate::tasks::Task;

/// Bound on one parameter of the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamConstraint {
    pub param: String,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

/// How ground truths are drawn.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticipantSpec {
    /// Fix the true model by name; drawn uniformly when absent.
    pub true_model: Option<String>,
    /// Rejection constraints on the true parameters.
    pub constraints: Vec<ParamConstraint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParticipant {
    pub index: usize,
    pub true_model: ModelId,
    pub true_theta: ParameterVector,
    pub rng_seed: u64,
}

impl SyntheticParticipant {
    pub fn estimate(&self) -> Estimate {
        Estimate {
            model: self.true_model.clone(),
            theta: self.true_theta.clone(),
        }
    }
}

/// Draws participant `index`. Depends only on `(seed, index, spec)`, so every
/// method sees the same participants.
pub fn make_participant(task: &Task, spec: &ParticipantSpec, seed: u64, index: usize) -> Result<SyntheticParticipant> {
    let pseed = derive_seed(seed, streams::PARTICIPANT, index as u64);
    let mut rng = child_rng(pseed, 0, 0);
    let fixed = match &spec.true_model {
        Some(name) => Some(
            task.model_index(name)
                .ok_or_else(|| Error::Config(format!("participants.true_model: unknown model `{name}`")))?,
        ),
        None => None,
    };
    for _ in 0..100_000 {
        let m = fixed.unwrap_or_else(|| rng.random_range(0..task.models.len()));
        let model = &task.models[m];
        let theta = model.sample_prior(&mut rng);
        if satisfies(model, &theta, &spec.constraints)? {
            return Ok(SyntheticParticipant {
                index,
                true_model: model.id.clone(),
                true_theta: ParameterVector(theta),
                rng_seed: pseed,
            });
        }
    }
    Err(Error::Config("participants.constraints: no prior draw satisfied the constraints".into()))
}

fn satisfies(model: &crate::model::ModelSpec, theta: &[f64], constraints: &[ParamConstraint]) -> Result<bool> {
    for c in constraints {
        // Constraints on parameters a model lacks do not apply to it.
        let Some(i) = model.params.iter().position(|p| p.name == c.param) else {
            continue;
        };
        if c.min.is_some_and(|lo| theta[i] < lo) || c.max.is_some_and(|hi| theta[i] > hi) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub n_designs: usize,
    pub n_reps: usize,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            n_designs: 100,
            n_reps: 100,
        }
    }
}

/// Designs shared by every behavioural-error evaluation under one seed.
pub fn metric_designs(task: &Task, n: usize, seed: u64) -> Vec<Design> {
    let mut rng = child_rng(seed, streams::METRIC_DESIGNS, 0);
    (0..n).map(|_| task.design_space.sample(&mut rng)).collect()
}

/// Per-design mean responses of `est` over `n_reps` simulations. Replicate
/// `r` at design `j` uses the same random stream for any model, so two
/// identical estimates give identical means.
pub fn mean_responses(task: &Task, est: &Estimate, designs: &[Design], n_reps: usize, seed: u64) -> Vec<Vec<f64>> {
    let model = &task.models[est.model.index];
    designs
        .iter()
        .enumerate()
        .map(|(j, d)| {
            let mut acc = vec![0.0; task.response_scale.len()];
            for r in 0..n_reps {
                let mut rng = child_rng(seed, streams::METRIC_REPS, (j * n_reps + r) as u64);
                let x = model.simulate(&est.theta.0, &d.0, &mut rng);
                for (a, v) in acc.iter_mut().zip(&x.0) {
                    *a += v;
                }
            }
            acc.iter().map(|a| a / n_reps as f64).collect()
        })
        .collect()
}

/// RMS over designs of the scaled gap between mean responses.
pub fn response_gap(task: &Task, a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let total: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| {
            x.iter()
                .zip(y)
                .zip(&task.response_scale)
                .map(|((p, q), s)| ((p - q) / s).powi(2))
                .sum::<f64>()
        })
        .sum();
    (total / a.len().max(1) as f64).sqrt()
}

/// Behavioural error between a true and an estimated `(model, theta)`.
pub fn behavioural_error(task: &Task, truth: &Estimate, est: &Estimate, cfg: &MetricConfig, seed: u64) -> f64 {
    let designs = metric_designs(task, cfg.n_designs, seed);
    let a = mean_responses(task, truth, &designs, cfg.n_reps, seed);
    let b = mean_responses(task, est, &designs, cfg.n_reps, seed);
    response_gap(task, &a, &b)
}

/// Euclidean distance in prior-box coordinates; `None` when the models differ.
pub fn parameter_error(task: &Task, truth: &Estimate, est: &Estimate) -> Option<f64> {
    if truth.model.index != est.model.index {
        return None;
    }
    let spec = &task.models[truth.model.index];
    let a = spec.to_unit(&truth.theta.0);
    let b = spec.to_unit(&est.theta.0);
    Some(crate::model::euclidean(&a, &b))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionRule {
    Map,
    Bic,
}

impl DecisionRule {
    pub fn name(self) -> &'static str {
        match self {
            DecisionRule::Map => "map",
            DecisionRule::Bic => "bic",
        }
    }

    pub fn apply(self, belief: &ParticleSet, task: &Task, n_trials: usize) -> Estimate {
        match self {
            DecisionRule::Map => belief.map_estimate(&task.models, Bandwidth::Silverman),
            DecisionRule::Bic => belief.bic_estimate(&task.models, n_trials, Bandwidth::Silverman),
        }
    }
}

/// Metrics for one participant at one checkpoint under one rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub task: String,
    pub method: Method,
    pub participant: usize,
    pub true_model: String,
    pub rule: DecisionRule,
    pub checkpoint: usize,
    pub estimated_model: String,
    pub model_correct: bool,
    pub behavioural_error: f64,
    pub parameter_error: Option<f64>,
    pub true_model_marginal: f64,
}

/// One trial of one participant, for the JSONL trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialTrace {
    pub participant: usize,
    pub trial: usize,
    pub design: Design,
    pub response: Vec<f64>,
    pub model_marginals: Vec<f64>,
    pub degenerate: bool,
    pub lfi: Option<LfiDiagnostics>,
    pub wall_time_ms: u64,
}

#[derive(Clone, Debug)]
pub struct ParticipantRun {
    pub participant: SyntheticParticipant,
    pub records: Vec<MetricsRecord>,
    pub trace: Vec<TrialTrace>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub task: String,
    pub method: Method,
    pub n_participants: usize,
    pub checkpoints: Vec<usize>,
    pub seed: u64,
    pub participants: ParticipantSpec,
    pub metrics: MetricConfig,
    pub engine: EngineConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            task: "demo".into(),
            method: Method::Bosmos,
            n_participants: 20,
            checkpoints: vec![1, 2, 4, 20],
            seed: 0,
            participants: ParticipantSpec::default(),
            metrics: MetricConfig::default(),
            engine: EngineConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<Task> {
        let task = Task::by_name(&self.task)?;
        self.method.check_task(&task)?;
        self.engine.validate()?;
        if self.n_participants == 0 {
            return Err(Error::Config("n_participants: must be at least 1".into()));
        }
        if self.checkpoints.is_empty() {
            return Err(Error::Config("checkpoints: must list at least one trial count".into()));
        }
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("checkpoints: must be strictly increasing".into()));
        }
        if self.metrics.n_designs == 0 || self.metrics.n_reps == 0 {
            return Err(Error::Config("metrics: n_designs and n_reps must be positive".into()));
        }
        if let Some(name) = &self.participants.true_model {
            if task.model_index(name).is_none() {
                return Err(Error::Config(format!("participants.true_model: unknown model `{name}`")));
            }
        }
        for c in &self.participants.constraints {
            if !task.models.iter().any(|m| m.params.iter().any(|p| p.name == c.param)) {
                return Err(Error::Config(format!(
                    "participants.constraints: no model of `{}` has parameter `{}`",
                    task.name, c.param
                )));
            }
        }
        Ok(task)
    }
}

/// Runs one participant through `max(checkpoints)` trials.
pub fn run_participant(engine: &Engine, cfg: &BenchmarkConfig, index: usize) -> Result<ParticipantRun> {
    let task = &engine.task;
    let participant = make_participant(task, &cfg.participants, cfg.seed, index)?;
    let truth = participant.estimate();
    let designs = metric_designs(task, cfg.metrics.n_designs, cfg.seed);
    let true_means = mean_responses(task, &truth, &designs, cfg.metrics.n_reps, cfg.seed);
    let true_spec = &task.models[truth.model.index];

    let mut belief = engine.initial_belief(derive_seed(participant.rng_seed, 1, 0))?;
    let mut records = Vec::new();
    let mut trace = Vec::new();
    let last = *cfg.checkpoints.last().expect("validated");
    let snapshot = |belief: &ParticleSet, t: usize, records: &mut Vec<MetricsRecord>| {
        for rule in [DecisionRule::Map, DecisionRule::Bic] {
            // The no-update baseline reports a prior predictive draw, fixed
            // per participant.
            let est = match engine.method {
                Method::Prior => belief.sampled_estimate(derive_seed(participant.rng_seed, 2, 0)),
                _ => rule.apply(belief, task, t),
            };
            let means = mean_responses(task, &est, &designs, cfg.metrics.n_reps, cfg.seed);
            records.push(MetricsRecord {
                task: task.name.clone(),
                method: engine.method,
                participant: index,
                true_model: truth.model.name.clone(),
                rule,
                checkpoint: t,
                estimated_model: est.model.name.clone(),
                model_correct: est.model.index == truth.model.index,
                behavioural_error: response_gap(task, &true_means, &means),
                parameter_error: parameter_error(task, &truth, &est),
                true_model_marginal: belief.model_marginals()[truth.model.index],
            });
        }
    };
    if cfg.checkpoints.contains(&0) {
        snapshot(&belief, 0, &mut records);
    }
    for t in 1..=last {
        let start = Instant::now();
        let selection = engine.propose(&belief)?;
        let mut rng = child_rng(participant.rng_seed, streams::RESPONSE, t as u64);
        let response = true_spec.simulate(&truth.theta.0, &selection.chosen.0, &mut rng);
        let update = engine.update(&belief, &selection.chosen, &response)?;
        belief = update.belief;
        trace.push(TrialTrace {
            participant: index,
            trial: t,
            design: selection.chosen,
            response: response.0,
            model_marginals: belief.model_marginals(),
            degenerate: update.degenerate,
            lfi: update.diagnostics,
            wall_time_ms: start.elapsed().as_millis() as u64,
        });
        if cfg.checkpoints.contains(&t) {
            snapshot(&belief, t, &mut records);
        }
    }
    Ok(ParticipantRun {
        participant,
        records,
        trace,
    })
}

#[derive(Clone, Debug)]
pub struct BenchmarkResult {
    pub config: BenchmarkConfig,
    pub runs: Vec<ParticipantRun>,
}

/// Runs every participant, in parallel across participants.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    let task = cfg.validate()?;
    let engine = Engine::new(task, cfg.method, cfg.engine.clone())?;
    let runs = (0..cfg.n_participants)
        .into_par_iter()
        .map(|i| run_participant(&engine, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(BenchmarkResult {
        config: cfg.clone(),
        runs,
    })
}

/// One aggregate row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub task: String,
    pub method: Method,
    pub checkpoint: usize,
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

impl BenchmarkResult {
    pub fn records(&self) -> impl Iterator<Item = &MetricsRecord> {
        self.runs.iter().flat_map(|r| r.records.iter())
    }

    /// Records at one checkpoint under one rule.
    pub fn at(&self, checkpoint: usize, rule: DecisionRule) -> Vec<&MetricsRecord> {
        self.records()
            .filter(|r| r.checkpoint == checkpoint && r.rule == rule)
            .collect()
    }

    pub fn mean_behavioural_error(&self, checkpoint: usize, rule: DecisionRule) -> f64 {
        let v: Vec<f64> = self.at(checkpoint, rule).iter().map(|r| r.behavioural_error).collect();
        stats::mean(&v)
    }

    /// Fraction of participants whose model was recovered, optionally within
    /// one true-model stratum.
    pub fn model_accuracy(&self, checkpoint: usize, rule: DecisionRule, true_model: Option<&str>) -> f64 {
        let v: Vec<f64> = self
            .at(checkpoint, rule)
            .iter()
            .filter(|r| true_model.is_none_or(|m| r.true_model == m))
            .map(|r| r.model_correct as u8 as f64)
            .collect();
        stats::mean(&v)
    }

    /// Mean wall time per trial, in milliseconds.
    pub fn mean_trial_ms(&self) -> f64 {
        let v: Vec<f64> = self
            .runs
            .iter()
            .flat_map(|r| r.trace.iter().map(|t| t.wall_time_ms as f64))
            .collect();
        stats::mean(&v)
    }

    pub fn summary(&self) -> Vec<SummaryRow> {
        let task = &self.config.task;
        let method = self.config.method;
        let mut groups: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
        for r in self.records() {
            let rule = r.rule.name();
            let mut push = |name: String, v: f64| groups.entry((r.checkpoint, name)).or_default().push(v);
            push(format!("eta_b_{rule}"), r.behavioural_error);
            push(format!("eta_m_{rule}"), r.model_correct as u8 as f64);
            push(format!("eta_m_{rule}_{}", r.true_model), r.model_correct as u8 as f64);
            if let Some(p) = r.parameter_error {
                push(format!("eta_p_{rule}"), p);
            }
        }
        groups
            .into_iter()
            .map(|((checkpoint, metric), v)| SummaryRow {
                task: task.clone(),
                method,
                checkpoint,
                metric,
                mean: stats::mean(&v),
                sd: stats::sd(&v),
                n: v.len(),
            })
            .collect()
    }

    /// Plain-text table: one row per checkpoint, `mean ± sd` per metric.
    pub fn render_table(&self) -> String {
        let rows = self.summary();
        let metrics = ["eta_b_map", "eta_p_map", "eta_m_map", "eta_b_bic", "eta_p_bic", "eta_m_bic"];
        let mut out = String::new();
        let _ = writeln!(out, "task: {}  method: {}", self.config.task, self.config.method);
        let _ = write!(out, "{:>6}", "trials");
        for m in metrics {
            let _ = write!(out, " {:>15}", m);
        }
        out.push('\n');
        let mut checkpoints: Vec<usize> = rows.iter().map(|r| r.checkpoint).collect();
        checkpoints.dedup();
        for c in checkpoints {
            let _ = write!(out, "{:>6}", c);
            for m in metrics {
                let cell = rows
                    .iter()
                    .find(|r| r.checkpoint == c && r.metric == m)
                    .map_or("-".to_string(), |r| format!("{:.2} ± {:.2}", r.mean, r.sd));
                let _ = write!(out, " {:>15}", cell);
            }
            out.push('\n');
        }
        out
    }

    /// Writes `records.csv`, `summary.csv`, `trace.jsonl`, `table.txt` and
    /// `timing.csv` into `dir`. Only the timing file depends on the clock.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        // One row per participant and checkpoint, with per-rule columns.
        let rules = [DecisionRule::Map, DecisionRule::Bic];
        let mut rows: BTreeMap<(usize, usize), [Option<&MetricsRecord>; 2]> = BTreeMap::new();
        for r in self.records() {
            let slot = rules.iter().position(|&x| x == r.rule).expect("known rule");
            rows.entry((r.participant, r.checkpoint)).or_default()[slot] = Some(r);
        }
        let mut header: Vec<String> = ["task", "method", "participant", "true_model", "checkpoint", "true_model_marginal"]
            .map(String::from)
            .to_vec();
        for rule in rules {
            for col in ["estimated_model", "model_correct", "behavioural_error", "parameter_error"] {
                header.push(format!("{col}_{}", rule.name()));
            }
        }
        let mut w = csv::Writer::from_path(dir.join("records.csv")).map_err(csv_error)?;
        w.write_record(&header).map_err(csv_error)?;
        for ((participant, checkpoint), pair) in rows {
            let first = pair.iter().flatten().next().expect("at least one rule");
            let mut row = vec![
                first.task.clone(),
                first.method.to_string(),
                participant.to_string(),
                first.true_model.clone(),
                checkpoint.to_string(),
                first.true_model_marginal.to_string(),
            ];
            for r in pair {
                match r {
                    Some(r) => row.extend([
                        r.estimated_model.clone(),
                        r.model_correct.to_string(),
                        r.behavioural_error.to_string(),
                        r.parameter_error.map_or(String::new(), |p| p.to_string()),
                    ]),
                    None => row.extend(std::iter::repeat_n(String::new(), 4)),
                }
            }
            w.write_record(&row).map_err(csv_error)?;
        }
        w.flush()?;

        let mut w = csv::Writer::from_path(dir.join("summary.csv")).map_err(csv_error)?;
        for row in self.summary() {
            w.serialize(row).map_err(csv_error)?;
        }
        w.flush()?;

        let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("trace.jsonl"))?);
        for run in &self.runs {
            for t in &run.trace {
                let mut v = serde_json::to_value(t)?;
                v["wall_time_ms"] = serde_json::Value::Null;
                writeln!(f, "{}", serde_json::to_string(&v)?)?;
            }
        }
        f.flush()?;

        std::fs::write(dir.join("table.txt"), self.render_table())?;

        let mut w = csv::Writer::from_path(dir.join("timing.csv")).map_err(csv_error)?;
        w.write_record(["participant", "trials", "mean_trial_ms"]).map_err(csv_error)?;
        for run in &self.runs {
            let ms: Vec<f64> = run.trace.iter().map(|t| t.wall_time_ms as f64).collect();
            w.write_record([
                run.participant.index.to_string(),
                ms.len().to_string(),
                format!("{:.1}", stats::mean(&ms)),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
