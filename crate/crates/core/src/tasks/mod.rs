//! Built-in cognitive tasks and their registry.

pub mod demo;
pub mod memory;
pub mod risky;
pub mod sigdet;

use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::model::{Discrepancy, ModelSpec, Response};
use crate::space::{Design, DesignSpace, ParamSpec};

/// Names accepted by [`Task::by_name`].
pub const TASK_NAMES: [&str; 4] = ["demo", "memory", "sigdet", "risky"];

/// A set of candidate models sharing one design space and response type.
#[derive(Clone, Debug)]
pub struct Task {
    pub name: String,
    pub models: Vec<ModelSpec>,
    pub design_space: DesignSpace,
    pub discrepancy: Discrepancy,
    /// Per-response-dimension scale used to normalize behavioural error.
    pub response_scale: Vec<f64>,
}

impl Task {
    pub fn by_name(name: &str) -> Result<Task> {
        let (models, design_space, response_scale) = match name {
            "demo" => (demo::models(), demo::design_space(), vec![10.0]),
            "memory" => (memory::models(), memory::design_space(), vec![1.0]),
            "sigdet" => (sigdet::models(), sigdet::design_space(), vec![1.0, 9.0]),
            "risky" => (risky::models(), risky::design_space(), vec![1.0]),
            other => {
                return Err(Error::Config(format!(
                    "unknown task `{other}`; expected one of {}",
                    TASK_NAMES.join(", ")
                )))
            }
        };
        Ok(Task {
            name: name.to_string(),
            models,
            design_space,
            discrepancy: Discrepancy::Euclidean,
            response_scale,
        })
    }

    /// Whether every model has an exact likelihood.
    pub fn has_likelihoods(&self) -> bool {
        self.models.iter().all(ModelSpec::has_likelihood)
    }

    /// Whether every model has a likelihood over a finite response set.
    pub fn has_finite_responses(&self) -> bool {
        self.models.iter().all(|m| m.response_support().is_some())
    }

    pub fn model_index(&self, name: &str) -> Option<usize> {
        self.models.iter().position(|m| m.name() == name)
    }

    /// Checks that a response is admissible at `design`.
    pub fn validate_response(&self, design: &Design, response: &Response) -> Result<()> {
        let bad = |why: String| Err(Error::InvalidResponse(why));
        let v = &response.0;
        if v.iter().any(|x| !x.is_finite()) {
            return bad("values must be finite".into());
        }
        let binary = |x: f64| x == 0.0 || x == 1.0;
        match self.name.as_str() {
            "demo" if v.len() == 1 => Ok(()),
            "memory" | "risky" if v.len() == 1 && binary(v[0]) => Ok(()),
            "sigdet" if v.len() == 2 && binary(v[0]) => {
                let cap = design.0.get(1).copied().unwrap_or(1.0) - 1.0;
                if v[1].fract() == 0.0 && v[1] >= 0.0 && v[1] <= cap {
                    Ok(())
                } else {
                    bad(format!("looks must be an integer in [0, {cap}]"))
                }
            }
            "demo" => bad("expected one real value".into()),
            "sigdet" => bad("expected [decision in {0,1}, looks]".into()),
            "memory" | "risky" => bad("expected a single value in {0, 1}".into()),
            // User-defined tasks only need finite values.
            _ => Ok(()),
        }
    }

    /// Presentation payload for a design.
    pub fn render_hint(&self, design: &Design) -> Value {
        let d = &design.0;
        match self.name.as_str() {
            "demo" => json!({"kind": "demo", "noise_sd": d[0]}),
            "memory" => json!({"kind": "memory", "lag_seconds": d[0]}),
            "sigdet" => json!({
                "kind": "sigdet",
                "signal_strength": d[0],
                "max_observations": d[1] as i64,
                "max_looks": d[1] as i64 - 1,
            }),
            "risky" => {
                let (a, b) = risky::lotteries(d);
                json!({"kind": "risky", "lottery_a": a, "lottery_b": b})
            }
            _ => json!({"kind": self.name}),
        }
    }

    pub fn describe(&self) -> TaskInfo {
        TaskInfo {
            name: self.name.clone(),
            models: self
                .models
                .iter()
                .map(|m| ModelInfo {
                    name: m.name().to_string(),
                    params: m.params.clone(),
                    exact_likelihood: m.has_likelihood(),
                })
                .collect(),
            design_space: self.design_space.clone(),
            methods: crate::engine::Method::ALL
                .iter()
                .filter(|m| m.check_task(self).is_ok())
                .map(|m| m.name().to_string())
                .collect(),
        }
    }
}

/// Registry metadata for one task.
#[derive(Clone, Debug, Serialize)]
pub struct TaskInfo {
    pub name: String,
    pub models: Vec<ModelInfo>,
    pub design_space: DesignSpace,
    pub methods: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModelInfo {
    pub name: String,
    pub params: Vec<ParamSpec>,
    pub exact_likelihood: bool,
}

pub fn registry() -> Vec<TaskInfo> {
    TASK_NAMES
        .iter()
        .map(|n| Task::by_name(n).expect("built-in task").describe())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;

    #[test]
    fn registry_lists_all_tasks() {
        for name in TASK_NAMES {
            assert_eq!(Task::by_name(name).unwrap().name, name);
        }
        assert!(matches!(Task::by_name("nope"), Err(Error::Config(_))));
    }

    #[test]
    fn simulated_responses_are_admissible() {
        let mut rng = rng_from(12);
        for name in TASK_NAMES {
            let task = Task::by_name(name).unwrap();
            for _ in 0..500 {
                let d = task.design_space.sample(&mut rng);
                assert!(task.design_space.contains(&d));
                for m in &task.models {
                    let th = m.sample_prior(&mut rng);
                    assert!(m.contains(&th));
                    let r = m.simulate(&th, &d.0, &mut rng);
                    task.validate_response(&d, &r).unwrap();
                }
            }
        }
    }

    #[test]
    fn exact_likelihoods_match_frequencies() {
        let mut rng = rng_from(13);
        for name in ["memory", "risky"] {
            let task = Task::by_name(name).unwrap();
            for _ in 0..20 {
                let m = &task.models[rand::Rng::random_range(&mut rng, 0..task.models.len())];
                let th = m.sample_prior(&mut rng);
                let d = task.design_space.sample(&mut rng);
                let p = m.exact_likelihood(&Response::scalar(1.0), &th, &d.0).unwrap();
                let q = m.exact_likelihood(&Response::scalar(0.0), &th, &d.0).unwrap();
                assert!((p + q - 1.0).abs() < 1e-12);
                let n = 10_000;
                let hits = (0..n).filter(|_| m.simulate(&th, &d.0, &mut rng).0[0] == 1.0).count();
                let freq = hits as f64 / n as f64;
                let se = (p * (1.0 - p) / n as f64).sqrt().max(1e-4);
                assert!((freq - p).abs() <= 3.0 * se, "{name} {} {freq} vs {p}", m.name());
            }
        }
    }

    #[test]
    fn risky_hint_lotteries_sum_to_one() {
        let task = Task::by_name("risky").unwrap();
        let mut rng = rng_from(14);
        for _ in 0..100 {
            let hint = task.render_hint(&task.design_space.sample(&mut rng));
            for key in ["lottery_a", "lottery_b"] {
                let l = &hint[key];
                let s = l["p_low"].as_f64().unwrap() + l["p_mid"].as_f64().unwrap() + l["p_high"].as_f64().unwrap();
                assert!((s - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn malformed_responses_are_rejected() {
        let task = Task::by_name("sigdet").unwrap();
        let d = Design(vec![1.0, 3.0]);
        assert!(task.validate_response(&d, &Response(vec![1.0, 2.0])).is_ok());
        assert!(task.validate_response(&d, &Response(vec![1.0, 3.0])).is_err());
        assert!(task.validate_response(&d, &Response(vec![0.5, 0.0])).is_err());
        let mem = Task::by_name("memory").unwrap();
        assert!(mem.validate_response(&Design(vec![3.0]), &Response::scalar(2.0)).is_err());
    }
}
