//! Defines two simulator-only models and runs the likelihood-free loop on a
//! synthetic participant.
//!
//! ```text
//! cargo run --release -p simsel --example custom_model
//! ```

use rand::Rng;
use simsel::rng::{rng_from, SimRng};
use simsel::{
    Design, DesignDim, DesignSpace, Discrepancy, Engine, EngineConfig, Method, ModelSpec, ParamSpec, Response, Simulator,
    Task,
};

/// Response time that grows linearly or logarithmically with set size.
struct Rt {
    log: bool,
}

impl Simulator for Rt {
    fn simulate(&self, theta: &[f64], design: &[f64], rng: &mut SimRng) -> Response {
        let n = design[0];
        let load = if self.log { (1.0 + n).ln() * 4.0 } else { n };
        let noise: f64 = rng.random::<f64>() - 0.5;
        Response::scalar(theta[0] + theta[1] * load + noise)
    }
}

fn main() -> simsel::Result<()> {
    let params = || vec![ParamSpec::uniform("base", 0.0, 2.0), ParamSpec::uniform("slope", 0.0, 1.0)];
    let task = Task {
        name: "search".into(),
        models: vec![
            ModelSpec::new("LIN", 0, params(), Rt { log: false }),
            ModelSpec::new("LOG", 1, params(), Rt { log: true }),
        ],
        design_space: DesignSpace::new(vec![DesignDim::Integer {
            name: "set_size".into(),
            low: 1,
            high: 16,
        }]),
        discrepancy: Discrepancy::Euclidean,
        response_scale: vec![1.0],
    };
    let engine = Engine::new(task, Method::Bosmos, EngineConfig::default())?;
    let truth = &engine.task.models[1];
    let theta = [0.5, 0.6];
    let mut belief = engine.initial_belief(5)?;
    let mut rng = rng_from(99);
    for t in 1..=8 {
        let d: Design = engine.propose(&belief)?.chosen;
        let x = truth.simulate(&theta, &d.0, &mut rng);
        belief = engine.update(&belief, &d, &x)?.belief;
        println!("trial {t}: set size {:>2} -> {:.2}; P(LIN, LOG) = {:.3?}", d.0[0], x.0[0], belief.model_marginals());
    }
    println!("MAP: {:?}", belief.map_estimate(&engine.task.models, Default::default()));
    Ok(())
}
