//! Runs a small synthetic-participant benchmark and prints the metric table.
//!
//! ```text
//! cargo run --release -p simsel --example benchmark -- memory bosmos 5 4
//! cargo run --release -p simsel --example benchmark -- sigdet bosmos 20 20 PR theta_len<=1
//! ```

use simsel::harness::{ParamConstraint, ParticipantSpec};
use simsel::{BenchmarkConfig, DecisionRule, Method};

fn main() -> simsel::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let task = args.first().map_or("demo", String::as_str);
    let method: Method = args.get(1).map_or("bosmos", String::as_str).parse()?;
    let n: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let trials: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(4);
    let mut checkpoints: Vec<usize> = [1, 2, 4, 20].into_iter().filter(|&c| c < trials).collect();
    checkpoints.push(trials);
    let cfg = BenchmarkConfig {
        task: task.into(),
        method,
        n_participants: n,
        checkpoints,
        participants: ParticipantSpec {
            true_model: args.get(4).cloned(),
            constraints: args
                .get(5)
                .and_then(|c| c.split_once("<="))
                .map(|(param, max)| ParamConstraint {
                    param: param.into(),
                    min: None,
                    max: max.parse().ok(),
                })
                .into_iter()
                .collect(),
        },
        ..BenchmarkConfig::default()
    };
    let res = simsel::harness::run_benchmark(&cfg)?;
    print!("{}", res.render_table());
    let task = simsel::Task::by_name(task)?;
    for rule in [DecisionRule::Map, DecisionRule::Bic] {
        let acc: Vec<String> = task
            .models
            .iter()
            .map(|m| format!("{} {:.2}", m.name(), res.model_accuracy(trials, rule, Some(m.name()))))
            .collect();
        println!("{} accuracy by true model at {trials}: {}", rule.name(), acc.join(", "));
    }
    println!("mean trial time: {:.0} ms", res.mean_trial_ms());
    Ok(())
}
