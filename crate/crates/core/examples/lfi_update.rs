//! One likelihood-free update next to the exact-likelihood update, on the
//! memory task.
//!
//! ```text
//! cargo run --release -p simsel --example lfi_update -- 12.5 0
//! ```

use simsel::lfi::{lfi_step, LfiConfig};
use simsel::{Design, ParticleSet, Response, Task};

fn main() -> simsel::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let lag = args.first().copied().unwrap_or(12.5);
    let recalled = args.get(1).copied().unwrap_or(0.0);
    let task = Task::by_name("memory")?;
    let belief = ParticleSet::from_priors(&task.models, 5000, 9)?;
    let design = Design(vec![lag]);
    let response = Response::scalar(recalled);

    let (out, diag) = lfi_step(&belief, &task.models, &response, &design.0, &task.discrepancy, &LfiConfig::default(), 9)?;
    println!("lag {lag}, recalled {recalled}; eta = {:.4}", diag.eta);
    for m in &diag.per_model {
        println!(
            "  {:<4} omega {:.4} kappa {:.4} epsilon {:.4} sims {}",
            m.model,
            m.omega.unwrap_or(f64::NAN),
            m.kappa,
            m.epsilon.unwrap_or(f64::NAN),
            m.n_sims
        );
    }
    let exact = belief.reweight_log(|p| {
        task.models[p.model]
            .log_likelihood(&response, &p.theta, &design.0)
            .unwrap_or(f64::NEG_INFINITY)
    })?;
    println!("model marginals: likelihood-free {:.3?}, exact {:.3?}", out.belief.model_marginals(), exact.model_marginals());
    Ok(())
}
