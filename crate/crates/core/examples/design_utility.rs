//! Scans the simulator-based design utility over the demo task's noise
//! level, then runs the Bayesian-optimization search.
//!
//! ```text
//! cargo run --release -p simsel --example design_utility
//! ```

use simsel::design::{select_design_bosmos, utility_with_plan, UtilityEvalConfig, UtilityPlan};
use simsel::{Design, ParticleSet, Task};

fn main() -> simsel::Result<()> {
    let task = Task::by_name("demo")?;
    let belief = ParticleSet::from_priors(&task.models, 2000, 3)?;
    let cfg = UtilityEvalConfig::default();
    // One plan for every design gives common random numbers across the scan.
    let plan = UtilityPlan::new(&belief, &cfg, 3);
    println!("{:>8} {:>10} {:>12} {:>10}", "noise", "utility", "conditional", "pooled");
    for d in [0.001, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0] {
        let u = utility_with_plan(&Design(vec![d]), &plan, &task.models, &cfg)?;
        println!("{d:>8.3} {:>10.3} {:>12.3} {:>10.3}", u.value, u.conditional_entropy, u.pooled_entropy);
    }
    let sel = select_design_bosmos(&belief, &task.models, &task.design_space, &cfg, 3)?;
    println!(
        "search chose noise {:.3} after {} candidates and {} simulations",
        sel.chosen.0[0],
        sel.candidates.len(),
        sel.n_sims
    );
    Ok(())
}
