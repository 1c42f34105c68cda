//! Lists the built-in tasks, then simulates each model at one random design.
//!
//! ```text
//! cargo run --release -p simsel --example tasks
//! ```

use simsel::rng::rng_from;
use simsel::tasks::{registry, Task};

fn main() -> simsel::Result<()> {
    let mut rng = rng_from(1);
    for info in registry() {
        let task = Task::by_name(&info.name)?;
        println!("{} (methods: {})", info.name, info.methods.join(", "));
        let design = task.design_space.sample(&mut rng);
        println!("  design {:?}", design.0);
        println!("  hint   {}", task.render_hint(&design));
        for m in &task.models {
            let theta = m.sample_prior(&mut rng);
            let xs: Vec<Vec<f64>> = (0..5).map(|_| m.simulate(&theta, &design.0, &mut rng).0).collect();
            let names: Vec<&str> = m.params.iter().map(|p| p.name.as_str()).collect();
            println!("  {:<4} {names:?} = {theta:.2?} -> {xs:?}", m.name());
        }
    }
    Ok(())
}
