//! Fits a GP to noisy samples of a 1-d function and proposes the next batch
//! by lower confidence bound.
//!
//! ```text
//! cargo run --release -p simsel --example gp_surrogate
//! ```

use rand::Rng;
use simsel::gp::{propose_batch, AcquisitionSpec, GpModel, Kernel};
use simsel::rng::rng_from;

fn f(x: f64) -> f64 {
    (6.0 * x).sin() + 2.0 * (x - 0.6).powi(2)
}

fn main() -> simsel::Result<()> {
    let mut rng = rng_from(4);
    let xs: Vec<Vec<f64>> = (0..12).map(|_| vec![rng.random::<f64>()]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| f(x[0]) + 0.05 * (rng.random::<f64>() - 0.5)).collect();
    let gp = GpModel::fit(xs, ys, Kernel::matern52(1, 0.2), 1e-3)?;
    println!("{:>5} {:>8} {:>8} {:>8}", "x", "f(x)", "mean", "sd");
    for i in 0..=10 {
        let x = i as f64 / 10.0;
        let (m, v) = gp.predict(&[x]);
        println!("{x:>5.1} {:>8.3} {m:>8.3} {:>8.3}", f(x), v.sqrt());
    }
    let batch = propose_batch(&gp, &AcquisitionSpec::lcb(2.0, 3), 4);
    println!("next LCB batch: {batch:.3?}");
    Ok(())
}
