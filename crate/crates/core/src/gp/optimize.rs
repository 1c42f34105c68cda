use rand::Rng;

use crate::rng::SimRng;

const PRIMES: [u32; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u32, base: u32) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let b = base as f64;
    while i > 0 {
        f /= b;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Halton points in `[0,1)^dim`, rotated by `shift` (Cranley-Patterson).
pub fn halton(n: usize, dim: usize, shift: &[f64]) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton supports up to {} dims", PRIMES.len());
    (1..=n as u32)
        .map(|i| {
            (0..dim)
                .map(|d| {
                    let v = radical_inverse(i, PRIMES[d]) + shift.get(d).copied().unwrap_or(0.0);
                    v - v.floor()
                })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MultistartConfig {
    /// Low-discrepancy start points evaluated before refinement.
    pub n_starts: usize,
    /// How many of the best starts are refined by compass search.
    pub n_refine: usize,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_evals: usize,
}

impl Default for MultistartConfig {
    fn default() -> Self {
        Self {
            n_starts: 64,
            n_refine: 5,
            initial_step: 0.1,
            min_step: 2e-3,
            max_evals: 120,
        }
    }
}

pub struct MultistartResult {
    pub best: Vec<f64>,
    pub value: f64,
    pub starts: Vec<(Vec<f64>, f64)>,
}

/// Minimizes `f` over the unit cube: evaluates a shifted Halton grid, then
/// runs a compass search from the best starts.
pub fn minimize_multistart(
    mut f: impl FnMut(&[f64]) -> f64,
    dim: usize,
    cfg: &MultistartConfig,
    rng: &mut SimRng,
) -> MultistartResult {
    let shift: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
    let mut starts: Vec<(Vec<f64>, f64)> = halton(cfg.n_starts, dim, &shift)
        .into_iter()
        .map(|x| {
            let v = f(&x);
            (x, if v.is_nan() { f64::INFINITY } else { v })
        })
        .collect();
    let mut order: Vec<usize> = (0..starts.len()).collect();
    order.sort_by(|&a, &b| starts[a].1.total_cmp(&starts[b].1));

    let mut best = starts[order[0]].clone();
    for &i in order.iter().take(cfg.n_refine) {
        let (x, v) = compass(&mut f, starts[i].0.clone(), starts[i].1, cfg);
        if v < best.1 {
            best = (x, v);
        }
    }
    starts.shrink_to_fit();
    MultistartResult {
        best: best.0,
        value: best.1,
        starts,
    }
}

fn compass(
    f: &mut impl FnMut(&[f64]) -> f64,
    mut x: Vec<f64>,
    mut fx: f64,
    cfg: &MultistartConfig,
) -> (Vec<f64>, f64) {
    let mut step = cfg.initial_step;
    let mut evals = 0;
    let dim = x.len();
    while step >= cfg.min_step && evals < cfg.max_evals {
        let mut improved = false;
        'dirs: for d in 0..dim {
            for sign in [1.0, -1.0] {
                let mut y = x.clone();
                y[d] = (y[d] + sign * step).clamp(0.0, 1.0);
                if y[d] == x[d] {
                    continue;
                }
                let fy = f(&y);
                evals += 1;
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                    break 'dirs;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (x, fx)
}
