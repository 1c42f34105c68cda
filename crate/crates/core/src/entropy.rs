//! Differential entropy of a Gaussian-kernel smoothing of a sample.
//!
//! The sample defines an equal-weight mixture `p(y) = 1/n sum_j N(y | x_j, h^2)`.
//! Its entropy `-E_p[log p]` is the average over components of the
//! expectation under each component, which is computed with tensor
//! Gauss-Hermite quadrature. Identical samples are merged first, so discrete
//! responses cost almost nothing.

use serde::{Deserialize, Serialize};

use crate::belief::silverman;

/// Smallest bandwidth allowed by the automatic rule.
pub const BANDWIDTH_FLOOR: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    pub value: f64,
    pub n_samples: usize,
    pub bandwidth: Vec<f64>,
}

/// Silverman's rule per dimension, floored at [`BANDWIDTH_FLOOR`].
pub fn auto_bandwidth(samples: &[Vec<f64>]) -> Vec<f64> {
    let w = vec![1.0; samples.len()];
    silverman(samples, &w)
        .into_iter()
        .map(|h| h.max(BANDWIDTH_FLOOR))
        .collect()
}

/// Entropy with an isotropic bandwidth.
pub fn kernel_entropy(samples: &[Vec<f64>], bandwidth: f64) -> EntropyEstimate {
    let dim = samples.first().map_or(1, Vec::len);
    kernel_entropy_diag(samples, &vec![bandwidth; dim])
}

/// Entropy with a per-dimension bandwidth.
pub fn kernel_entropy_diag(samples: &[Vec<f64>], bandwidth: &[f64]) -> EntropyEstimate {
    assert!(!samples.is_empty(), "entropy needs at least one sample");
    let dim = bandwidth.len();
    let n = samples.len() as f64;
    let (points, counts) = merge_duplicates(samples);
    let (nodes, weights) = tensor_rule(dim);
    let inv_h: Vec<f64> = bandwidth.iter().map(|h| 1.0 / h).collect();
    let log_norm: f64 = bandwidth
        .iter()
        .map(|h| -0.5 * (2.0 * std::f64::consts::PI).ln() - h.ln())
        .sum::<f64>()
        - n.ln();

    let mut y = vec![0.0; dim];
    let mut logs = vec![0.0; points.len()];
    let mut total = 0.0;
    for (p, &c) in points.iter().zip(&counts) {
        let mut expect = 0.0;
        for (z, &wz) in nodes.iter().zip(&weights) {
            for d in 0..dim {
                y[d] = p[d] + bandwidth[d] * z[d];
            }
            let mut max = f64::NEG_INFINITY;
            for ((q, &cq), slot) in points.iter().zip(&counts).zip(logs.iter_mut()) {
                let mut s = 0.0;
                for d in 0..dim {
                    let u = (y[d] - q[d]) * inv_h[d];
                    s += u * u;
                }
                *slot = cq.ln() - 0.5 * s;
                max = max.max(*slot);
            }
            let lse = max + logs.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            expect += wz * (lse + log_norm);
        }
        total += c * expect;
    }
    EntropyEstimate {
        value: -total / n,
        n_samples: samples.len(),
        bandwidth: bandwidth.to_vec(),
    }
}

fn merge_duplicates(samples: &[Vec<f64>]) -> (Vec<&Vec<f64>>, Vec<f64>) {
    let mut sorted: Vec<&Vec<f64>> = samples.iter().collect();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut points: Vec<&Vec<f64>> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    for s in sorted {
        match points.last() {
            Some(last) if *last == s => *counts.last_mut().unwrap() += 1.0,
            _ => {
                points.push(s);
                counts.push(1.0);
            }
        }
    }
    (points, counts)
}

/// Tensor Gauss-Hermite rule for `E[f(Z)]`, `Z ~ N(0, I_dim)`.
fn tensor_rule(dim: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let per_axis = match dim {
        0 | 1 => 16,
        2 => 10,
        3 => 6,
        _ => 4,
    };
    let (x, w) = gauss_hermite(per_axis);
    let mut nodes = vec![Vec::new()];
    let mut weights = vec![1.0];
    for _ in 0..dim {
        let mut nn = Vec::with_capacity(nodes.len() * per_axis);
        let mut nw = Vec::with_capacity(nodes.len() * per_axis);
        for (node, &wn) in nodes.iter().zip(&weights) {
            for (&xi, &wi) in x.iter().zip(&w) {
                let mut v = node.clone();
                v.push(xi);
                nn.push(v);
                nw.push(wn * wi);
            }
        }
        nodes = nn;
        weights = nw;
    }
    (nodes, weights)
}

/// Nodes and weights for the standard normal (probabilists') measure,
/// obtained from the physicists' rule by Newton iteration.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let pim4 = std::f64::consts::PI.powf(-0.25);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    let mut z = 0.0;
    for i in 0..m {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-14 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let nodes = x.iter().map(|v| v * std::f64::consts::SQRT_2).collect();
    let weights = w.iter().map(|v| v / sqrt_pi).collect();
    (nodes, weights)
}
