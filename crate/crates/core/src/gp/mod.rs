//! Exact Gaussian-process regression with fixed hyperparameters.
//!
//! Inputs are expected in the unit cube. The prior mean is zero; callers that
//! need a different scale standardize their targets first.

mod acquisition;
mod optimize;

pub use acquisition::{propose_batch, AcquisitionKind, AcquisitionSpec};
pub(crate) use acquisition::propose_batch_with;
pub use optimize::{halton, minimize_multistart, MultistartConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lengthscale in unit-cube coordinates.
pub const DEFAULT_LENGTHSCALE: f64 = 0.2;

const MAX_JITTER: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    Rbf,
    Matern52,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub family: KernelFamily,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
}

impl Kernel {
    pub fn rbf(dim: usize, lengthscale: f64) -> Self {
        Self {
            family: KernelFamily::Rbf,
            lengthscales: vec![lengthscale; dim],
            signal_variance: 1.0,
        }
    }

    pub fn matern52(dim: usize, lengthscale: f64) -> Self {
        Self {
            family: KernelFamily::Matern52,
            lengthscales: vec![lengthscale; dim],
            signal_variance: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.iter().any(|l| !(*l > 0.0)) || !(self.signal_variance > 0.0) {
            return Err(Error::Config(
                "kernel lengthscales and signal variance must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let z = (x - y) / l;
            r2 += z * z;
        }
        match self.family {
            KernelFamily::Rbf => self.signal_variance * (-0.5 * r2).exp(),
            KernelFamily::Matern52 => {
                let r = (5.0 * r2).sqrt();
                self.signal_variance * (1.0 + r + r * r / 3.0) * (-r).exp()
            }
        }
    }
}

/// A fitted GP: training data plus the cached Cholesky factor of
/// `K + (noise + jitter) I`.
#[derive(Clone, Debug)]
pub struct GpModel {
    kernel: Kernel,
    noise_variance: f64,
    jitter: f64,
    dim: usize,
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    /// Lower-triangular factor, row-major `n x n`.
    chol: Vec<f64>,
    alpha: Vec<f64>,
}

impl GpModel {
    pub fn fit(inputs: Vec<Vec<f64>>, targets: Vec<f64>, kernel: Kernel, noise_variance: f64) -> Result<Self> {
        kernel.validate()?;
        let n = inputs.len();
        if n < 1 || targets.len() != n {
            return Err(Error::Config(format!(
                "GP needs matching inputs and targets, got {n} and {}",
                targets.len()
            )));
        }
        let dim = inputs[0].len();
        if inputs.iter().any(|x| x.len() != dim) || kernel.lengthscales.len() != dim {
            return Err(Error::Config("GP input dimensions disagree".into()));
        }
        if !(noise_variance >= 0.0) || targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numerical("non-finite GP targets or negative noise".into()));
        }

        let mut gram = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let k = kernel.eval(&inputs[i], &inputs[j]);
                gram[i * n + j] = k;
                gram[j * n + i] = k;
            }
        }

        let mut jitter = 0.0;
        let chol = loop {
            if let Some(l) = cholesky(&gram, n, noise_variance + jitter) {
                break l;
            }
            jitter = if jitter == 0.0 { 1e-10 } else { jitter * 10.0 };
            if jitter > MAX_JITTER {
                return Err(Error::Numerical(
                    "Gram matrix not positive definite after maximum jitter".into(),
                ));
            }
        };
        let alpha = chol_solve(&chol, n, &targets);
        Ok(Self {
            kernel,
            noise_variance,
            jitter,
            dim,
            inputs,
            targets,
            chol,
            alpha,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    fn cross(&self, query: &[f64]) -> Vec<f64> {
        self.inputs.iter().map(|x| self.kernel.eval(query, x)).collect()
    }

    pub fn predict_mean(&self, query: &[f64]) -> f64 {
        self.inputs
            .iter()
            .zip(&self.alpha)
            .map(|(x, a)| a * self.kernel.eval(query, x))
            .sum()
    }

    /// Posterior mean and latent variance (noise excluded, clamped at 0).
    pub fn predict(&self, query: &[f64]) -> (f64, f64) {
        debug_assert_eq!(query.len(), self.dim);
        let k = self.cross(query);
        let mean = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = forward_sub(&self.chol, self.len(), &k);
        let prior = self.kernel.eval(query, query);
        let var = prior - v.iter().map(|x| x * x).sum::<f64>();
        (mean, var.max(0.0))
    }

    /// Posterior covariance between `query` and the training inputs, and the
    /// whitened cross term `L^{-1} k(X, query)`.
    pub(crate) fn whitened_cross(&self, query: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.cross(query);
        let v = forward_sub(&self.chol, self.len(), &k);
        (k, v)
    }

    #[allow(dead_code)]
    pub(crate) fn chol(&self) -> &[f64] {
        &self.chol
    }
}

/// Cholesky of `a + shift * I`; `None` if not positive definite.
pub(crate) fn cholesky(a: &[f64], n: usize, shift: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            if i == j {
                s += shift;
            }
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

pub(crate) fn forward_sub(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&y[..i]).map(|(a, b)| a * b).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    y
}

pub(crate) fn backward_sub(l: &[f64], n: usize, y: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

fn chol_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    backward_sub(l, n, &forward_sub(l, n, b))
}
