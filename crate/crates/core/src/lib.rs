//! Simulator-based adaptive experimental design for joint model and
//! parameter selection.
//!
//! The crate pairs a particle belief over `(model, parameters)` with
//! likelihood-free updates driven by Gaussian-process discrepancy surrogates,
//! and picks each next design by minimizing an entropy-based utility estimated
//! from simulations.

pub mod belief;
pub mod design;
pub mod engine;
pub mod entropy;
pub mod error;
pub mod gp;
pub mod harness;
pub mod lfi;
pub mod model;
pub mod rng;
pub mod session;
pub mod space;
pub mod stats;
pub mod tasks;

pub use belief::{Bandwidth, Estimate, Particle, ParticleSet};
pub use error::{Error, Result};
pub use model::{Discrepancy, ModelId, ModelSpec, ParameterVector, Response, Simulator};
pub use space::{Design, DesignDim, DesignSpace, ParamSpec, Prior};
pub use engine::{Engine, EngineConfig, Method};
pub use tasks::Task;
pub use harness::{BenchmarkConfig, BenchmarkResult, DecisionRule};
pub use session::{Phase, Session, SessionConfig};
