use thiserror::Error;

/// Errors surfaced by the selection engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate update: every particle received zero likelihood")]
    DegenerateUpdate,

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("simulator failure in model `{model}` at theta {theta:?}: {message}")]
    Simulator {
        model: String,
        theta: Vec<f64>,
        message: String,
    },

    #[error("model `{0}` has no tractable likelihood over a finite response set")]
    UnsupportedModel(String),

    #[error("every candidate model has lost all particles")]
    AllModelsDead,

    #[error("invalid response: {0}")]
    InvalidResponse(String),

    #[error("invalid session transition: {0}")]
    Phase(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
