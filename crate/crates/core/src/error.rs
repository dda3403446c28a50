use thiserror::Error;

use crate::lexer::SourceSpan;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{span}: syntax error: {message}")]
    Syntax { span: SourceSpan, message: String },

    #[error("resolution error: {0}")]
    Resolve(String),

    #[error("error library: {0}")]
    Library(String),

    #[error("error model binding: {0}")]
    Binding(String),

    /// Ambiguous observation, runtime nondeterminism, immediate livelock or
    /// an unsupported trigger discovered while composing the model.
    #[error("behavior: {0}")]
    Behavior(String),

    #[error("state space exceeds the cap of {limit} states")]
    StateCap { limit: usize },

    #[error("vanishing states form a loop that is never left: {0}")]
    VanishingCycle(String),

    #[error("chain is not ergodic: {0}")]
    NonErgodic(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("measure: {0}")]
    Measure(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

impl Error {
    pub fn syntax(span: SourceSpan, message: impl Into<String>) -> Self {
        Error::Syntax { span, message: message.into() }
    }
}
