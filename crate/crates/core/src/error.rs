use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("posterior undefined: output {output} has zero marginal probability")]
    UndefinedPosterior { output: usize },

    #[error("support mismatch: {left} vs {right} labels")]
    SupportMismatch { left: usize, right: usize },

    #[error("distance {distance} exceeds domain bound D = {bound} (round {round}, sample {sample})")]
    DomainBound {
        distance: f64,
        bound: f64,
        round: usize,
        sample: usize,
    },

    #[error("inversion diverged at round {round}: gap {gap} vs initial {initial}")]
    Divergence { round: usize, gap: f64, initial: f64 },

    #[error("non-finite parameters in ensemble member {model} at step {step}")]
    NonFinite { model: usize, step: usize },

    #[error("undefined estimate: {0}")]
    UndefinedEstimate(String),

    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("kernel file line {line}: {message}")]
    KernelFile { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
