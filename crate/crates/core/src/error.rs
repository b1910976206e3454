use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The threshold `J` does not exceed the feasibility floor.
    #[error("infeasible design: J = {j} must exceed the minimum J = {min_j}")]
    Infeasible { j: f64, min_j: f64 },

    #[error("decoder ambiguity at t_c = {t_c}: {candidates} candidates in the reception window")]
    DecoderAmbiguity { t_c: f64, candidates: i64 },

    #[error("channel protocol violation: packet submitted at t = {t} while another is in flight")]
    ChannelBusy { t: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("singular matrix: {0}")]
    SingularMatrix(String),

    /// The trigger/reception loop failed to settle at a single instant.
    #[error("event loop did not settle at t = {t}")]
    Zeno { t: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("sweep point {index} (gamma = {gamma}): {source}")]
    SweepPoint {
        index: usize,
        gamma: f64,
        #[source]
        source: Box<Error>,
    },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
