use std::io;

use crate::cards::Card;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    #[error("unknown card {0:?}")]
    UnknownCard(String),

    #[error("inconsistent trace: turn {turn} trashes {card} but none are owned")]
    InconsistentTrace { turn: u32, card: Card },

    #[error("trace has {n_turns} turns, more than the encodable maximum of {max}")]
    TraceTooLong { n_turns: usize, max: usize },

    #[error("trace has {n_turns} turns, fewer than the required {min}")]
    TraceTooShort { n_turns: usize, min: usize },

    #[error("composition after turn {turn} is empty")]
    EmptyComposition { turn: usize },

    #[error("{} trace(s) failed to encode: {}", .0.len(), summarize(.0))]
    Encode(Vec<(String, Error)>),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("no trace found for embedded id {0:?}")]
    MissingTrace(String),

    #[error("nothing to render: {0} is empty")]
    EmptyPlot(&'static str),

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }

    /// Whether the error stems from configuration rather than data.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Param(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

fn summarize(failures: &[(String, Error)]) -> String {
    let mut out = String::new();
    for (i, (id, err)) in failures.iter().enumerate() {
        if i > 0 {
            out.push_str("; ");
        }
        if i == 3 {
            out.push_str(&format!("... and {} more", failures.len() - 3));
            break;
        }
        out.push_str(&format!("{id}: {err}"));
    }
    out
}
