use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A document failed to parse or validate. `path` is a dotted field path
    /// such as `units[3].gmacs` or `learner.mu`.
    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("no partition points: descriptor `{0}` has an empty unit list")]
    NoPartitionPoints(String),

    #[error("partition index {p} out of range 0..={max}")]
    PartitionOutOfRange { p: usize, max: usize },

    #[error("frame dimensions differ: {a:?} vs {b:?}")]
    DimensionMismatch { a: (usize, usize), b: (usize, usize) },

    /// The ridge accumulator could not be factorized. Only happens when
    /// non-finite values reached the learner.
    #[error("learner state is corrupted: {0}")]
    CorruptState(String),

    #[error("update for on-device partition {0} must not carry a delay observation")]
    UnexpectedObservation(usize),

    #[error("update for partition {0} is missing its delay observation")]
    MissingObservation(usize),

    #[error("{0}")]
    Invalid(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Deserializes JSON, reporting failures with the dotted path of the
/// offending field. Missing fields are reported at the field itself rather
/// than at its parent object.
pub(crate) fn from_json_str<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|err| {
        let mut path = err.path().to_string();
        let message = err.inner().to_string();
        if let Some(field) = missing_field_name(&message) {
            path = if path == "." {
                field.to_string()
            } else {
                format!("{path}.{field}")
            };
        }
        Error::schema(path, message)
    })
}

fn missing_field_name(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("missing field `")?;
    rest.split('`').next()
}
