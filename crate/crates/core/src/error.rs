use std::path::PathBuf;

use crate::mdp::{StateId, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("malformed MDP: {0}")]
    Shape(String),

    #[error("MDP failed validation: {}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error("cannot step from goal state {0}")]
    SteppedFromGoal(StateId),

    #[error("initial distribution has no mass outside goal state {0}")]
    NoInitialMass(StateId),

    #[error("state {state} out of range (n_states = {n_states})")]
    StateOutOfRange { state: usize, n_states: usize },

    #[error("value iteration for target {target} did not converge within {sweeps} sweeps (residual {residual:e})")]
    NotConverged {
        target: StateId,
        sweeps: usize,
        residual: f64,
    },

    #[error("state {to} is unreachable from state {from}")]
    Unreachable { from: StateId, to: StateId },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("cover metric is {actual:?}, operation requires {expected:?}")]
    MetricMismatch {
        expected: crate::cover::MetricKind,
        actual: crate::cover::MetricKind,
    },

    #[error("goal {0} has no witness landmark; cover is corrupted")]
    NoWitness(StateId),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

fn format_violations(v: &[Violation]) -> String {
    let shown: Vec<String> = v.iter().take(5).map(|x| x.to_string()).collect();
    if v.len() > 5 {
        format!("{} (and {} more)", shown.join("; "), v.len() - 5)
    } else {
        shown.join("; ")
    }
}
