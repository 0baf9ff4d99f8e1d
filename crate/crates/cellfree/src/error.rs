//! Error type shared across the crate.
//!
//! Numerical routines that can fail (fixed points, factorizations, feasibility
//! searches) return `Result<_, Error>` with enough context to locate the
//! failing unit of work; plain math helpers with checked preconditions panic
//! on programmer error instead.

use thiserror::Error;

#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A configuration field failed validation.
    #[error("invalid config: {field}: {message}")]
    InvalidConfig { field: String, message: String },

    /// An iterative solver ran out of iterations.
    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    /// A matrix expected to be positive definite was not (within roundoff).
    #[error("{what}: matrix not positive definite at pivot {pivot}")]
    NotPositiveDefinite { what: String, pivot: usize },

    /// A linear system was singular to working precision.
    #[error("{what}: singular linear system")]
    Singular { what: String },

    /// Rejection sampling of the pilot assignment exceeded its retry budget.
    #[error(
        "pilot assignment: no draw with all {tau} groups non-empty in {attempts} attempts \
         (K = {k}; the conditioned distribution is effectively unreachable by rejection)"
    )]
    PilotAssignmentUnreachable { k: usize, tau: usize, attempts: usize },

    /// A closed-form SINR denominator lost positivity to roundoff.
    #[error("{what}: nonpositive SINR denominator ({value:.3e}); numerical breakdown")]
    NumericalBreakdown { what: String, value: f64 },

    /// An empty sample pool cannot be summarized.
    #[error("empty sample pool")]
    EmptySamplePool,

    /// A failure inside the experiment loop, tagged with its work-unit coordinates.
    #[error("snapshot {snapshot}, user {user}: {source}")]
    AtCoordinates {
        snapshot: usize,
        user: usize,
        #[source]
        source: Box<Error>,
    },

    /// A failure scoped to a whole snapshot (setup or work shared across users).
    #[error("snapshot {snapshot}: {source}")]
    AtSnapshot {
        snapshot: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Tag an error with the (snapshot, user) coordinates it occurred at.
    pub fn at(self, snapshot: usize, user: usize) -> Error {
        Error::AtCoordinates {
            snapshot,
            user,
            source: Box::new(self),
        }
    }

    /// Tag an error with the snapshot it occurred in.
    pub fn at_snapshot(self, snapshot: usize) -> Error {
        Error::AtSnapshot {
            snapshot,
            source: Box::new(self),
        }
    }

    pub fn invalid_config(field: &str, message: impl Into<String>) -> Error {
        Error::InvalidConfig {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
