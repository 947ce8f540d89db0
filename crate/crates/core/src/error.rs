use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Every variant carries the `module::operation` that raised it so that
/// front ends can report where a sweep failed.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("{op}: domain error: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("{op}: overflow: {msg}")]
    Overflow { op: &'static str, msg: String },

    #[error("{op}: accuracy target not met (best estimate {estimate:e}, error bound {error:e})")]
    Accuracy {
        op: &'static str,
        estimate: f64,
        error: f64,
    },

    #[error("{op}: does not converge ({msg}); last estimate {estimate:e}")]
    Divergence {
        op: &'static str,
        msg: String,
        estimate: f64,
    },

    #[error("{op}: kernel is singular on the diagonal x = y")]
    Singular { op: &'static str },

    #[error("{op}: usage error: {msg}")]
    Usage { op: &'static str, msg: String },

    #[error("{op}: unsupported: {msg}")]
    Capability { op: &'static str, msg: String },

    #[error("{op}: invalid covering: {msg}")]
    Covering { op: &'static str, msg: String },
}

impl Error {
    pub fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub fn usage(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Usage {
            op,
            msg: msg.into(),
        }
    }

    pub fn capability(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Capability {
            op,
            msg: msg.into(),
        }
    }

    pub fn covering(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Covering {
            op,
            msg: msg.into(),
        }
    }

    /// The `module::operation` tag of the failing call.
    pub fn operation(&self) -> &'static str {
        match self {
            Error::Domain { op, .. }
            | Error::Overflow { op, .. }
            | Error::Accuracy { op, .. }
            | Error::Divergence { op, .. }
            | Error::Singular { op }
            | Error::Usage { op, .. }
            | Error::Capability { op, .. }
            | Error::Covering { op, .. } => op,
        }
    }

    /// True for failures of a numerical target (as opposed to bad input).
    pub fn is_accuracy(&self) -> bool {
        matches!(self, Error::Accuracy { .. } | Error::Divergence { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
