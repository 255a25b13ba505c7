use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("{what} did not converge: {detail}")]
    Convergence { what: &'static str, detail: String },

    #[error("rank-deficient jacobian in {what}: numerical rank {rank} of {expected} identifiable directions")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        expected: usize,
    },

    #[error("integrator failure at tau = {tau_us} us: {reason}")]
    Integrator { tau_us: f64, reason: String },

    #[error("density-matrix invariant violated at tau = {tau_us} us: {detail}")]
    Invariant { tau_us: f64, detail: String },

    #[error("simulation failed at f = {freq_ghz} GHz, z = {z_um} um: {source}")]
    Simulation {
        freq_ghz: f64,
        z_um: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("missing coefficient `{0}`")]
    MissingCoefficient(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, msg: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            msg: msg.to_string(),
        }
    }

    /// Process exit code used by the CLI: 2 validation, 3 convergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::MissingCoefficient(_) => 2,
            Error::Convergence { .. }
            | Error::RankDeficient { .. }
            | Error::Integrator { .. }
            | Error::Invariant { .. } => 3,
            Error::Simulation { source, .. } => source.exit_code(),
            Error::Parse { .. } => 2,
            Error::Io { .. } => 4,
        }
    }
}
