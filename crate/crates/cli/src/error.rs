use std::path::PathBuf;

use exmip_core::iis::IisError;
use exmip_core::problems::LoadError;
use exmip_core::query::{ExplainError, QueryError};
use exmip_core::solver::SolveError;
use thiserror::Error;

/// Process exit codes, one per error class.
pub mod exit {
    pub const OK: i32 = 0;
    pub const INTERNAL: i32 = 1;
    /// Unreadable input file or bad command-line usage.
    pub const USAGE: i32 = 2;
    /// Instance or artifact does not parse.
    pub const PARSE: i32 = 3;
    /// Query JSON or query semantics rejected.
    pub const QUERY: i32 = 4;
    /// The instance itself has no optimal solution.
    pub const NO_OPTIMUM: i32 = 5;
    pub const TIMEOUT: i32 = 6;
    /// `verify-iis` found the stored set is not an IIS.
    pub const NOT_IIS: i32 = 7;
    /// At least one acceptance criterion failed.
    pub const ACCEPTANCE: i32 = 8;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot read {}: {source}", path.display())]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot tell the family of {}; pass --family", .0.display())]
    UnknownFamily(PathBuf),
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("invalid query JSON: {0}")]
    QueryJson(serde_json::Error),
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error("main problem is {0}")]
    NoOptimum(&'static str),
    #[error("time limit reached")]
    Timeout,
    #[error("invalid artifact: {0}")]
    Artifact(String),
    #[error("not an IIS: {0}")]
    NotIis(String),
    #[error("{0} acceptance criteria failed")]
    Acceptance(usize),
    #[error(transparent)]
    Iis(IisError),
    #[error(transparent)]
    Solve(SolveError),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Read { .. } | CliError::UnknownFamily(_) => exit::USAGE,
            CliError::Write { .. } | CliError::Internal(_) => exit::INTERNAL,
            CliError::Load(_) | CliError::Artifact(_) => exit::PARSE,
            CliError::QueryJson(_) | CliError::Query(_) => exit::QUERY,
            CliError::NoOptimum(_) => exit::NO_OPTIMUM,
            CliError::Timeout => exit::TIMEOUT,
            CliError::NotIis(_) => exit::NOT_IIS,
            CliError::Acceptance(_) => exit::ACCEPTANCE,
            CliError::Iis(IisError::OracleTimeout { .. }) => exit::TIMEOUT,
            CliError::Iis(_) => exit::INTERNAL,
            CliError::Solve(SolveError::Timeout | SolveError::TimeLimit { .. }) => exit::TIMEOUT,
            CliError::Solve(_) => exit::INTERNAL,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Timeout | SolveError::TimeLimit { .. } => CliError::Timeout,
            e => CliError::Solve(e),
        }
    }
}

impl From<IisError> for CliError {
    fn from(e: IisError) -> Self {
        match e {
            IisError::OracleTimeout { .. } => CliError::Timeout,
            IisError::Solve(e) => e.into(),
            e => CliError::Iis(e),
        }
    }
}

impl From<ExplainError> for CliError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Query(e) => CliError::Query(e),
            ExplainError::Iis(e) => e.into(),
            ExplainError::Solve(e) => e.into(),
            ExplainError::Timeout => CliError::Timeout,
            ExplainError::Graph(e) => CliError::Internal(e.to_string()),
        }
    }
}
