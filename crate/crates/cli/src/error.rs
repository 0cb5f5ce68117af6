use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("solver error: {0}")]
    Solver(#[from] hermitian_ma::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } | CliError::Solver(_) => 1,
        }
    }

    /// Reclassifies construction-time library errors (bad grid sizes, bad
    /// metrics, unsupported shapes) as configuration errors.
    pub fn from_setup(e: hermitian_ma::Error) -> Self {
        use hermitian_ma::Error as E;
        match e {
            E::Config(m) | E::Unsupported(m) => CliError::Config(m),
            E::InvalidMetric { node, lambda_min } => {
                CliError::Config(format!("metric is not positive definite at node {node} (λ_min = {lambda_min:e})"))
            }
            E::Generation { node, reason } => CliError::Config(format!("cannot manufacture data at node {node}: {reason}")),
            other => CliError::Solver(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
