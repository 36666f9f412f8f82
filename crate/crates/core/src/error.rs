use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("drive parameter must be non-negative, got xi = {0}")]
    NegativeDrive(f64),

    #[error("root solver did not reach tolerance (residual {residual:e})")]
    SolverTolerance { residual: f64 },

    #[error("dimension mismatch for `{what}`: expected {expected}, got {got}")]
    DimensionMismatch { what: &'static str, expected: usize, got: usize },

    #[error("eigenvalue solver failed to converge")]
    EigenSolverFailure,

    #[error("singular value decomposition failed to converge")]
    SvdFailure,

    #[error("matrix (omega - H) is singular at omega = {omega}")]
    SingularMatrix { omega: f64 },

    #[error("localization fit needs at least 3 sites, got {0}")]
    DegenerateFit(usize),

    #[error("no topological zero mode at omega = {omega} (E0/J = {e0_over_j:.4e})")]
    NotTopological { omega: f64, e0_over_j: f64 },

    #[error("noise integral did not converge: {0}")]
    IntegrationNotConverged(String),

    #[error("every disorder realization was unstable")]
    AllUnstable,

    #[error("no instability onset within the sigma schedule")]
    NoOnset,

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },

    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("dataset schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("unsupported dataset schema for plot kind `{kind}`: {reason}")]
    UnsupportedSchema { kind: String, reason: String },

    #[error("refusing to overwrite existing file {0} (use --force)")]
    WouldOverwrite(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
