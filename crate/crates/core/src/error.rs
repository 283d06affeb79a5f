use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("fixed-effect design is rank deficient: rank {rank} < p = {p}")]
    RankDeficient { rank: usize, p: usize },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("division by zero: {0}")]
    DivisionByZero(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular log-linear transform: {0}")]
    SingularTransform(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("mode search failure: {0}")]
    ModeSearchFailure(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("order error: {0}")]
    Order(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Numerical(_)
            | Error::SingularTransform(_)
            | Error::QuadratureFailure(_)
            | Error::ModeSearchFailure(_) => 3,
            _ => 2,
        }
    }

    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        self.exit_code() == 3
    }
}
