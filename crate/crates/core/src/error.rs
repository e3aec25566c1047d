use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("format error at row {row}, column {column}: {message}")]
    Format {
        row: usize,
        column: usize,
        message: String,
    },
    #[error("data error for {ticker} on {date}: {message}")]
    Data {
        ticker: String,
        date: String,
        message: String,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("no complete tickers")]
    NoCompleteTickers,
    #[error("zero-variance return series for {ticker}")]
    ZeroVariance { ticker: String },
    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NonSymmetric { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("iteration limit of {iterations} reached (last residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },
    #[error("node {0} missing from partition")]
    MissingNode(String),
    #[error("no influential stocks: the network is empty or its centrality and PageRank leaders do not overlap (try a lower rho_c)")]
    NoInfluentialStocks,
    #[error("smallest selected eigenvalue {selected} is below the Marchenko-Pastur edge {edge}")]
    EigenvalueBelowEdge { selected: f64, edge: f64 },
    #[error("missing community label or clustering value for {0}")]
    MissingLabel(String),
    #[error("path length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("infeasible portfolio: {0}")]
    Infeasible(String),
    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    SolverFailure { iterations: usize, residual: f64 },
    #[error("simulation failed at weights {weights:?}: {source}")]
    Simulation {
        weights: Vec<f64>,
        #[source]
        source: Box<Error>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
