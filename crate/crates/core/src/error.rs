use thiserror::Error;

/// Errors raised by the analysis pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed date {value:?}")]
    MalformedDate { line: usize, value: String },

    #[error("line {line}, column {column}: value outside [0,1] ({value})")]
    ValueOutOfRange {
        line: usize,
        column: String,
        value: f64,
    },

    #[error("line {line}, column {column}: unparseable value {value:?}")]
    MalformedValue {
        line: usize,
        column: String,
        value: String,
    },

    #[error("duplicate ticker {0:?}")]
    DuplicateTicker(String),

    #[error("dates not strictly increasing at line {line} ({date})")]
    UnorderedDates { line: usize, date: String },

    #[error("panel needs at least {needed} usable {what}, found {found}")]
    TooSmall {
        what: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("empty period {0:?}: no rows fall inside it")]
    EmptyPeriod(String),

    #[error("invalid period list: {0}")]
    InvalidPeriods(String),

    #[error("ticker {0:?} has no country mapping")]
    UnmappedTicker(String),

    #[error(
        "non-positive PD at row {row}, column {column}; enable the PD floor to log-transform zeros"
    )]
    NonPositivePd { row: usize, column: String },

    #[error("column {column} is constant; correlation undefined")]
    ConstantColumn { column: usize },

    #[error("correlation matrix is singular; retry with a positive ridge")]
    SingularMatrix,

    #[error("non-positive degrees of freedom ({df}) for significance test: need n_obs > N")]
    NonPositiveDf { df: i64 },

    #[error("significance mask not set on partial correlation matrix")]
    MaskUnset,

    #[error("threshold out of (0,1): {0}")]
    InvalidThreshold(f64),

    #[error("PD of 1 for {node} combined with negative partial correlation makes CoRisk infinite")]
    InfiniteCoRisk { node: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("no feasible root: nodes {unreachable:?} unreachable from every candidate")]
    NoFeasibleRoot { unreachable: Vec<String> },

    #[error("graph has a cycle: {cycle:?}")]
    Cycle { cycle: Vec<String> },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("non-finite objective at sweep {sweep}, node {node}, period {period}: {value}")]
    NonFiniteObjective {
        sweep: usize,
        node: usize,
        period: usize,
        value: f64,
    },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("degenerate differences: {0}")]
    Degenerate(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics themselves, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularMatrix
                | Error::NonFiniteObjective { .. }
                | Error::Degenerate(_)
                | Error::InfiniteCoRisk { .. }
                | Error::ConstantColumn { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
