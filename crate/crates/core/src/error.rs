use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// Syntax errors: query grammar or JSON document shape.
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("head collapse: {0}")]
    HeadCollapse(String),

    #[error("invalid query: {0}")]
    InvalidQuery(String),

    #[error("unsafe constraint: {0}")]
    UnsafeConstraint(String),

    #[error("incomparable queries: {0}")]
    Incomparable(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown peer `{0}`")]
    UnknownPeer(String),

    #[error("no interface declared from `{from}` to `{to}`")]
    UndeclaredInterface { from: String, to: String },

    #[error("malformed mapping: {0}")]
    MalformedMapping(String),

    #[error("query/schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("fixpoint ceiling exceeded after {0} steps")]
    FixpointCeiling(usize),

    #[error("closure ceiling exceeded after {0} nodes")]
    ClosureCeiling(usize),

    #[error("join annotation mismatch: {0}")]
    JoinAnnotation(String),
}

impl Error {
    pub fn is_parse(&self) -> bool {
        matches!(self, Error::Parse { .. })
    }
}
