use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("parse error at byte {pos}: {kind}")]
pub struct ParseError {
    pub pos: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("{0}")]
    Syntax(String),
    #[error("unknown identifier {0:?}")]
    UnknownIdentifier(String),
    #[error("{name} takes {expected} argument(s), got {found}")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
}

impl ParseError {
    pub fn new(pos: usize, kind: ParseErrorKind) -> Self {
        ParseError { pos, kind }
    }

    pub fn syntax(pos: usize, msg: impl Into<String>) -> Self {
        ParseError::new(pos, ParseErrorKind::Syntax(msg.into()))
    }

    pub fn arity(pos: usize, name: &str, expected: usize, found: usize) -> Self {
        ParseError::new(
            pos,
            ParseErrorKind::Arity {
                name: name.to_string(),
                expected,
                found,
            },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SubstError {
    #[error("cannot bind {0:?}: it is a bound name in the expression")]
    BoundName(String),
    #[error("function binding for {name} has {expected} parameter(s) but is applied to {found} argument(s)")]
    Arity {
        name: String,
        expected: usize,
        found: usize,
    },
}

/// Failures of numeric evaluation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("quadrature did not converge on [{a}, {b}] (error estimate {error:e})")]
    QuadratureNonconvergence { a: f64, b: f64, error: f64 },
    #[error("no root found near seed {seed}")]
    RootNotFound { seed: f64 },
    #[error("degenerate root at {z}: defining derivative {slope:e}")]
    DegenerateRoot { z: f64, slope: f64 },
    #[error("integral nesting exceeds limit {0}")]
    NestLimitExceeded(usize),
    #[error("unbound name {0:?}")]
    Unbound(String),
    #[error("{0}")]
    Invalid(String),
}

impl EvalError {
    pub fn is_domain(&self) -> bool {
        matches!(self, EvalError::Domain(_))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CatalogError {
    #[error("unknown family id {0:?}")]
    UnknownFamily(String),
    #[error("catalog record {id}: field {field}: {source}")]
    Parse {
        id: String,
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("catalog format error near line {line}: {msg}")]
    Format { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("family {family}: no admissible scenario after {attempts} attempts (last rejection: {last})")]
    Exhausted {
        family: String,
        attempts: usize,
        last: String,
    },
}
