//! Error types for each pipeline stage, plus a unified error for callers
//! that drive the whole pipeline.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("line {line}, col {col}: expected {expected}, found `{found}`")]
    Syntax { line: u32, col: u32, expected: String, found: String },
    #[error("line {line}, col {col}: {msg}")]
    Invalid { line: u32, col: u32, msg: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LowerError {
    #[error("unbound variable `{0}`")]
    UnboundVariable(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TypeError {
    #[error("type mismatch at {path}: {msg}")]
    Mismatch { path: String, msg: String },
    #[error("unknown global `{0}`")]
    UnknownGlobal(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("type mismatch: {0}")]
    TypeMismatch(String),
    #[error("lookup applied to a scalar")]
    LookupOnScalar,
    #[error("buffer access out of bounds: {0}")]
    BufferOverrun(String),
    #[error("unknown global `{0}`")]
    UnknownGlobal(String),
    #[error("expression is not closed: dangling variable %{0}")]
    DanglingVariable(u32),
    #[error("negative or non-integer operand: {0}")]
    BadOperand(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StorageError {
    #[error("parse error in {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unsupported order {order} for format {format}")]
    UnsupportedOrder { format: String, order: usize },
    #[error("tensor `{0}` is not defined in the catalog")]
    MissingTensor(String),
    #[error("cyclic storage mapping involving `{0}`")]
    CyclicMapping(String),
    #[error("duplicate name `{0}` in catalog")]
    DuplicateName(String),
    #[error("buffer `{name}` has size {actual}, declared {declared}")]
    SizeMismatch { name: String, declared: usize, actual: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OptError {
    #[error("extraction failed: every plan in the root class has infinite cost")]
    ExtractionFailed,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("plan still contains a logical dictionary: {0}")]
    LoweringError(String),
    #[error("runtime bounds error: {0}")]
    RuntimeBoundsError(String),
    #[error("merge input stream is not sorted ascending by value")]
    MergeNotSorted,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Pipeline-level error; the CLI maps these onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Opt(#[from] OptError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("{0}")]
    Io(String),
}

impl Error {
    /// Exit code classes: 2 parse/type, 3 optimization, 4 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse(_) | Error::Lower(_) | Error::Type(_) => 2,
            Error::Storage(_) => 2,
            Error::Opt(_) => 3,
            Error::Eval(_) | Error::Engine(_) => 4,
            Error::Io(_) => 1,
        }
    }
}
