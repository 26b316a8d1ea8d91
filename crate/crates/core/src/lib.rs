//! A tensor-program calculus over semiring dictionaries.
//!
//! The pipeline: parse tensor programs and storage mappings written in a
//! common declarative language, compose them into a naive plan, optimize
//! with equality saturation under a cardinality-driven cost model, and
//! execute the extracted physical plan over arrays, hash maps, and tries.

pub mod costing;
pub mod engine;
pub mod error;
pub mod expr;
pub mod interp;
pub mod optimizer;
pub mod parser;
pub mod storage;
pub mod types;
pub mod value;

pub use error::Error;
pub use expr::{CmpOp, Expr, KeyAttr, StorageAttr, UnaryOp};
pub use types::{typecheck, SdqType, TypeEnv};
pub use value::Value;
