//! SQL front end and executor over the canonical store.
//!
//! Text goes through [`parse_sql`], the statement and depth guardrails, name
//! resolution and the lints before [`execute`] runs it against a
//! [`CanonicalStore`](peripartum_core::CanonicalStore).

pub mod ast;
pub mod lexer;
pub mod parser;
mod printer;

pub use lexer::SyntaxError;
pub use parser::{parse_sql, parse_statements};
pub mod ddl;
pub mod plan;
pub mod resolve;
pub mod guardrail;
pub mod lint;
pub mod corpus;
pub mod exec;
pub mod pipeline;
pub mod stored;
pub use pipeline::{run, validate, PipelineError, Stage, Validated};
