//! Canonical peripartum store: record model, schema catalog, integrity rules,
//! journaled persistence, legacy ingestion and synthetic data.

pub mod catalog;
pub mod constraint;
pub mod ingest;
pub mod journal;
pub mod model;
pub mod sample;
pub mod store;
pub mod synth;
pub mod time;
pub mod validate;
pub mod value;

pub use catalog::{build_catalog, emit_ddl, Catalog};
pub use constraint::{apply_transaction, check_rule, diff, full_scan, Op, RuleId, Scope, Transaction, TxError, Violation};
pub use store::{CanonicalStore, Record, RecordKey};
pub use time::Timestamp;
pub use value::Value;
