//! Exit-code taxonomy. Shell pipelines branch on these, so they are fixed:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | any other failure (model endpoint, query execution) |
//! | 2 | SQL syntax error |
//! | 3 | SQL resolution error (unknown table, column, ambiguity) |
//! | 4 | rejected by the guardrail |
//! | 5 | integrity violation or quarantined rows under `--strict` |
//! | 6 | file or journal I/O |
//! | 64 | bad command-line usage |

use std::fmt;

use peripartum_core::journal::JournalError;
use peripartum_sql::pipeline::{PipelineError, Stage};
use peripartum_sql::stored::StoredError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Class {
    Other = 1,
    Parse = 2,
    Resolve = 3,
    Guardrail = 4,
    Constraint = 5,
    Io = 6,
    Usage = 64,
}

impl Class {
    pub fn of_stage(stage: Stage) -> Class {
        match stage {
            Stage::Parse => Class::Parse,
            Stage::Resolve => Class::Resolve,
            Stage::Guardrail => Class::Guardrail,
            Stage::Execute => Class::Other,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

/// An error carrying its exit class.
#[derive(Debug)]
pub struct Classified {
    pub class: Class,
    pub message: String,
}

impl fmt::Display for Classified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Classified {}

pub fn fail(class: Class, message: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Classified { class, message: message.into() })
}

/// Exit status already reported on stdout; nothing more to print.
pub fn quiet(class: Class) -> anyhow::Error {
    fail(class, "")
}

pub fn pipeline(e: PipelineError) -> anyhow::Error {
    fail(Class::of_stage(e.stage()), e.to_string())
}

pub fn stored(e: StoredError) -> anyhow::Error {
    match e {
        StoredError::Pipeline(p) => pipeline(p),
        other => fail(Class::Usage, other.to_string()),
    }
}

pub fn classify(err: &anyhow::Error) -> Class {
    if let Some(c) = err.downcast_ref::<Classified>() {
        return c.class;
    }
    for cause in err.chain() {
        if cause.is::<std::io::Error>() || cause.is::<JournalError>() {
            return Class::Io;
        }
    }
    Class::Other
}
