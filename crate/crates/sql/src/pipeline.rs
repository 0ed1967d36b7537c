//! Parse, guard, resolve, lint and execute in one call, with every failure
//! tagged by the stage that produced it.

use peripartum_core::{Catalog, CanonicalStore};
use serde::Serialize;

use crate::exec::{execute, ExecError, ResultTable};
use crate::guardrail::{check_script, Limits, Verdict};
use crate::lexer::SyntaxError;
use crate::lint::{lint, LintFinding};
use crate::parser::parse_statements;
use crate::resolve::{resolve, ResolveError, ResolvedPlan};
use crate::ast::Statement;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Parse,
    Guardrail,
    Resolve,
    Execute,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Parse => "parse",
            Stage::Guardrail => "guardrail",
            Stage::Resolve => "resolve",
            Stage::Execute => "execute",
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum PipelineError {
    #[error("syntax error at {}:{}: {}", .0.line, .0.column, .0.message)]
    Syntax(SyntaxError),
    #[error("rejected by guardrail: {}", .0.reasons.join("; "))]
    Guardrail(Verdict),
    #[error("{}", .0.message)]
    Resolve(ResolveError),
    #[error("{0}")]
    Execute(ExecError),
}

impl PipelineError {
    pub fn stage(&self) -> Stage {
        match self {
            PipelineError::Syntax(_) => Stage::Parse,
            PipelineError::Guardrail(_) => Stage::Guardrail,
            PipelineError::Resolve(_) => Stage::Resolve,
            PipelineError::Execute(_) => Stage::Execute,
        }
    }

    /// Stage-specific payload as JSON.
    pub fn detail(&self) -> serde_json::Value {
        let v = match self {
            PipelineError::Syntax(e) => serde_json::to_value(e),
            PipelineError::Guardrail(v) => serde_json::to_value(v),
            PipelineError::Resolve(e) => serde_json::to_value(e),
            PipelineError::Execute(e) => serde_json::to_value(e),
        };
        v.unwrap_or(serde_json::Value::Null)
    }
}

/// A query that passed every static stage.
#[derive(Debug, Clone)]
pub struct Validated {
    /// Canonical single-line rendering of the query.
    pub canonical: String,
    pub verdict: Verdict,
    pub plan: ResolvedPlan,
    pub lints: Vec<LintFinding>,
}

pub fn validate(sql: &str, catalog: &Catalog, limits: Limits) -> Result<Validated, PipelineError> {
    let script = parse_statements(sql).map_err(PipelineError::Syntax)?;
    let verdict = check_script(&script, limits);
    if !verdict.accepted {
        return Err(PipelineError::Guardrail(verdict));
    }
    let Some(Statement::Query(query)) = script.statements.first() else {
        return Err(PipelineError::Guardrail(verdict));
    };
    let plan = resolve(query, catalog).map_err(PipelineError::Resolve)?;
    let lints = lint(&plan, catalog);
    Ok(Validated { canonical: query.to_string(), verdict, plan, lints })
}

/// Outcome of one static stage.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageOutcome {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportError {
    pub stage: Stage,
    pub message: String,
}

/// Verdicts of every static stage reached, for display. `None` marks a
/// stage that was never reached.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub ok: bool,
    pub stage: Option<Stage>,
    pub canonical_sql: Option<String>,
    pub parse: Option<StageOutcome>,
    pub guardrail: Option<Verdict>,
    pub resolve: Option<StageOutcome>,
    pub lints: Vec<LintFinding>,
    pub error: Option<ReportError>,
}

impl CheckReport {
    fn failed(mut self, e: &PipelineError) -> Self {
        self.stage = Some(e.stage());
        self.error = Some(ReportError { stage: e.stage(), message: e.to_string() });
        self
    }
}

/// Like [`validate`] but keeps going as far as it can and records each
/// stage's verdict instead of stopping at the first error.
pub fn check(sql: &str, catalog: &Catalog, limits: Limits) -> CheckReport {
    let mut report = CheckReport {
        ok: false,
        stage: None,
        canonical_sql: None,
        parse: None,
        guardrail: None,
        resolve: None,
        lints: Vec::new(),
        error: None,
    };
    let failed = |detail: serde_json::Value| StageOutcome { ok: false, error: Some(detail) };
    let passed = StageOutcome { ok: true, error: None };
    let script = match parse_statements(sql) {
        Ok(s) => s,
        Err(e) => {
            let e = PipelineError::Syntax(e);
            report.parse = Some(failed(e.detail()));
            return report.failed(&e);
        }
    };
    report.parse = Some(passed.clone());
    let verdict = check_script(&script, limits);
    report.guardrail = Some(verdict.clone());
    let query = match script.statements.as_slice() {
        [Statement::Query(q)] if verdict.accepted => q,
        _ => return report.failed(&PipelineError::Guardrail(verdict)),
    };
    report.canonical_sql = Some(query.to_string());
    match resolve(query, catalog) {
        Ok(plan) => {
            report.resolve = Some(passed);
            report.lints = lint(&plan, catalog);
            report.ok = true;
            report
        }
        Err(e) => {
            let e = PipelineError::Resolve(e);
            report.resolve = Some(failed(e.detail()));
            report.failed(&e)
        }
    }
}

pub fn run(
    sql: &str,
    catalog: &Catalog,
    store: &CanonicalStore,
    limits: Limits,
) -> Result<(Validated, ResultTable), PipelineError> {
    let validated = validate(sql, catalog, limits)?;
    let cap = validated.verdict.row_limit_applied.then_some(limits.max_rows);
    let table = execute(&validated.plan, store, cap).map_err(PipelineError::Execute)?;
    Ok((validated, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use peripartum_core::build_catalog;

    #[test]
    fn stages_are_tagged() {
        let cat = build_catalog();
        let stage = |sql: &str| validate(sql, &cat, Limits::default()).unwrap_err().stage();
        assert_eq!(stage("SELEC 1"), Stage::Parse);
        assert_eq!(stage("DROP TABLE patient"), Stage::Guardrail);
        assert_eq!(stage("SELECT nope FROM patient"), Stage::Resolve);
    }

    #[test]
    fn row_cap_truncates() {
        let cat = build_catalog();
        let store = peripartum_core::sample::sample_store();
        let limits = Limits { max_rows: 1, max_depth: 3 };
        let (_, t) = run("SELECT tc FROM patient", &cat, &store, limits).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.truncated || store.patients().len() <= 1);
    }

    #[test]
    fn check_records_each_stage() {
        let cat = build_catalog();
        let r = check("DELETE FROM patient", &cat, Limits::default());
        assert_eq!((r.ok, r.stage), (false, Some(Stage::Guardrail)));
        assert!(r.parse.unwrap().ok && r.resolve.is_none());

        let r = check("SELECT nope FROM patient", &cat, Limits::default());
        assert_eq!(r.stage, Some(Stage::Resolve));
        assert!(!r.resolve.unwrap().ok);

        let r = check("SELECT name FROM patient", &cat, Limits::default());
        assert!(r.ok && r.error.is_none());
        assert_eq!(r.canonical_sql.as_deref(), Some("SELECT name FROM patient"));
    }
}
