//! Question in, exchange out: translate, validate, lint and, when the
//! guardrail allows it, execute against a store snapshot.

use std::sync::Arc;
use std::time::Instant;

use peripartum_core::{CanonicalStore, Catalog};
use peripartum_sql::ast::Statement;
use peripartum_sql::exec::{execute, ResultTable};
use peripartum_sql::guardrail::{check_script, Limits, Verdict};
use peripartum_sql::lint::{lint, LintFinding};
use peripartum_sql::parse_statements;
use peripartum_sql::resolve::resolve;
use serde::Serialize;

use crate::extract::extract_sql;
use crate::model::{Model, TranslateError};
use crate::prompt::{build_context_prompt, ContextPrompt, PromptOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExchangeStage {
    Translate,
    Parse,
    Guardrail,
    Resolve,
    Execute,
}

/// Outcome of one static stage; `None` in [`Verdicts`] means not reached.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageResult {
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<serde_json::Value>,
}

impl StageResult {
    fn pass() -> Self {
        StageResult { ok: true, error: None }
    }

    fn fail(detail: impl Serialize) -> Self {
        StageResult { ok: false, error: Some(serde_json::to_value(detail).unwrap_or_default()) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Verdicts {
    pub parse: Option<StageResult>,
    pub guardrail: Option<Verdict>,
    pub resolve: Option<StageResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExchangeError {
    pub stage: ExchangeStage,
    pub message: String,
    pub detail: serde_json::Value,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Timing {
    pub translate_ms: f64,
    pub validate_ms: f64,
    pub execute_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChatExchange {
    pub question: String,
    pub raw_reply: Option<String>,
    pub sql: Option<String>,
    /// Canonical rendering of the statement once it parsed as a query.
    pub canonical_sql: Option<String>,
    /// The statement was supplied by the user rather than the model.
    pub edited: bool,
    pub verdicts: Verdicts,
    pub lints: Vec<LintFinding>,
    pub result: Option<ResultTable>,
    pub error: Option<ExchangeError>,
    pub timing: Timing,
}

impl ChatExchange {
    fn new(question: &str) -> Self {
        ChatExchange {
            question: question.to_string(),
            raw_reply: None,
            sql: None,
            canonical_sql: None,
            edited: false,
            verdicts: Verdicts::default(),
            lints: Vec::new(),
            result: None,
            error: None,
            timing: Timing::default(),
        }
    }

    fn fail(&mut self, stage: ExchangeStage, message: impl Into<String>, detail: impl Serialize) {
        self.error = Some(ExchangeError {
            stage,
            message: message.into(),
            detail: serde_json::to_value(detail).unwrap_or_default(),
        });
    }

    /// Same exchange with timings zeroed, for comparisons.
    pub fn without_timing(&self) -> Self {
        ChatExchange { timing: Timing::default(), ..self.clone() }
    }

    pub fn flagged(&self, code: &str) -> bool {
        self.lints.iter().any(|l| l.rule.code() == code)
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1000.0
}

/// A conversation bound to one store snapshot and one model.
#[derive(Clone)]
pub struct Session {
    catalog: Arc<Catalog>,
    store: CanonicalStore,
    model: Arc<dyn Model>,
    prompt: ContextPrompt,
    limits: Limits,
}

impl Session {
    pub fn new(
        catalog: Arc<Catalog>,
        store: CanonicalStore,
        model: Arc<dyn Model>,
        options: &PromptOptions,
        limits: Limits,
    ) -> Self {
        let prompt = build_context_prompt(&catalog, options);
        Session { catalog, store, model, prompt, limits }
    }

    pub fn prompt(&self) -> &ContextPrompt {
        &self.prompt
    }

    pub fn store(&self) -> &CanonicalStore {
        &self.store
    }

    /// Raw reply and the extracted statement.
    pub fn translate(&self, question: &str) -> (Option<String>, Result<String, TranslateError>) {
        match self.model.complete(&self.prompt.rendered, question) {
            Ok(reply) => {
                let sql = extract_sql(&reply).ok_or(TranslateError::NoSql);
                (Some(reply), sql)
            }
            Err(e) => (None, Err(e)),
        }
    }

    pub fn answer(&self, question: &str) -> ChatExchange {
        let start = Instant::now();
        let mut ex = ChatExchange::new(question);
        let (reply, sql) = self.translate(question);
        ex.raw_reply = reply;
        ex.timing.translate_ms = ms(start);
        match sql {
            Ok(sql) => self.check_and_run(&mut ex, sql),
            Err(e) => ex.fail(ExchangeStage::Translate, e.to_string(), &e),
        }
        ex.timing.total_ms = ms(start);
        ex
    }

    /// Runs a user-edited statement through the same stages.
    pub fn run_edited(&self, question: &str, sql: &str) -> ChatExchange {
        let start = Instant::now();
        let mut ex = ChatExchange::new(question);
        ex.edited = true;
        self.check_and_run(&mut ex, sql.to_string());
        ex.timing.total_ms = ms(start);
        ex
    }

    fn check_and_run(&self, ex: &mut ChatExchange, sql: String) {
        let validate_start = Instant::now();
        ex.sql = Some(sql.clone());
        let script = match parse_statements(&sql) {
            Ok(s) => {
                ex.verdicts.parse = Some(StageResult::pass());
                s
            }
            Err(e) => {
                ex.verdicts.parse = Some(StageResult::fail(&e));
                ex.fail(ExchangeStage::Parse, format!("syntax error at {}:{}: {}", e.line, e.column, e.message), &e);
                return;
            }
        };
        let verdict = check_script(&script, self.limits);
        ex.verdicts.guardrail = Some(verdict.clone());
        let query = match script.statements.as_slice() {
            [Statement::Query(q)] if verdict.accepted => q,
            _ => {
                ex.fail(ExchangeStage::Guardrail, format!("rejected: {}", verdict.reasons.join("; ")), &verdict);
                return;
            }
        };
        ex.canonical_sql = Some(query.to_string());
        let plan = match resolve(query, &self.catalog) {
            Ok(p) => {
                ex.verdicts.resolve = Some(StageResult::pass());
                p
            }
            Err(e) => {
                ex.verdicts.resolve = Some(StageResult::fail(&e));
                ex.fail(ExchangeStage::Resolve, e.message.clone(), &e);
                return;
            }
        };
        // Lint findings annotate; they never block.
        ex.lints = lint(&plan, &self.catalog);
        ex.timing.validate_ms = ms(validate_start);

        let exec_start = Instant::now();
        let cap = verdict.row_limit_applied.then_some(self.limits.max_rows);
        match execute(&plan, &self.store, cap) {
            Ok(table) => ex.result = Some(table),
            Err(e) => ex.fail(ExchangeStage::Execute, e.to_string(), &e),
        }
        ex.timing.execute_ms = ms(exec_start);
    }
}
