//! Route table and handlers.

use std::collections::BTreeMap;

use axum::body::Bytes;
use axum::extract::{Path, Query, Request, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use peripartum_core::ingest::{run_ingestion, IngestionReport, SourceConfig, SourceKind};
use peripartum_core::journal::CommitError;
use peripartum_core::{diff, emit_ddl};
use peripartum_nl2sql::{build_context_prompt, PromptOptions, Session};
use peripartum_sql::{pipeline, stored};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ApiError;
use crate::export::export_sql;
use crate::AppState;

const SEQ_HEADER: &str = "x-journal-seq";

pub fn router(state: AppState) -> Router {
    let guarded = Router::new()
        .route("/chat", post(chat))
        .route("/sql/validate", post(validate_sql))
        .route("/sql/execute", post(execute_sql))
        .route("/schema/ddl", get(schema_ddl))
        .route("/queries", get(list_queries))
        .route("/queries/{name}", post(run_query))
        .route("/ingest", post(ingest))
        .route("/export/sql", get(export))
        .route("/prompt", get(prompt))
        .route_layer(middleware::from_fn_with_state(state.clone(), require_token));
    Router::new().route("/health", get(health)).merge(guarded).with_state(state)
}

async fn require_token(State(state): State<AppState>, req: Request, next: Next) -> Response {
    if let Some(token) = &state.0.api_token {
        let presented = req
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if presented != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "auth", "missing or wrong bearer token").into_response();
        }
    }
    next.run(req).await
}

/// JSON body parsing with stage-tagged errors instead of axum's plain text.
fn body<T: DeserializeOwned>(bytes: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::bad_request("request", format!("invalid JSON body: {e}")))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> T + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(format!("worker failed: {e}")))
}

fn seq_header(seq: u64) -> HeaderMap {
    let mut h = HeaderMap::new();
    h.insert(SEQ_HEADER, HeaderValue::from(seq));
    h
}

async fn health(State(state): State<AppState>) -> Json<Value> {
    Json(json!({"status": "ok", "seq": state.seq(), "records": state.store().total_records()}))
}

async fn schema_ddl(State(state): State<AppState>) -> Result<Response, ApiError> {
    let ddl = emit_ddl(&state.0.catalog).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], ddl).into_response())
}

async fn export(State(state): State<AppState>) -> Result<Response, ApiError> {
    let store = state.store();
    let catalog = state.0.catalog.clone();
    let script = blocking(move || export_sql(&catalog, &store)).await?.map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(([(header::CONTENT_TYPE, "application/sql; charset=utf-8")], script).into_response())
}

#[derive(Debug, Deserialize)]
struct PromptParams {
    comments: Option<bool>,
}

async fn prompt(State(state): State<AppState>, Query(params): Query<PromptParams>) -> Json<Value> {
    let options = match params.comments {
        Some(c) => PromptOptions { include_comments: c, ..state.0.prompt.clone() },
        None => state.0.prompt.clone(),
    };
    let p = build_context_prompt(&state.0.catalog, &options);
    Json(json!({"model": state.0.model.describe(), "prompt": p}))
}

#[derive(Debug, Deserialize)]
struct ChatRequest {
    question: String,
    /// A user-edited statement to run in place of the model's.
    #[serde(default)]
    sql: Option<String>,
}

async fn chat(State(state): State<AppState>, bytes: Bytes) -> Result<Response, ApiError> {
    let req: ChatRequest = body(&bytes)?;
    if req.question.trim().is_empty() && req.sql.as_deref().is_none_or(|s| s.trim().is_empty()) {
        return Err(ApiError::bad_request("request", "question is empty"));
    }
    let session = Session::new(
        state.0.catalog.clone(),
        state.store(),
        state.0.model.clone(),
        &state.0.prompt,
        state.0.limits,
    );
    let exchange = blocking(move || match &req.sql {
        Some(sql) => session.run_edited(&req.question, sql),
        None => session.answer(&req.question),
    })
    .await?;

    let mut journal = state.0.writer.clone().lock_owned().await;
    let (record, writer) = (exchange.clone(), state.clone());
    let seq = blocking(move || {
        let seq = journal.record_exchange(&record)?;
        writer.0.seq.store(seq, std::sync::atomic::Ordering::SeqCst);
        Ok::<_, peripartum_core::journal::JournalError>(seq)
    })
    .await?
    .map_err(|e| ApiError::internal(e.to_string()))?;
    Ok((seq_header(seq), Json(exchange)).into_response())
}

#[derive(Debug, Deserialize)]
struct SqlRequest {
    sql: String,
}

/// Verdicts for every stage reached. Failing validation is a normal
/// answer here, so the status is 200 either way.
async fn validate_sql(State(state): State<AppState>, bytes: Bytes) -> Result<Json<pipeline::CheckReport>, ApiError> {
    let req: SqlRequest = body(&bytes)?;
    let (catalog, limits) = (state.0.catalog.clone(), state.0.limits);
    blocking(move || pipeline::check(&req.sql, &catalog, limits)).await.map(Json)
}

async fn execute_sql(State(state): State<AppState>, bytes: Bytes) -> Result<Response, ApiError> {
    let req: SqlRequest = body(&bytes)?;
    let (catalog, store, limits) = (state.0.catalog.clone(), state.store(), state.0.limits);
    let (_, table) = blocking(move || pipeline::run(&req.sql, &catalog, &store, limits)).await??;
    Ok(Json(table).into_response())
}

async fn list_queries() -> Json<Value> {
    Json(json!(stored::STORED_QUERIES))
}

/// Accepts `{"params": {...}}` or the parameters as a flat object. Scalars
/// of any JSON type are passed on as text; `null` means "use the default".
fn query_args(bytes: &Bytes) -> Result<stored::Args, ApiError> {
    if bytes.iter().all(u8::is_ascii_whitespace) {
        return Ok(stored::Args::new());
    }
    let value: Value = body(bytes)?;
    let object = match value.get("params") {
        Some(p) if value.as_object().is_some_and(|o| o.len() == 1) => p.clone(),
        _ => value,
    };
    let Value::Object(map) = object else {
        return Err(ApiError::bad_request("request", "parameters must be a JSON object"));
    };
    let mut args = BTreeMap::new();
    for (k, v) in map {
        let text = match v {
            Value::Null => continue,
            Value::String(s) => s,
            Value::Number(n) => n.to_string(),
            Value::Bool(b) => b.to_string(),
            other => return Err(ApiError::bad_request("params", format!("parameter {k} must be a scalar, got {other}"))),
        };
        args.insert(k, text);
    }
    Ok(args)
}

async fn run_query(State(state): State<AppState>, Path(name): Path<String>, bytes: Bytes) -> Result<Response, ApiError> {
    let query = stored::find(&name).ok_or_else(|| ApiError::from(stored::StoredError::UnknownQuery(name.clone())))?;
    let args = query_args(&bytes)?;
    let (catalog, store, cap) = (state.0.catalog.clone(), state.store(), state.0.limits.max_rows);
    let table = blocking(move || query.run(&args, &catalog, &store, Some(cap))).await??;
    Ok(Json(table).into_response())
}

#[derive(Debug, Deserialize)]
struct IngestRequest {
    source_kind: SourceKind,
    /// Full source configuration; defaults for the kind when absent.
    #[serde(default)]
    config: Option<SourceConfig>,
    /// The exported file's text.
    content: String,
}

/// Runs one source and commits the resulting changes as one journal
/// transaction. The writer lock is held throughout, so concurrent
/// ingestions apply one after the other.
async fn ingest(State(state): State<AppState>, bytes: Bytes) -> Result<Response, ApiError> {
    let req: IngestRequest = body(&bytes)?;
    let config = match req.config {
        Some(c) if c.source_kind != req.source_kind => {
            return Err(ApiError::bad_request(
                "request",
                format!("config is for {} but source_kind is {}", c.source_kind, req.source_kind),
            ));
        }
        Some(c) => c,
        None => SourceConfig::for_kind(req.source_kind),
    };

    let mut journal = state.0.writer.clone().lock_owned().await;
    let writer = state.clone();
    // The new store is published before the lock is released, so the next
    // writer always starts from it.
    let (report, seq) = blocking(move || -> Result<(IngestionReport, u64), ApiError> {
        let before = writer.store();
        let (after, report) = run_ingestion(&req.content, &config, &before)
            .map_err(|e| ApiError::bad_request("ingest", e.to_string()))?;
        let tx = diff(&before, &after);
        if !tx.is_empty() {
            let committed = journal.commit(&before, &tx).map_err(|e| match e {
                CommitError::Rejected(tx) => ApiError::new(StatusCode::CONFLICT, "constraint", tx.to_string())
                    .with_detail(json!(tx.violations())),
                CommitError::Journal(j) => ApiError::internal(j.to_string()),
            })?;
            writer.publish(committed, journal.last_seq());
        }
        Ok((report, journal.last_seq()))
    })
    .await??;
    Ok((seq_header(seq), Json(report)).into_response())
}
