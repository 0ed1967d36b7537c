//! Route behavior through the full router, without a socket.

#[path = "../../sql/tests/support/oracle.rs"]
mod oracle;

use std::path::{Path, PathBuf};

use axum::body::{to_bytes, Body};
use axum::http::{header, Method, Request, StatusCode};
use axum::Router;
use peripartum_core::journal::{replay, Journal};
use peripartum_core::synth::{generate, SynthConfig};
use peripartum_core::{build_catalog, diff, emit_ddl, CanonicalStore};
use peripartum_nl2sql::StubModel;
use peripartum_service::{app, AppState, ServiceConfig};
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

struct Harness {
    _dir: TempDir,
    path: PathBuf,
    state: AppState,
    app: Router,
}

fn harness_with(store: Option<CanonicalStore>, token: Option<&str>) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let mut config = ServiceConfig::new(&path);
    config.api_token = token.map(str::to_string);
    if let Some(store) = store {
        let (mut journal, replayed) = Journal::open(&path).unwrap();
        journal.commit(&replayed.store, &diff(&replayed.store, &store)).unwrap();
    }
    let state = AppState::open(&config).unwrap();
    let app = app(state.clone(), &config).unwrap();
    Harness { _dir: dir, path, state, app }
}

fn harness() -> Harness {
    harness_with(None, None)
}

fn synthetic() -> CanonicalStore {
    generate(&SynthConfig::new(7, 200)).unwrap()
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header(header::CONTENT_TYPE, "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let res = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = res.status();
    (status, to_bytes(res.into_body(), usize::MAX).await.unwrap().to_vec())
}

async fn post(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let (status, bytes) = send(app, Method::POST, uri, Some(body)).await;
    (status, serde_json::from_slice(&bytes).unwrap())
}

async fn get_text(app: &Router, uri: &str) -> (StatusCode, String) {
    let (status, bytes) = send(app, Method::GET, uri, None).await;
    (status, String::from_utf8(bytes).unwrap())
}

fn journal_bytes(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap_or_default()
}

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/legacy").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[tokio::test]
async fn drop_is_rejected_at_the_guardrail() {
    let h = harness();
    let (status, body) = post(&h.app, "/sql/execute", json!({"sql": "DROP TABLE patient"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["error"]["stage"], "guardrail");
    assert_eq!(body["error"]["detail"]["accepted"], false);
}

#[tokio::test]
async fn execute_errors_carry_their_stage() {
    let h = harness();
    let (status, body) = post(&h.app, "/sql/execute", json!({"sql": "SELEC 1"})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("parse")));
    let (status, body) = post(&h.app, "/sql/execute", json!({"sql": "SELECT nope FROM patient"})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("resolve")));
    let (status, body) = post(&h.app, "/sql/execute", json!({"query": 1})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("request")));
}

#[tokio::test]
async fn execute_returns_a_result_table() {
    let store = synthetic();
    let h = harness_with(Some(store.clone()), None);
    let (status, body) = post(&h.app, "/sql/execute", json!({"sql": "SELECT COUNT(*) AS n FROM patient"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["columns"], json!(["n"]));
    assert_eq!(body["rows"], json!([[store.patients().len()]]));
}

#[tokio::test]
async fn ph_below_matches_the_oracle() {
    let store = synthetic();
    let want = oracle::ph_below(&store, 7.1);
    assert!(!want.is_empty(), "fixture should contain low-pH newborns");
    let h = harness_with(Some(store), None);
    for body in [json!({"threshold": 7.1}), json!({"params": {"threshold": "7.1"}})] {
        let (status, got) = post(&h.app, "/queries/ph_below", body).await;
        assert_eq!(status, StatusCode::OK, "{got}");
        assert_eq!(got["rows"], serde_json::to_value(&want).unwrap());
    }
}

#[tokio::test]
async fn stored_query_errors() {
    let h = harness();
    let (status, body) = post(&h.app, "/queries/nope", json!({})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::NOT_FOUND, Some("query")));
    let (status, body) = post(&h.app, "/queries/ph_below", json!({"threshold": "low"})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("params")));
    let (status, body) = post(&h.app, "/queries/ph_below", json!({"colour": 1})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("params")));
}

#[tokio::test]
async fn queries_are_listed_with_parameters() {
    let h = harness();
    let (status, text) = get_text(&h.app, "/queries").await;
    assert_eq!(status, StatusCode::OK);
    let list: Vec<Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(list.len(), 8);
    let ph = list.iter().find(|q| q["name"] == "ph_below").unwrap();
    assert_eq!(ph["params"][0]["name"], "threshold");
    assert_eq!(ph["params"][0]["type"], "number");
}

#[tokio::test]
async fn ddl_is_byte_equal_to_the_emitter() {
    let h = harness();
    let (status, text) = get_text(&h.app, "/schema/ddl").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(text, emit_ddl(&build_catalog()).unwrap());
}

#[tokio::test]
async fn validate_reports_every_stage_reached() {
    let h = harness();
    let (status, body) = post(&h.app, "/sql/validate", json!({"sql": "DELETE FROM patient"})).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!((body["ok"].as_bool(), body["stage"].as_str()), (Some(false), Some("guardrail")));
    assert_eq!(body["parse"]["ok"], true);
    assert!(body["resolve"].is_null());

    let (_, body) = post(&h.app, "/sql/validate", json!({"sql": "SELECT 1 +"})).await;
    assert_eq!(body["stage"], "parse");
    assert!(body["parse"]["error"]["line"].is_number());

    let bad_join = "SELECT p.name FROM patient p JOIN delivery d ON d.pregnancy_id = p.tc";
    let (_, body) = post(&h.app, "/sql/validate", json!({"sql": bad_join})).await;
    assert_eq!(body["ok"], true);
    let codes: Vec<&str> = body["lints"].as_array().unwrap().iter().filter_map(|l| l["rule"].as_str()).collect();
    assert!(codes.iter().any(|c| c.contains("L2") || c.contains("l2")), "{}", body["lints"]);
}

#[tokio::test]
async fn health_reports_the_sequence() {
    let h = harness_with(Some(synthetic()), None);
    let (status, text) = get_text(&h.app, "/health").await;
    let body: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(status, StatusCode::OK);
    assert_eq!((body["status"].as_str(), body["seq"].as_u64()), (Some("ok"), Some(1)));
}

#[tokio::test]
async fn read_only_routes_never_write_the_journal() {
    let h = harness_with(Some(synthetic()), None);
    let before = journal_bytes(&h.path);
    post(&h.app, "/sql/execute", json!({"sql": "SELECT * FROM delivery"})).await;
    post(&h.app, "/sql/validate", json!({"sql": "SELECT 1"})).await;
    post(&h.app, "/queries/laceration_stats", json!({})).await;
    for uri in ["/schema/ddl", "/queries", "/health", "/export/sql", "/prompt"] {
        assert_eq!(get_text(&h.app, uri).await.0, StatusCode::OK, "{uri}");
    }
    assert_eq!(journal_bytes(&h.path), before);
}

#[tokio::test]
async fn chat_answers_and_journals_the_exchange() {
    let h = harness_with(Some(synthetic()), None);
    let question = StubModel::builtin().questions().next().unwrap().to_string();
    let (status, body) = post(&h.app, "/chat", json!({"question": question})).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body["sql"].is_string() && body["error"].is_null(), "{body}");

    let edited = "SELECT COUNT(*) FROM patient";
    let (_, body) = post(&h.app, "/chat", json!({"question": question, "sql": edited})).await;
    assert_eq!((body["edited"].as_bool(), body["sql"].as_str()), (Some(true), Some(edited)));

    let replayed = replay(&h.path).unwrap();
    assert_eq!((replayed.transactions, replayed.exchanges.len(), replayed.last_seq), (1, 2, 3));
    assert_eq!(h.state.seq(), 3);

    let (status, body) = post(&h.app, "/chat", json!({"question": "  "})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("request")));
}

#[tokio::test]
async fn ingest_commits_once_and_is_idempotent() {
    let h = harness();
    let request = json!({"source_kind": "first_trimester_sheet", "content": fixture("first_trimester.csv")});
    let (status, report) = post(&h.app, "/ingest", request.clone()).await;
    assert_eq!(status, StatusCode::OK, "{report}");
    assert_eq!((report["rows"].as_u64(), report["accepted"].as_u64()), (Some(6), Some(6)));
    assert_eq!(h.state.store().patients().len(), 6);
    assert_eq!(h.state.seq(), 1);

    let (status, report) = post(&h.app, "/ingest", request).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(report["records_inserted"], 0);
    assert_eq!(h.state.seq(), 1, "unchanged store writes no entry");

    // Replaying the journal reproduces what the service holds.
    assert_eq!(replay(&h.path).unwrap().store, h.state.store());
}

#[tokio::test]
async fn ingest_rejects_bad_requests() {
    let h = harness();
    let (status, body) = post(&h.app, "/ingest", json!({"source_kind": "fax", "content": ""})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("request")));
    let (status, body) = post(&h.app, "/ingest", json!({"source_kind": "ctg_export", "content": "t,fhr\n"})).await;
    assert_eq!((status, body["error"]["stage"].as_str()), (StatusCode::BAD_REQUEST, Some("ingest")));
    assert_eq!(h.state.seq(), 0);
}

#[tokio::test]
async fn concurrent_ingestions_serialize() {
    let h = harness();
    let first = json!({"source_kind": "first_trimester_sheet", "content": fixture("first_trimester.csv")});
    post(&h.app, "/ingest", first).await;
    let delivery = json!({"source_kind": "delivery_sheet", "content": fixture("delivery.csv")});
    let outcomes = json!({"source_kind": "ehr_export", "content": fixture("ehr_outcomes.csv")});
    let (a, b) = tokio::join!(post(&h.app, "/ingest", delivery), post(&h.app, "/ingest", outcomes));
    assert_eq!((a.0, b.0), (StatusCode::OK, StatusCode::OK));
    let replayed = replay(&h.path).unwrap();
    assert_eq!(replayed.store, h.state.store());
    assert_eq!(replayed.last_seq, h.state.seq());
}

#[tokio::test]
async fn export_contains_every_record() {
    let store = synthetic();
    let h = harness_with(Some(store.clone()), None);
    let (status, script) = get_text(&h.app, "/export/sql").await;
    assert_eq!(status, StatusCode::OK);
    assert!(script.contains("CREATE TABLE patient"));
    assert_eq!(script.matches("INSERT INTO ").count(), store.total_records());
}

#[tokio::test]
async fn prompt_view_follows_the_comments_flag() {
    let h = harness();
    let (_, plain) = get_text(&h.app, "/prompt").await;
    let (_, noted) = get_text(&h.app, "/prompt?comments=true").await;
    let plain: Value = serde_json::from_str(&plain).unwrap();
    let noted: Value = serde_json::from_str(&noted).unwrap();
    assert_eq!(plain["prompt"]["ddl_text"], json!(emit_ddl(&build_catalog()).unwrap()));
    assert_eq!(plain["prompt"]["comments"], json!([]));
    assert!(noted["prompt"]["rendered"].as_str().unwrap().contains("linked to exactly one delivery"));
}

#[tokio::test]
async fn token_guards_everything_but_health() {
    let h = harness_with(None, Some("s3cret"));
    assert_eq!(get_text(&h.app, "/health").await.0, StatusCode::OK);
    assert_eq!(get_text(&h.app, "/schema/ddl").await.0, StatusCode::UNAUTHORIZED);
    let req = Request::get("/schema/ddl").header(header::AUTHORIZATION, "Bearer s3cret").body(Body::empty()).unwrap();
    assert_eq!(h.app.clone().oneshot(req).await.unwrap().status(), StatusCode::OK);
}

#[tokio::test]
async fn cors_allows_the_configured_origin() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = ServiceConfig::new(dir.path().join("s.jsonl"));
    config.cors_origins = vec!["http://localhost:5173".into()];
    let app = app(AppState::open(&config).unwrap(), &config).unwrap();
    let req = Request::get("/health").header(header::ORIGIN, "http://localhost:5173").body(Body::empty()).unwrap();
    let res = app.oneshot(req).await.unwrap();
    assert_eq!(res.headers()[header::ACCESS_CONTROL_ALLOW_ORIGIN], "http://localhost:5173");
}

#[test]
fn corrupt_journal_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("store.jsonl");
    let (mut journal, replayed) = Journal::open(&path).unwrap();
    journal.commit(&replayed.store, &diff(&replayed.store, &synthetic())).unwrap();
    drop(journal);
    let mut bytes = std::fs::read(&path).unwrap();
    bytes.extend_from_slice(b"{\"seq\": 2, \"ts\": ");
    std::fs::write(&path, bytes).unwrap();

    let err = AppState::open(&ServiceConfig::new(&path)).err().expect("startup must fail");
    let message = err.to_string();
    assert!(message.contains("last valid seq 1"), "{message}");
}

#[test]
fn state_is_shareable_across_threads() {
    fn assert_send_sync<T: Send + Sync + Clone>() {}
    assert_send_sync::<AppState>();
}
