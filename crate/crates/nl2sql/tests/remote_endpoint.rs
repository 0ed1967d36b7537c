//! The HTTP client against a local mock of an OpenAI-compatible server.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use peripartum_core::build_catalog;
use peripartum_core::sample::sample_store;
use peripartum_nl2sql::{ExchangeStage, Model, PromptOptions, RemoteConfig, RemoteModel, Session, TranslateError};
use peripartum_sql::guardrail::Limits;
use serde_json::{json, Value};

#[derive(Clone, Default)]
struct Seen {
    body: Arc<Mutex<Option<Value>>>,
    auth: Arc<Mutex<Option<String>>>,
}

/// Starts the mock on its own runtime thread and returns its address.
fn serve(router: Router) -> SocketAddr {
    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().unwrap();
        rt.block_on(async move {
            let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
            tx.send(listener.local_addr().unwrap()).unwrap();
            axum::serve(listener, router).await.unwrap();
        });
    });
    rx.recv().unwrap()
}

fn reply(content: &str) -> Value {
    json!({"choices": [{"index": 0, "message": {"role": "assistant", "content": content}}]})
}

fn config(addr: SocketAddr, timeout: Duration) -> RemoteConfig {
    RemoteConfig {
        base_url: format!("http://{addr}/"),
        model: "test-model".into(),
        timeout,
        temperature: 0.0,
        api_key: Some("secret".into()),
    }
}

#[test]
fn request_shape_and_reply_extraction() {
    let seen = Seen::default();
    let app = Router::new()
        .route(
            "/v1/chat/completions",
            post(|State(seen): State<Seen>, headers: HeaderMap, Json(body): Json<Value>| async move {
                *seen.auth.lock().unwrap() = headers.get("authorization").map(|v| v.to_str().unwrap().to_string());
                *seen.body.lock().unwrap() = Some(body);
                Json(reply("Sure.\n```sql\nSELECT COUNT(*) FROM patient\n```"))
            }),
        )
        .with_state(seen.clone());
    let addr = serve(app);
    let model = RemoteModel::new(config(addr, Duration::from_secs(5))).unwrap();
    let session = Session::new(
        Arc::new(build_catalog()),
        sample_store(),
        Arc::new(model),
        &PromptOptions::default(),
        Limits::default(),
    );
    let ex = session.answer("How many patients?");
    assert!(ex.error.is_none(), "{:?}", ex.error);
    assert_eq!(ex.sql.as_deref(), Some("SELECT COUNT(*) FROM patient"));
    assert_eq!(ex.result.unwrap().rows[0][0], peripartum_core::Value::Int(3));

    let body = seen.body.lock().unwrap().clone().unwrap();
    assert_eq!(body["model"], "test-model");
    assert_eq!(body["temperature"], 0.0);
    assert_eq!(body["messages"][0]["role"], "system");
    assert!(body["messages"][0]["content"].as_str().unwrap().contains("CREATE TABLE delivery"));
    assert_eq!(body["messages"][1], json!({"role": "user", "content": "How many patients?"}));
    assert_eq!(seen.auth.lock().unwrap().as_deref(), Some("Bearer secret"));
}

#[test]
fn failures_are_distinguished() {
    let app = Router::new()
        .route("/slow/v1/chat/completions", post(|| async {
            tokio::time::sleep(Duration::from_secs(3)).await;
            Json(reply("SELECT 1"))
        }))
        .route("/broken/v1/chat/completions", post(|| async { (StatusCode::INTERNAL_SERVER_ERROR, "boom") }))
        .route("/garbled/v1/chat/completions", post(|| async { Json(json!({"choices": []})) }))
        .route("/prose/v1/chat/completions", post(|| async { Json(reply("I am not sure.")) }));
    let addr = serve(app);
    let at = |path: &str, timeout_ms: u64| {
        let mut c = config(addr, Duration::from_millis(timeout_ms));
        c.base_url = format!("http://{addr}/{path}");
        RemoteModel::new(c).unwrap()
    };

    assert!(matches!(at("slow", 300).complete("s", "u"), Err(TranslateError::Timeout { .. })));
    assert!(matches!(at("broken", 5000).complete("s", "u"), Err(TranslateError::Http { status: 500, .. })));
    assert!(matches!(at("garbled", 5000).complete("s", "u"), Err(TranslateError::BadResponse { .. })));

    let session = Session::new(
        Arc::new(build_catalog()),
        sample_store(),
        Arc::new(at("prose", 5000)),
        &PromptOptions::default(),
        Limits::default(),
    );
    let ex = session.answer("anything");
    let err = ex.error.unwrap();
    assert_eq!(err.stage, ExchangeStage::Translate);
    assert_eq!(err.detail["kind"], "no_sql");
    assert_eq!(ex.raw_reply.as_deref(), Some("I am not sure."));
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    // Bind then drop to get a port with nothing listening.
    let addr = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let model = RemoteModel::new(config(addr, Duration::from_secs(2))).unwrap();
    assert!(matches!(model.complete("s", "u"), Err(TranslateError::Transport { .. })));
}
