use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::post;
use axum::{Json, Router};
use cursorbench_eval::{Backend, BackendError, ChatTurn, CompletionRequest, HttpBackend, HttpBackendConfig};
use image::RgbImage;
use serde_json::{json, Value};

#[derive(Clone, Copy)]
enum Script {
    Echo,
    /// 429 for the first `n` calls.
    Throttle(usize),
    Unauthorized,
    AlwaysDown,
}

#[derive(Clone)]
struct Stub {
    script: Script,
    calls: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<Value>>>,
    auth: Arc<Mutex<Vec<String>>>,
}

async fn handle(State(stub): State<Stub>, headers: HeaderMap, Json(body): Json<Value>) -> Response {
    let n = stub.calls.fetch_add(1, Ordering::SeqCst);
    stub.bodies.lock().unwrap().push(body);
    if let Some(v) = headers.get("authorization") {
        stub.auth.lock().unwrap().push(v.to_str().unwrap().to_string());
    }
    let ok = Json(json!({ "choices": [{ "message": { "role": "assistant", "content": "Answer: (1,2)" } }] }));
    match stub.script {
        Script::Echo => ok.into_response(),
        Script::Throttle(k) if n < k => (StatusCode::TOO_MANY_REQUESTS, "slow down").into_response(),
        Script::Throttle(_) => ok.into_response(),
        Script::Unauthorized => (StatusCode::UNAUTHORIZED, "bad key").into_response(),
        Script::AlwaysDown => (StatusCode::BAD_GATEWAY, "upstream").into_response(),
    }
}

async fn serve(script: Script) -> (String, Stub) {
    let stub = Stub {
        script,
        calls: Arc::default(),
        bodies: Arc::default(),
        auth: Arc::default(),
    };
    let app = Router::new().route("/v1/chat/completions", post(handle)).with_state(stub.clone());
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    (format!("http://{addr}/v1"), stub)
}

fn backend(endpoint: String) -> HttpBackend {
    HttpBackend::new(HttpBackendConfig {
        endpoint,
        model: "stub-model".into(),
        api_key: Some("sk-test".into()),
        base_delay_ms: 5,
        max_attempts: 4,
        ..Default::default()
    })
    .unwrap()
}

fn history() -> Vec<ChatTurn> {
    vec![
        ChatTurn::system("You locate carets."),
        ChatTurn::user("Place the cursor at the start of line 3.", Some(Arc::new(RgbImage::new(8, 6)))),
    ]
}

async fn ask(b: &HttpBackend) -> Result<String, BackendError> {
    let h = history();
    b.complete(CompletionRequest { sample_id: "s", turn: 1, history: &h }).await
}

fn image_parts(body: &Value) -> usize {
    body["messages"]
        .as_array()
        .unwrap()
        .iter()
        .filter_map(|m| m["content"].as_array())
        .flatten()
        .filter(|p| p["type"] == "image_url")
        .count()
}

#[tokio::test]
async fn echo_round_trip() {
    let (url, stub) = serve(Script::Echo).await;
    let text = ask(&backend(url)).await.unwrap();
    assert_eq!(text, "Answer: (1,2)");
    let bodies = stub.bodies.lock().unwrap();
    assert_eq!(bodies.len(), 1);
    assert_eq!(bodies[0]["model"], "stub-model");
    assert_eq!(image_parts(&bodies[0]), 1);
    let url = bodies[0]["messages"][1]["content"][1]["image_url"]["url"].as_str().unwrap();
    assert!(url.starts_with("data:image/png;base64,"));
    assert_eq!(stub.auth.lock().unwrap().as_slice(), ["Bearer sk-test"]);
}

#[tokio::test]
async fn throttling_is_retried() {
    let (url, stub) = serve(Script::Throttle(2)).await;
    assert_eq!(ask(&backend(url)).await.unwrap(), "Answer: (1,2)");
    assert_eq!(stub.calls.load(Ordering::SeqCst), 3);
}

#[tokio::test]
async fn unauthorized_is_fatal_and_not_retried() {
    let (url, stub) = serve(Script::Unauthorized).await;
    let err = ask(&backend(url)).await.unwrap_err();
    assert!(matches!(err, BackendError::Auth(_)), "{err}");
    assert!(err.is_fatal());
    assert_eq!(stub.calls.load(Ordering::SeqCst), 1);
}

#[tokio::test]
async fn gives_up_after_max_attempts() {
    let (url, stub) = serve(Script::AlwaysDown).await;
    let err = ask(&backend(url)).await.unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err}");
    assert!(!err.is_fatal());
    assert_eq!(stub.calls.load(Ordering::SeqCst), 4);
}

#[tokio::test]
async fn unreachable_endpoint_is_transport_error() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let err = ask(&backend(format!("http://{addr}/v1"))).await.unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err}");
}
