//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

pub mod random;
pub mod survey;

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use lite::service::{router, AppState, ServiceConfig};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower::ServiceExt;

pub fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

/// An app with a clock that ticks 1000 ms per reading and ids `s1`, `s2`, ...
pub fn app(config: ServiceConfig) -> Arc<AppState> {
    let clock = AtomicU64::new(0);
    let ids = AtomicU64::new(0);
    Arc::new(
        AppState::new(config)
            .expect("fixture project loads")
            .with_clock(move || 1_000 * (clock.fetch_add(1, Ordering::SeqCst) + 1))
            .with_ids(move || format!("s{}", ids.fetch_add(1, Ordering::SeqCst) + 1)),
    )
}

pub fn app_for(manifest: &str) -> Arc<AppState> {
    app(ServiceConfig::new(fixture(manifest)))
}

/// One request through the router. Non-JSON bodies come back as a string.
pub async fn call(app: &Arc<AppState>, method: &str, path: &str, body: Option<&Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(Method::from_bytes(method.as_bytes()).unwrap()).uri(path);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(serde_json::to_vec(v).unwrap())
        }
        None => Body::empty(),
    };
    let resp = router(app.clone()).oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let text = String::from_utf8(bytes.to_vec()).unwrap();
    let value = serde_json::from_str(&text).unwrap_or(Value::String(text));
    (status, value)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Step {
    pub method: String,
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body: Option<Value>,
    pub status: u16,
    pub response: Value,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Script {
    pub manifest: String,
    pub steps: Vec<Step>,
}

/// Run a recorded script against a fresh app; returns one message per
/// mismatching step. With `LITE_RECORD=1` the script file is rewritten
/// from the actual responses instead.
pub async fn run_script(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut script: Script = serde_json::from_str(&text).unwrap();
    let app = app_for(&script.manifest);
    let mut failures = Vec::new();
    for (i, step) in script.steps.iter_mut().enumerate() {
        let (status, got) = call(&app, &step.method, &step.path, step.body.as_ref()).await;
        if std::env::var_os("LITE_RECORD").is_some() {
            step.status = status.as_u16();
            step.response = got;
            continue;
        }
        if status.as_u16() != step.status || got != step.response {
            failures.push(format!(
                "{}: step {i} {} {}: expected {} {}, got {} {}",
                path.display(),
                step.method,
                step.path,
                step.status,
                step.response,
                status.as_u16(),
                got
            ));
        }
    }
    if std::env::var_os("LITE_RECORD").is_some() {
        let mut out = serde_json::to_string_pretty(&script).unwrap();
        out.push('\n');
        std::fs::write(path, out).unwrap();
    }
    failures
}

pub fn scripts() -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = std::fs::read_dir(fixture("service"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    v.sort();
    v
}

/// Ask, confirm and answer one field; panics on any unexpected reply.
pub async fn step(app: &Arc<AppState>, id: &str, question: &str, answer: &str) -> Value {
    let (s, r) = call(app, "POST", &format!("/sessions/{id}/utterance"), Some(&json!({ "text": question }))).await;
    assert_eq!((s.as_u16(), &r["outcome"]), (200, &json!("paraphrase")), "{question}: {r}");
    let (s, _) = call(app, "POST", &format!("/sessions/{id}/confirm"), Some(&json!({ "accept": true }))).await;
    assert_eq!(s.as_u16(), 200);
    let (s, r) = call(app, "POST", &format!("/sessions/{id}/answer"), Some(&json!({ "answer_id": answer }))).await;
    assert_eq!(s.as_u16(), 200, "{r}");
    r
}

pub async fn start(app: &Arc<AppState>) -> String {
    let body = json!({ "questionnaire": "malaria", "respondent_lang": "french" });
    let (s, r) = call(app, "POST", "/sessions", Some(&body)).await;
    assert_eq!(s.as_u16(), 201, "{r}");
    r["session_id"].as_str().unwrap().to_string()
}

pub const PATH_A: &[(&str, &str)] = &[
    ("may i ask you some questions", "yes"),
    ("how many people sleep here", "few"),
    ("are there children under five in the house", "yes"),
    ("is anyone in the household pregnant", "yes"),
    ("did she receive antenatal care", "no"),
];

pub const PATH_B: &[(&str, &str)] = &[
    ("do you agree to take part in this survey", "yes"),
    ("is your household large", "many"),
    ("do you have young children", "no"),
    ("are you pregnant", "no"),
];

pub async fn walk(app: Arc<AppState>, id: String, path: &'static [(&'static str, &'static str)]) -> Value {
    for (q, a) in path {
        step(&app, &id, q, a).await;
        tokio::task::yield_now().await;
    }
    let (_, r) = call(&app, "GET", &format!("/sessions/{id}"), None).await;
    r
}


/// Two sessions on different paths, driven concurrently, must end with
/// exactly their own responses and utterances.
pub async fn interleaved_sessions() -> Result<(), String> {
    let app = app_for("malaria/lite.toml");
    let a = start(&app).await;
    let b = start(&app).await;
    let ta = tokio::spawn(walk(app.clone(), a.clone(), PATH_A));
    let tb = tokio::spawn(walk(app.clone(), b.clone(), PATH_B));
    let (va, vb) = (ta.await.map_err(|e| e.to_string())?, tb.await.map_err(|e| e.to_string())?);
    let fields = ["consent", "household_size", "children", "pregnant", "antenatal"];
    for (v, path) in [(&va, PATH_A), (&vb, PATH_B)] {
        let id = v["session_id"].as_str().unwrap_or_default();
        let want: serde_json::Map<String, Value> =
            fields.iter().zip(path).map(|(f, (_, a))| (f.to_string(), json!(a))).collect();
        if v["responses"] != Value::Object(want) {
            return Err(format!("session {id} has responses {}", v["responses"]));
        }
        if v["current_field"] != "cooking" {
            return Err(format!("session {id} ended at {}", v["current_field"]));
        }
        let events = v["transcript"].as_array().cloned().unwrap_or_default();
        if !events.windows(2).all(|w| w[0]["at"].as_u64() <= w[1]["at"].as_u64()) {
            return Err(format!("session {id} has out-of-order events"));
        }
        let raws: Vec<&str> = events.iter().filter_map(|e| e["raw"].as_str()).collect();
        let own: Vec<&str> = path.iter().map(|(q, _)| *q).collect();
        if raws != own {
            return Err(format!("session {id} saw utterances {raws:?}"));
        }
    }
    Ok(())
}
