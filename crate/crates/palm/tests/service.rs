use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use palm::service::{router, run_finished};
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: Method, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = match body {
        Some(b) => req.body(Body::from(b.to_string())).unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    raw(app, req).await
}

async fn raw(app: &Router, req: Request<Body>) -> (StatusCode, Value) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

async fn session(app: &Router, example: &str) -> String {
    let (st, doc) = call(app, Method::POST, "/sessions", Some(json!({ "example": example }))).await;
    assert_eq!(st, StatusCode::OK);
    let id = doc["sessionId"].as_str().unwrap().to_string();
    let (st, _) = call(app, Method::POST, &format!("/sessions/{id}/extract"), None).await;
    assert_eq!(st, StatusCode::OK);
    id
}

async fn wait_for_run(app: &Router, id: &str) -> Value {
    for _ in 0..600 {
        let (st, doc) = call(app, Method::GET, &format!("/sessions/{id}/runs/current"), None).await;
        assert_eq!(st, StatusCode::OK);
        if run_finished(&doc) {
            return doc;
        }
        tokio::time::sleep(Duration::from_millis(50)).await;
    }
    panic!("run did not finish");
}

#[tokio::test]
async fn examples_are_listed() {
    let app = router();
    let (st, doc) = call(&app, Method::GET, "/examples", None).await;
    assert_eq!(st, StatusCode::OK);
    let names: Vec<&str> = doc.as_array().unwrap().iter().map(|e| e["name"].as_str().unwrap()).collect();
    assert!(names.contains(&"tutorial") && names.contains(&"arg_parse"));
}

#[tokio::test]
async fn source_session_extracts_tree_and_paths() {
    let app = router();
    let src = "int f(int a, int b){ int r = 0; if (a > 0) { r = 1; } if (b > 0) { r = r + 2; } return r; }";
    let (st, doc) = call(&app, Method::POST, "/sessions", Some(json!({ "source": src }))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(doc["diagnostics"], json!([]));
    assert_eq!(doc["cfg"]["entryFunction"], "f");
    let id = doc["sessionId"].as_str().unwrap();

    let (st, _) = call(&app, Method::GET, &format!("/sessions/{id}/tree"), None).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let (st, tree) = call(&app, Method::POST, &format!("/sessions/{id}/extract"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(tree["leaves"].as_object().unwrap().len(), 4);
    assert!(tree["nodes"].as_array().unwrap().iter().any(|n| n["kind"] == "condition"));

    let (st, path) = call(&app, Method::GET, &format!("/sessions/{id}/paths/1"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(path["status"], "uncovered");
    assert!(path["text"].as_str().unwrap().contains("assertFalse(b > 0);"));
    assert!(path["steps"].as_array().unwrap().iter().all(|s| s["line"].is_u64()));

    let (st, _) = call(&app, Method::GET, &format!("/sessions/{id}/paths/99"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn parse_errors_are_reported_as_diagnostics() {
    let app = router();
    let (st, doc) = call(&app, Method::POST, "/sessions", Some(json!({ "source": "int f(int a) { return a + ; }" }))).await;
    assert_eq!(st, StatusCode::OK);
    let diag = &doc["diagnostics"][0];
    assert_eq!(diag["line"], 1);
    assert!(diag["col"].as_u64().unwrap() > 1);
    let id = doc["sessionId"].as_str().unwrap();
    let (st, err) = call(&app, Method::POST, &format!("/sessions/{id}/extract"), None).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    assert!(err["error"].is_string());
}

#[tokio::test]
async fn bad_requests() {
    let app = router();
    let (st, _) = call(&app, Method::GET, "/sessions/nope/tree", None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let req = Request::builder().method(Method::POST).uri("/sessions").body(Body::from("{not json")).unwrap();
    assert_eq!(raw(&app, req).await.0, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, Method::POST, "/sessions", Some(json!({}))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = call(&app, Method::POST, "/sessions", Some(json!({ "example": "missing" }))).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
    let id = session(&app, "tutorial").await;
    let (st, _) = call(&app, Method::POST, &format!("/sessions/{id}/runs"), Some(json!({ "backend": "psychic" }))).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn verify_and_locate() {
    let app = router();
    let id = session(&app, "tutorial").await;
    let verify = |body: Value| {
        let app = app.clone();
        let uri = format!("/sessions/{id}/paths/0/verify");
        async move { call(&app, Method::POST, &uri, Some(body)).await }
    };

    let (st, rec) = verify(json!({ "testText": "tutorial(1,1,0)" })).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(rec["verdict"], "diverged");
    assert_eq!(rec["assert"], "assertTrue(y + z > 0)");

    let (st, rec) = verify(json!({ "testText": "tutorial(1,6,0)" })).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(rec["verdict"], "covered");
    assert_eq!(rec["userAuthored"], true);

    let (st, rec) = verify(json!({ "testText": "tutorial(1,true,0)" })).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(rec["verdict"], "parseError");

    let (st, _) = verify(json!({ "testText": "tutorial(1,6" })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);
    let (st, _) = verify(json!({ "test": "tutorial(1,6,0)" })).await;
    assert_eq!(st, StatusCode::BAD_REQUEST);

    let (_, tree) = call(&app, Method::GET, &format!("/sessions/{id}/tree"), None).await;
    let leaf = tree["leaves"]["0"].as_u64().unwrap() as usize;
    assert_eq!(tree["nodes"][leaf]["status"], "covered");

    let (st, loc) =
        call(&app, Method::POST, &format!("/sessions/{id}/locate"), Some(json!({ "testText": "tutorial(-1, 0, 5)" }))).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(loc["pathId"], 2);
    assert_eq!(loc["decisions"].as_array().unwrap().len(), 2);

    let (_, export) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(export["history"].as_array().unwrap().len(), 3);
}

#[tokio::test]
async fn brute_force_run_covers_tutorial() {
    let app = router();
    let id = session(&app, "tutorial").await;
    let (st, doc) = call(&app, Method::POST, &format!("/sessions/{id}/runs"), Some(json!({ "backend": "brute-force" }))).await;
    assert_eq!(st, StatusCode::OK);
    assert!(doc["runId"].is_string());
    let done = wait_for_run(&app, &id).await;
    assert_eq!(done["status"], "done");
    assert_eq!(done["trials"].as_array().unwrap().len(), 4);
    let (_, tree) = call(&app, Method::GET, &format!("/sessions/{id}/tree"), None).await;
    for leaf in tree["leaves"].as_object().unwrap().values() {
        assert_eq!(tree["nodes"][leaf.as_u64().unwrap() as usize]["status"], "covered");
    }
    let (_, path) = call(&app, Method::GET, &format!("/sessions/{id}/paths/2"), None).await;
    assert_eq!(path["trials"].as_array().unwrap().len(), 1);
}

#[tokio::test]
async fn prompt_override_is_used_by_runs() {
    let app = router();
    let id = session(&app, "tutorial").await;
    let uri = format!("/sessions/{id}/paths/0/prompt");
    let (_, generated) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(generated["overridden"], false);
    assert!(generated["prompt"].as_str().unwrap().contains("assertTrue(y + z > 0);"));

    let (st, _) = call(&app, Method::PUT, &uri, Some(json!({ "prompt": "custom prompt" }))).await;
    assert_eq!(st, StatusCode::OK);
    let (_, now) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(now["prompt"], "custom prompt");

    let body = json!({ "backend": "scripted", "tests": ["tutorial(1,1,0)", "tutorial(1,6,0)"], "trialLimit": 2 });
    call(&app, Method::POST, &format!("/sessions/{id}/runs"), Some(body)).await;
    let done = wait_for_run(&app, &id).await;
    let trials = done["trials"].as_array().unwrap();
    assert_eq!(trials[0]["prompt"].as_str().unwrap().trim_end(), "custom prompt");
    let second = trials[1]["prompt"].as_str().unwrap();
    assert!(second.starts_with("custom prompt") && second.contains("assertTrue(y + z > 0)"));

    let (_, _) = call(&app, Method::PUT, &uri, Some(json!({ "prompt": null }))).await;
    let (_, reset) = call(&app, Method::GET, &uri, None).await;
    assert_eq!(reset["overridden"], false);
}

#[tokio::test]
async fn concurrent_run_is_rejected_and_cancel_stops_it() {
    let app = router();
    let id = session(&app, "arg_parse").await;
    let runs = format!("/sessions/{id}/runs");
    let (st, _) = call(&app, Method::POST, &runs, Some(json!({ "backend": "brute-force" }))).await;
    assert_eq!(st, StatusCode::OK);
    let (st, _) = call(&app, Method::POST, &runs, Some(json!({ "backend": "brute-force" }))).await;
    assert_eq!(st, StatusCode::CONFLICT);
    let (st, _) = call(&app, Method::POST, &format!("/sessions/{id}/extract"), None).await;
    assert_eq!(st, StatusCode::CONFLICT);

    let (st, doc) = call(&app, Method::POST, &format!("{runs}/current/cancel"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(doc["cancelled"], true);
    let done = wait_for_run(&app, &id).await;
    assert_eq!(done["status"], "cancelled");
    let (st, _) = call(&app, Method::POST, &runs, Some(json!({ "backend": "scripted", "tests": [] }))).await;
    assert_eq!(st, StatusCode::OK);
}

#[tokio::test]
async fn delete_session() {
    let app = router();
    let id = session(&app, "gcd").await;
    let req = Request::builder().method(Method::DELETE).uri(format!("/sessions/{id}")).body(Body::empty()).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    assert_eq!(resp.status(), StatusCode::NO_CONTENT);
    let (st, _) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
    assert_eq!(st, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn extraction_is_idempotent_and_sessions_are_independent() {
    let app = router();
    let a = session(&app, "palindrome").await;
    let b = session(&app, "palindrome").await;
    let extract = format!("/sessions/{a}/extract");
    let (_, first) = call(&app, Method::POST, &extract, None).await;
    let (_, second) = call(&app, Method::POST, &extract, None).await;
    assert_eq!(first, second);

    call(&app, Method::POST, &format!("/sessions/{b}/paths/0/verify"), Some(json!({ "testText": "is_palindrome(\"\")" }))).await;
    let req = Request::builder().method(Method::DELETE).uri(format!("/sessions/{a}")).body(Body::empty()).unwrap();
    app.clone().oneshot(req).await.unwrap();

    let (st, export) = call(&app, Method::GET, &format!("/sessions/{b}"), None).await;
    assert_eq!(st, StatusCode::OK);
    assert_eq!(export["history"].as_array().unwrap().len(), 1);
    let leaf = export["tree"]["leaves"]["0"].as_u64().unwrap() as usize;
    assert_eq!(export["tree"]["nodes"][leaf]["status"], "covered");
}

/// Every snapshot taken during a run pairs a tree with the history that
/// produced it: covered leaves are exactly the paths with a covering trial.
#[tokio::test]
async fn run_snapshots_are_consistent() {
    let app = router();
    let id = session(&app, "arg_parse").await;
    call(&app, Method::POST, &format!("/sessions/{id}/runs"), Some(json!({ "backend": "brute-force" }))).await;
    let mut seen = 0;
    loop {
        let (_, export) = call(&app, Method::GET, &format!("/sessions/{id}"), None).await;
        let tree = &export["tree"];
        let mut covered: Vec<u64> = tree["leaves"]
            .as_object()
            .unwrap()
            .iter()
            .filter(|(_, n)| tree["nodes"][n.as_u64().unwrap() as usize]["status"] == "covered")
            .map(|(p, _)| p.parse().unwrap())
            .collect();
        covered.sort();
        let mut by_trials: Vec<u64> = export["history"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|t| t["verdict"] == "covered")
            .map(|t| t["pathId"].as_u64().unwrap())
            .collect();
        by_trials.sort();
        assert_eq!(covered, by_trials);
        seen += 1;
        if export["runActive"] == false {
            break;
        }
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
    assert!(seen > 1);
}
