use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use palm::llm::{reply_text, LlmBackend, LlmConfig};
use palm_core::corpus::example;
use palm_core::driver::{generate_all, NoHooks, RunState, RunStatus, Verdict};
use palm_core::tree::Status;
use palm_core::Analysis;
use serde_json::{json, Value};

struct Captured {
    headers: Vec<String>,
    body: Value,
}

/// Serves the canned `(status, extra headers, body)` responses in order, one
/// per connection, and records what it was sent.
fn mock(responses: Vec<(u16, &'static str, String)>) -> (String, Arc<Mutex<Vec<Captured>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = seen.clone();
    thread::spawn(move || {
        for (status, extra, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut headers = Vec::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                let line = line.trim_end().to_string();
                if line.is_empty() {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                headers.push(line);
            }
            let mut buf = vec![0; len];
            reader.read_exact(&mut buf).unwrap();
            log.lock().unwrap().push(Captured { headers, body: serde_json::from_slice(&buf).unwrap_or(Value::Null) });
            let mut stream = stream;
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n{extra}\r\n{body}",
                body.len()
            );
            stream.write_all(reply.as_bytes()).unwrap();
        }
    });
    (url, seen)
}

fn completion(text: &str) -> String {
    json!({ "choices": [{ "message": { "role": "assistant", "content": text } }] }).to_string()
}

/// Tutorial analysis with every leaf but (T,T) already covered.
fn one_target() -> (Analysis, RunState) {
    let ex = example("tutorial").unwrap();
    let a = Analysis::from_source(ex.source, ex.config()).unwrap();
    let mut state = RunState::new(&a, a.tree.clone(), "llm".into(), 3);
    for p in 1..4 {
        state.tree.mark_status(p, Status::Covered).unwrap();
    }
    (a, state)
}

fn backend(url: &str) -> LlmBackend {
    let mut params = serde_json::Map::new();
    params.insert("temperature".into(), json!(0.0));
    LlmBackend::new(LlmConfig { base_url: url.into(), model: "test-model".into(), params, timeout_secs: 10 }, Some("sk-test".into()))
}

#[test]
fn fenced_reply_covers_the_path() {
    let (url, seen) = mock(vec![(200, "", completion("Here you go:\n```java\ntutorial(1, 6, 0)\n```"))]);
    let (a, mut state) = one_target();
    generate_all(&a, &mut state, &mut backend(&url), &mut NoHooks);
    assert_eq!(state.status, RunStatus::Done);
    assert_eq!(state.trials.len(), 1);
    assert_eq!(state.trials[0].verdict, Verdict::Covered);
    assert_eq!(state.tree.status(0), Some(Status::Covered));

    let seen = seen.lock().unwrap();
    let req = &seen[0];
    assert!(req.headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk-test")));
    assert!(req.headers[0].starts_with("POST /v1/chat/completions"));
    assert_eq!(req.body["model"], "test-model");
    assert_eq!(req.body["temperature"], 0.0);
    assert_eq!(req.body["messages"][0]["content"], state.trials[0].prompt);
}

#[test]
fn prose_reply_is_a_parse_error_and_retried() {
    let (url, _) = mock(vec![
        (200, "", completion("I think x should be positive.")),
        (200, "", completion("```\ntutorial(1, 6, 0)\n```")),
    ]);
    let (a, mut state) = one_target();
    generate_all(&a, &mut state, &mut backend(&url), &mut NoHooks);
    assert!(matches!(state.trials[0].verdict, Verdict::ParseError { .. }));
    assert_eq!(state.trials[0].test, None);
    assert_eq!(state.trials[1].verdict, Verdict::Covered);
}

#[test]
fn retry_after_is_honored_once() {
    let (url, seen) = mock(vec![
        (429, "retry-after: 0\r\n", "{}".into()),
        (200, "", completion("```\ntutorial(1, 6, 0)\n```")),
    ]);
    let (a, mut state) = one_target();
    generate_all(&a, &mut state, &mut backend(&url), &mut NoHooks);
    assert_eq!(state.status, RunStatus::Done);
    assert_eq!(state.trials.len(), 1);
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn server_errors_abort_the_run() {
    let (url, _) = mock(vec![(429, "retry-after: 0\r\n", "{}".into()), (503, "", "{\"error\":\"down\"}".into())]);
    let (a, mut state) = one_target();
    generate_all(&a, &mut state, &mut backend(&url), &mut NoHooks);
    assert_eq!(state.status, RunStatus::Aborted);
    assert!(state.trials.is_empty());
    assert!(state.error.as_deref().unwrap().contains("HTTP 503"));
}

#[test]
fn unreachable_endpoint_aborts() {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1", listener.local_addr().unwrap());
    drop(listener);
    let (a, mut state) = one_target();
    generate_all(&a, &mut state, &mut backend(&url), &mut NoHooks);
    assert_eq!(state.status, RunStatus::Aborted);
}

#[test]
fn content_parts_are_joined() {
    let doc = json!({ "choices": [{ "message": { "content": [{ "type": "text", "text": "```\nf(1)" }, { "type": "text", "text": "\n```" }] } }] });
    assert_eq!(reply_text(&doc).unwrap(), "```\nf(1)\n```");
    assert_eq!(reply_text(&json!({ "choices": [] })), None);
}

#[test]
fn cli_reads_the_key_from_the_environment() {
    let (url, seen) = mock(vec![(200, "", completion("```\ntutorial(1, 6, 0)\n```"))]);
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.jsonl");
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_palm"))
        .args(["run", "-p", "example:tutorial", "--backend", "llm", "--model", "m", "--trial-limit", "1", "--base-url", &url])
        .arg("--out")
        .arg(&out)
        .env("PALM_API_KEY", "sk-from-env")
        .env("RUST_LOG", "off")
        .output()
        .unwrap()
        .status;
    // The mock answers once; the remaining paths abort the run.
    assert!(!status.success());
    let seen = seen.lock().unwrap();
    assert!(seen[0].headers.iter().any(|h| h.eq_ignore_ascii_case("authorization: Bearer sk-from-env")));
    let log = std::fs::read_to_string(&out).unwrap();
    assert_eq!(log.lines().count(), 1);
}
