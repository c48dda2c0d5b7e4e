use std::io::Write;
use std::net::TcpListener;
use std::process::{Command, Stdio};
use std::time::Duration;

use palm::runlog::{read_records, write_records, RunLogError, StreamingLog};
use palm_core::corpus::example;
use palm_core::driver::{generate_all, BruteForce, RunState};
use palm_core::Analysis;

#[test]
fn streamed_log_round_trips() {
    let ex = example("gcd").unwrap();
    let a = Analysis::from_source(ex.source, ex.config()).unwrap();
    let mut state = RunState::new(&a, a.tree.clone(), "brute-force".into(), 2);
    let mut hooks = StreamingLog::new(Vec::new());
    generate_all(&a, &mut state, &mut BruteForce::new(ex.domains()), &mut hooks);
    let text = String::from_utf8(std::mem::take(hooks.get_mut())).unwrap();
    assert_eq!(text.lines().count(), state.trials.len());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    std::fs::write(&path, &text).unwrap();
    assert_eq!(read_records(&path).unwrap(), state.trials);
    let again = dir.path().join("again.jsonl");
    write_records(&again, &state.trials).unwrap();
    assert_eq!(std::fs::read_to_string(&again).unwrap(), text);
}

#[test]
fn bad_lines_are_reported_with_their_number() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("log.jsonl");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "{{\"pathId\":0,\"trialIndex\":1,\"prompt\":\"p\",\"test\":null,\"rawReply\":null,\"verdict\":\"exhausted\",\"timestamp\":0}}").unwrap();
    writeln!(f).unwrap();
    writeln!(f, "{{\"pathId\":\"zero\"}}").unwrap();
    match read_records(&path) {
        Err(RunLogError::Json { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn serve_answers_over_tcp() {
    let port = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let mut child = Command::new(env!("CARGO_BIN_EXE_palm"))
        .args(["serve", "--port", &port.to_string()])
        .env("RUST_LOG", "off")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let url = format!("http://127.0.0.1:{port}/examples");
    let mut body = None;
    for _ in 0..100 {
        if let Ok(mut resp) = ureq::get(&url).call() {
            body = Some(resp.body_mut().read_to_string().unwrap());
            break;
        }
        std::thread::sleep(Duration::from_millis(50));
    }
    child.kill().unwrap();
    child.wait().unwrap();
    let doc: serde_json::Value = serde_json::from_str(&body.expect("server did not answer")).unwrap();
    assert_eq!(doc.as_array().unwrap().len(), 7);
}
