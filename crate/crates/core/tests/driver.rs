use palm_core::corpus::{example, EXAMPLES};
use palm_core::driver::*;
use palm_core::tree::Status;
use palm_core::Analysis;

fn corpus(name: &str) -> Analysis {
    let ex = example(name).unwrap();
    Analysis::from_source(ex.source, ex.config()).unwrap()
}

fn run(a: &Analysis, backend: &mut dyn Backend) -> RunState {
    let mut st = RunState::new(a, a.tree.clone(), backend.name(), DEFAULT_TRIAL_LIMIT);
    generate_all(a, &mut st, backend, &mut NoHooks);
    st
}

#[test]
fn five_wrong_answers_leave_the_leaf_uncovered() {
    let a = corpus("tutorial");
    let mut backend = Scripted::always("tutorial(1, 1, 0)");
    let st = run(&a, &mut backend);
    let first: Vec<_> = st.trials_for(0).collect();
    assert_eq!(first.len(), 5);
    assert_eq!(st.tree.status(0), Some(Status::Uncovered));
    for t in &first {
        assert_eq!(t.verdict, Verdict::Diverged { assert: "assertTrue(y + z > 0)".into(), step: 2 });
    }
    // (1, 1, 0) is the (T, F) path, so that leaf is covered on its first trial.
    assert_eq!(st.trials_for(1).count(), 1);
    assert_eq!(st.tree.status(1), Some(Status::Covered));
    assert_eq!(st.status, RunStatus::Done);
}

/// Records every request the driver sends.
struct Recording {
    inner: Scripted,
    requests: Vec<GenRequest>,
}

impl Backend for Recording {
    fn name(&self) -> String {
        "recording".into()
    }
    fn generate(&mut self, a: &Analysis, r: &GenRequest) -> Result<GenResponse, BackendError> {
        self.requests.push(r.clone());
        self.inner.generate(a, r)
    }
}

#[test]
fn feedback_is_the_previous_divergence() {
    let a = corpus("tutorial");
    let wrong = ["tutorial(1, 1, 0)", "tutorial(-1, 0, 0)", "tutorial(2, 0, 9)", "tutorial(0, 0, 0)", "nonsense"];
    let mut backend = Recording { inner: Scripted::tests(wrong), requests: Vec::new() };
    let st = run(&a, &mut backend);
    let trials: Vec<_> = st.trials_for(0).collect();
    assert_eq!(trials.len(), 5);
    let reqs: Vec<_> = backend.requests.iter().filter(|r| r.path_id == 0).collect();
    for k in 0..4 {
        assert_eq!(reqs[k + 1].previous_trials.len(), k + 1);
        assert_eq!(reqs[k + 1].previous_trials[k].feedback, trials[k].verdict.feedback());
        assert!(reqs[k + 1].prompt.contains(&trials[k].verdict.feedback()));
        assert_eq!(reqs[k + 1].trial_index as usize, k + 2);
    }
    assert!(matches!(&trials[0].verdict, Verdict::Diverged { assert, .. } if assert == "assertTrue(y + z > 0)"));
    assert!(matches!(&trials[1].verdict, Verdict::Diverged { assert, .. } if assert == "assertTrue(x > 0)"));
    assert!(matches!(trials[4].verdict, Verdict::ParseError { .. }));
}

#[test]
fn correct_first_answer_takes_one_trial() {
    let a = corpus("tutorial");
    let mut backend = Scripted::tests(["tutorial(1, 6, 0)"]);
    let st = run(&a, &mut backend);
    assert_eq!(st.trials_for(0).count(), 1);
    assert_eq!(st.tree.status(0), Some(Status::Covered));
    // Nothing left in the script for the other leaves.
    assert_eq!(st.notes.len(), 3);
}

#[test]
fn replies_without_code_fence_are_parse_errors() {
    let a = corpus("tutorial");
    let mut backend = Scripted { repeat: Some(ScriptedReply::Reply("Try x = 1, y = 6, z = 0.".into())), ..Scripted::default() };
    let st = run(&a, &mut backend);
    let t = st.trials_for(0).next().unwrap();
    assert!(matches!(t.verdict, Verdict::ParseError { .. }));
    assert_eq!(t.test, None);
    assert_eq!(t.raw_reply.as_deref(), Some("Try x = 1, y = 6, z = 0."));
    assert_eq!(st.trials.len(), 20);
}

#[test]
fn runtime_errors_are_failed_trials() {
    let a = Analysis::from_source(
        "int f(int x){ if (10 / x > 1) { return 1; } return 0; }",
        palm_core::extract::ExtractionConfig::for_entry("f"),
    )
    .unwrap();
    let mut backend = Scripted::tests(["f(0)", "f(3)"]);
    let st = run(&a, &mut backend);
    let trials: Vec<_> = st.trials_for(0).collect();
    assert!(matches!(&trials[0].verdict, Verdict::RuntimeError { message } if message.contains("division by zero")));
    assert_eq!(trials[1].verdict, Verdict::Covered);
}

#[test]
fn brute_force_covers_every_feasible_corpus_leaf() {
    for ex in EXAMPLES.iter().filter(|e| e.name != "arg_parse") {
        let a = Analysis::from_source(ex.source, ex.config()).unwrap();
        let st = run(&a, &mut BruteForce::new(ex.domains()));
        assert_eq!(st.status, RunStatus::Done);
        assert!(st.notes.is_empty(), "{}: {:?}", ex.name, st.notes);
        assert_eq!(st.tree.count(Status::Uncovered), 0, "{}", ex.name);
        for t in &st.trials {
            assert!(t.trial_index == 1, "brute force answers right away");
        }
    }
}

#[test]
fn brute_force_proves_exhaustion() {
    let a = Analysis::from_source(
        "int f(int x){ if (x * x == 2) { return 1; } return 0; }",
        palm_core::extract::ExtractionConfig::for_entry("f"),
    )
    .unwrap();
    let st = run(&a, &mut BruteForce::default());
    assert_eq!(st.tree.status(0), Some(Status::Infeasible));
    assert_eq!(st.tree.status(1), Some(Status::Covered));
    assert_eq!(st.trials[0].verdict, Verdict::Exhausted);
}

#[test]
fn brute_force_declines_huge_domains() {
    let a = Analysis::from_source(
        "int f(String[] a, String[] b){ if (a.length > b.length) { return 1; } return 0; }",
        palm_core::extract::ExtractionConfig::for_entry("f"),
    )
    .unwrap();
    let st = run(&a, &mut BruteForce::default());
    assert_eq!(st.trials.len(), 0);
    assert_eq!(st.notes.len(), 2);
    assert!(st.notes[0].contains("budget"));
    assert_eq!(st.tree.count(Status::Uncovered), 2);
}

#[test]
fn palindrome_brute_force_finds_ab_first() {
    let a = corpus("palindrome");
    let c = a.paths().iter().find(|p| p.decisions().iter().map(|d| d.1).collect::<Vec<_>>() == [true, true]).unwrap();
    match brute_force_search(&a, c, &Domains::default()).unwrap() {
        Search::Found { test, .. } => assert_eq!(test.to_string(), "is_palindrome(\"ab\")"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn replay_reproduces_statuses() {
    for name in ["tutorial", "palindrome", "gcd", "split_words"] {
        let ex = example(name).unwrap();
        let a = corpus(name);
        let first = run(&a, &mut BruteForce::new(ex.domains()));
        let mut replay = Scripted::replay(&first.trials);
        let second = run(&a, &mut replay);
        assert_eq!(first.tree, second.tree, "{name}");
        assert_eq!(first.trials.len(), second.trials.len());
    }
}

struct Down;

impl Backend for Down {
    fn name(&self) -> String {
        "down".into()
    }
    fn generate(&mut self, _: &Analysis, _: &GenRequest) -> Result<GenResponse, BackendError> {
        Err(BackendError::Unavailable("connection refused".into()))
    }
}

#[test]
fn unavailable_backend_aborts_and_keeps_partial_state() {
    let a = corpus("tutorial");
    let mut st = RunState::new(&a, a.tree.clone(), "down".into(), 5);
    st.tree.mark_status(0, Status::Covered).unwrap();
    generate_all(&a, &mut st, &mut Down, &mut NoHooks);
    assert_eq!(st.status, RunStatus::Aborted);
    assert!(st.error.as_deref().unwrap().contains("connection refused"));
    assert_eq!(st.tree.status(0), Some(Status::Covered));
}

struct CancelAfter {
    calls: std::cell::Cell<u32>,
    limit: u32,
    seen: Vec<RunStatus>,
    prompt: Option<String>,
}

impl RunHooks for CancelAfter {
    fn now_millis(&self) -> u64 {
        42
    }
    fn is_cancelled(&self) -> bool {
        self.calls.set(self.calls.get() + 1);
        self.calls.get() > self.limit
    }
    fn prompt_override(&self, _path: u32) -> Option<String> {
        self.prompt.clone()
    }
    fn on_progress(&mut self, state: &RunState) {
        self.seen.push(state.status);
    }
}

#[test]
fn cancellation_between_trials_and_prompt_override() {
    let a = corpus("tutorial");
    let mut hooks = CancelAfter { calls: Default::default(), limit: 2, seen: Vec::new(), prompt: Some("custom {retry}".into()) };
    let mut backend = Recording { inner: Scripted::always("tutorial(1, 6, 0)"), requests: Vec::new() };
    let mut st = RunState::new(&a, a.tree.clone(), "x".into(), 5);
    generate_all(&a, &mut st, &mut backend, &mut hooks);
    assert_eq!(st.status, RunStatus::Cancelled);
    assert_eq!(st.trials.len(), 2);
    assert_eq!(st.trials[0].timestamp, 42);
    assert_eq!(backend.requests[0].prompt, "custom\n");
    assert_eq!(hooks.seen.last(), Some(&RunStatus::Cancelled));
}

#[test]
fn verify_rules() {
    let a = corpus("pruned");
    let mut tree = a.tree.clone();
    let r = verify(&a, &mut tree, 1, "pruned_demo(5)", 1).unwrap();
    assert_eq!(r.verdict, Verdict::Covered);
    assert_eq!(tree.status(1), Some(Status::Covered));
    let r = verify(&a, &mut tree, 2, "pruned_demo(5", 1).unwrap();
    assert!(matches!(r.verdict, Verdict::ParseError { .. }));
    let r = verify(&a, &mut tree, 2, "pruned_demo(\"x\")", 1).unwrap();
    assert!(matches!(r.verdict, Verdict::ParseError { .. }));
    assert!(verify(&a, &mut tree, 17, "pruned_demo(5)", 1).is_err());
    let p = corpus("palindrome");
    let mut tree = p.tree.clone();
    let d = p.paths().iter().find(|v| v.decisions().iter().map(|d| d.1).collect::<Vec<_>>() == [true, false, true, true]).unwrap();
    assert_eq!(verify(&p, &mut tree, d.id, "is_palindrome(\"abca\")", 0).unwrap().verdict, Verdict::Covered);
    // A bound-exceeded leaf stays gray even for a test that runs past the bound.
    let bound = p.paths().iter().find(|v| v.bound_exceeded).unwrap().id;
    verify(&p, &mut tree, bound, "is_palindrome(\"aaaa\")", 0).unwrap();
    assert_eq!(tree.status(bound), Some(Status::BoundExceeded));
}

#[test]
fn prompt_policy() {
    let ex = example("split_words").unwrap();
    let a = Analysis::from_source(ex.source, ex.config()).unwrap();
    let prompt = build_prompt(&a, &a.paths()[1]);
    assert!(prompt.contains("boolean is_option(String word)"), "{prompt}");
    assert!(prompt.contains("String separator = \" \";"));
    assert!(prompt.contains("assertTrue(is_option(parts[0]));"));
    assert!(!prompt.contains("for (int i"), "the entry body itself is not shown");
    assert!(!prompt.contains("{retry}"));
    assert!(prompt.contains("count_options(<String>)"));
    let fields_at = prompt.find("separator").unwrap();
    let variant_at = prompt.find("assertTrue(is_option").unwrap();
    let format_at = prompt.find("single fenced code block").unwrap();
    assert!(fields_at < variant_at && variant_at < format_at);

    let retry = with_feedback(&prompt, &[PreviousTrial { test: "count_options(\"\")".into(), feedback: "assertTrue(0 < parts.length)".into() }]);
    assert!(retry.starts_with(prompt.trim_end()));
    assert!(retry.contains("`count_options(\"\")` failed at `assertTrue(0 < parts.length)`"));
}

#[test]
fn prompt_inlines_symbolic_callees_only() {
    let src = "int helper(int v){ return v * 3; } int sym(int v){ if (v > 1) { return v; } return 0; } int f(int x){ return helper(x) + sym(x); }";
    let mut cfg = palm_core::extract::ExtractionConfig::for_entry("f");
    cfg.symbolic_functions.insert("sym".into());
    let a = Analysis::from_source(src, cfg).unwrap();
    let prompt = build_prompt(&a, &a.paths()[0]);
    assert!(prompt.contains("return v * 3;"));
    assert!(!prompt.contains("int sym(int v)"));
    assert!(prompt.contains("int helper_ret = helper(x);"), "{prompt}");
}

#[test]
fn trial_records_serialize_with_flat_verdicts() {
    let a = corpus("tutorial");
    let mut tree = a.tree.clone();
    let r = verify(&a, &mut tree, 0, "tutorial(1,1,0)", 5).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["verdict"], "diverged");
    assert_eq!(v["assert"], "assertTrue(y + z > 0)");
    assert_eq!(v["userAuthored"], true);
    let back: TrialRecord = serde_json::from_value(v).unwrap();
    assert_eq!(back, r);
}
