//! Per-path test generation.
//!
//! The driver visits the target leaves of the tree in enumeration order
//! (a depth-first walk, true branches first). For each leaf it asks a
//! [`Backend`] for a test, runs the test on the path variant and, when an
//! assertion fails, asks again with the failing assertion as feedback, up to
//! the trial limit.

pub mod brute;
pub mod prompt;
pub mod scripted;

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::analysis::Analysis;
use crate::extract::ExtractionConfig;
use crate::interp::Outcome;
use crate::tree::{Status, SymTree};

pub use brute::{brute_force_search, BruteForce, Domains, Search};
pub use prompt::{build_prompt, extract_code_block, with_feedback};
pub use scripted::{Scripted, ScriptedReply};

pub const DEFAULT_TRIAL_LIMIT: u32 = 5;

/// A failed attempt shown to the generator on the next trial.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreviousTrial {
    pub test: String,
    pub feedback: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GenRequest {
    pub prompt: String,
    pub path_id: u32,
    /// The variant as its JSON document.
    pub variant: serde_json::Value,
    pub previous_trials: Vec<PreviousTrial>,
    /// 1-based.
    pub trial_index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GenResponse {
    /// Free-form reply; the test is the first fenced code block.
    Reply(String),
    /// The generator proved that no input in its domains follows the path.
    Exhausted,
    /// The generator cannot handle this path; the driver moves on.
    Declined(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
}

pub trait Backend {
    fn name(&self) -> String;
    fn generate(&mut self, analysis: &Analysis, request: &GenRequest) -> Result<GenResponse, BackendError>;
}

impl<B: Backend + ?Sized> Backend for Box<B> {
    fn name(&self) -> String {
        (**self).name()
    }
    fn generate(&mut self, analysis: &Analysis, request: &GenRequest) -> Result<GenResponse, BackendError> {
        (**self).generate(analysis, request)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "camelCase")]
pub enum Verdict {
    Covered,
    /// `assert` is the first violated assertion; `step` its index in the variant.
    Diverged { assert: String, step: usize },
    ParseError { message: String },
    RuntimeError { message: String },
    /// No input in the generator's finite domains follows the path.
    Exhausted,
}

impl Verdict {
    pub fn is_covered(&self) -> bool {
        matches!(self, Verdict::Covered)
    }

    /// What the generator is told on the next trial.
    pub fn feedback(&self) -> String {
        match self {
            Verdict::Covered => String::new(),
            Verdict::Diverged { assert, .. } => assert.clone(),
            Verdict::ParseError { message } | Verdict::RuntimeError { message } => message.clone(),
            Verdict::Exhausted => String::from("no input follows this path"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrialRecord {
    pub path_id: u32,
    /// 1-based within the path; 0 for user-authored verifications.
    pub trial_index: u32,
    pub prompt: String,
    pub test: Option<String>,
    pub raw_reply: Option<String>,
    #[serde(flatten)]
    pub verdict: Verdict,
    /// Milliseconds since the Unix epoch, as reported by the run hooks.
    pub timestamp: u64,
    #[serde(default)]
    pub user_authored: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RunStatus {
    Running,
    Done,
    Cancelled,
    /// The backend became unavailable; the state holds the partial results.
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RunConfig {
    pub trial_limit: u32,
    pub extraction: ExtractionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct RunState {
    #[serde(serialize_with = "tree_json")]
    pub tree: SymTree,
    pub trials: Vec<TrialRecord>,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub backend: String,
    pub config: RunConfig,
    pub notes: Vec<String>,
}

fn tree_json<S: Serializer>(t: &SymTree, s: S) -> Result<S::Ok, S::Error> {
    t.to_json().serialize(s)
}

impl RunState {
    pub fn new(analysis: &Analysis, tree: SymTree, backend: String, trial_limit: u32) -> RunState {
        RunState {
            tree,
            trials: Vec::new(),
            status: RunStatus::Running,
            error: None,
            backend,
            config: RunConfig { trial_limit, extraction: analysis.config.clone() },
            notes: Vec::new(),
        }
    }

    pub fn trials_for(&self, path: u32) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(move |t| t.path_id == path)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

/// Callbacks into the environment running a generation loop.
pub trait RunHooks {
    fn now_millis(&self) -> u64 {
        0
    }
    /// Checked before every trial.
    fn is_cancelled(&self) -> bool {
        false
    }
    /// A user-edited prompt replacing the built one for `path`.
    fn prompt_override(&self, _path: u32) -> Option<String> {
        None
    }
    /// Called after every trial and when the run ends.
    fn on_progress(&mut self, _state: &RunState) {}
}

/// Hooks that never cancel and report nothing.
pub struct NoHooks;

impl RunHooks for NoHooks {}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DriverError {
    #[error("unknown path {0}")]
    UnknownPath(u32),
}

/// Run `test_text` against the variant of `path` and classify the result.
pub fn judge(analysis: &Analysis, path: u32, test_text: &str) -> Result<Verdict, DriverError> {
    let test = match analysis.parse_test(test_text) {
        Ok(t) => t,
        Err(e) => return Ok(Verdict::ParseError { message: e.to_string() }),
    };
    let exec = analysis.run_path(path, &test).ok_or(DriverError::UnknownPath(path))?;
    Ok(match exec.outcome {
        Outcome::Returned { .. } => Verdict::Covered,
        Outcome::AssertionViolated { step, text, .. } => Verdict::Diverged { assert: text, step },
        Outcome::RuntimeError { error, span } => Verdict::RuntimeError { message: format!("{error} at {span}") },
        Outcome::StepLimitExceeded => Verdict::RuntimeError { message: "step limit exceeded".into() },
    })
}

/// Judge one reply; `None` for the test when the reply has no code block.
fn judge_reply(analysis: &Analysis, path: u32, raw: &str) -> (Option<String>, Verdict) {
    match extract_code_block(raw) {
        None => (None, Verdict::ParseError { message: "the reply contains no fenced code block".into() }),
        Some(test) => {
            let verdict = judge(analysis, path, &test).unwrap_or_else(|e| Verdict::ParseError { message: e.to_string() });
            (Some(test), verdict)
        }
    }
}

/// Check a user-written test against a path. A passing test marks the leaf
/// covered unless the leaf is infeasible or bound-exceeded.
pub fn verify(
    analysis: &Analysis,
    tree: &mut SymTree,
    path: u32,
    test_text: &str,
    timestamp: u64,
) -> Result<TrialRecord, DriverError> {
    let status = tree.status(path).ok_or(DriverError::UnknownPath(path))?;
    let verdict = judge(analysis, path, test_text)?;
    if verdict.is_covered() && !status.is_unreachable() {
        tree.mark_status(path, Status::Covered).map_err(|_| DriverError::UnknownPath(path))?;
    }
    Ok(TrialRecord {
        path_id: path,
        trial_index: 0,
        prompt: String::new(),
        test: Some(test_text.trim().into()),
        raw_reply: None,
        verdict,
        timestamp,
        user_authored: true,
    })
}

/// Generate tests for every uncovered target leaf of `state.tree`.
pub fn generate_all(analysis: &Analysis, state: &mut RunState, backend: &mut dyn Backend, hooks: &mut dyn RunHooks) {
    state.status = RunStatus::Running;
    let targets: Vec<u32> =
        state.tree.target_paths().into_iter().filter(|&p| state.tree.status(p) == Some(Status::Uncovered)).collect();
    for path in targets {
        if let Err(stop) = generate_path(analysis, state, backend, hooks, path) {
            state.status = stop;
            hooks.on_progress(state);
            return;
        }
    }
    state.status = RunStatus::Done;
    hooks.on_progress(state);
}

fn generate_path(
    analysis: &Analysis,
    state: &mut RunState,
    backend: &mut dyn Backend,
    hooks: &mut dyn RunHooks,
    path: u32,
) -> Result<(), RunStatus> {
    let Some(variant) = analysis.path(path) else { return Ok(()) };
    let mut previous: Vec<PreviousTrial> = Vec::new();
    for k in 1..=state.config.trial_limit {
        if hooks.is_cancelled() {
            return Err(RunStatus::Cancelled);
        }
        let base = hooks.prompt_override(path).unwrap_or_else(|| build_prompt(analysis, variant));
        let request = GenRequest {
            prompt: with_feedback(&base, &previous),
            path_id: path,
            variant: variant.to_json(),
            previous_trials: previous.clone(),
            trial_index: k,
        };
        let response = match backend.generate(analysis, &request) {
            Ok(r) => r,
            Err(e) => {
                state.error = Some(e.to_string());
                return Err(RunStatus::Aborted);
            }
        };
        let (test, raw, verdict) = match response {
            GenResponse::Reply(raw) => {
                let (test, verdict) = judge_reply(analysis, path, &raw);
                (test, Some(raw), verdict)
            }
            GenResponse::Exhausted => (None, None, Verdict::Exhausted),
            GenResponse::Declined(reason) => {
                state.notes.push(format!("path {path}: {} declined: {reason}", backend.name()));
                hooks.on_progress(state);
                return Ok(());
            }
        };
        let feedback = verdict.feedback();
        let done = match verdict {
            Verdict::Covered => {
                let _ = state.tree.mark_status(path, Status::Covered);
                true
            }
            Verdict::Exhausted => {
                let _ = state.tree.mark_status(path, Status::Infeasible);
                true
            }
            _ => false,
        };
        state.trials.push(TrialRecord {
            path_id: path,
            trial_index: k,
            prompt: request.prompt,
            test: test.clone(),
            raw_reply: raw.clone(),
            verdict,
            timestamp: hooks.now_millis(),
            user_authored: false,
        });
        hooks.on_progress(state);
        if done {
            return Ok(());
        }
        let shown = test.or(raw).unwrap_or_default();
        previous.push(PreviousTrial { test: shown, feedback });
    }
    Ok(())
}
