use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::String;

use crate::analysis::Analysis;

use super::{Backend, BackendError, GenRequest, GenResponse, TrialRecord, Verdict};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScriptedReply {
    Reply(String),
    Exhausted,
}

/// Backend that plays back canned replies.
///
/// A reply recorded for the exact prompt wins; otherwise the next queued
/// reply is used, then the `repeat` reply. With nothing left the backend
/// declines.
#[derive(Debug, Clone, Default)]
pub struct Scripted {
    pub by_prompt: BTreeMap<String, ScriptedReply>,
    pub queue: VecDeque<ScriptedReply>,
    pub repeat: Option<ScriptedReply>,
}

impl Scripted {
    /// Replies that are test literals, wrapped in a code fence.
    pub fn tests<I: IntoIterator<Item = S>, S: AsRef<str>>(tests: I) -> Scripted {
        let queue = tests.into_iter().map(|t| ScriptedReply::Reply(fenced(t.as_ref()))).collect();
        Scripted { queue, ..Scripted::default() }
    }

    /// Always answer with `test`.
    pub fn always(test: &str) -> Scripted {
        Scripted { repeat: Some(ScriptedReply::Reply(fenced(test))), ..Scripted::default() }
    }

    /// Replay the generator side of recorded trials, keyed by prompt.
    pub fn replay(trials: &[TrialRecord]) -> Scripted {
        let mut by_prompt = BTreeMap::new();
        for t in trials.iter().filter(|t| !t.user_authored) {
            let reply = match (&t.verdict, &t.raw_reply) {
                (Verdict::Exhausted, _) => ScriptedReply::Exhausted,
                (_, Some(raw)) => ScriptedReply::Reply(raw.clone()),
                (_, None) => continue,
            };
            by_prompt.insert(t.prompt.clone(), reply);
        }
        Scripted { by_prompt, ..Scripted::default() }
    }
}

fn fenced(test: &str) -> String {
    format!("```\n{}\n```", test.trim())
}

impl Backend for Scripted {
    fn name(&self) -> String {
        String::from("scripted")
    }

    fn generate(&mut self, _analysis: &Analysis, request: &GenRequest) -> Result<GenResponse, BackendError> {
        let reply = self
            .by_prompt
            .get(&request.prompt)
            .cloned()
            .or_else(|| self.queue.pop_front())
            .or_else(|| self.repeat.clone());
        Ok(match reply {
            Some(ScriptedReply::Reply(r)) => GenResponse::Reply(r),
            Some(ScriptedReply::Exhausted) => GenResponse::Exhausted,
            None => GenResponse::Declined("script has no reply for this prompt".into()),
        })
    }
}
