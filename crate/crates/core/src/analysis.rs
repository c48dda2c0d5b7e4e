//! A parsed program together with its enumerated paths and tree.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::ast::{NodeId, Program};
use crate::error::{AnalysisError, TestError};
use crate::extract::{extract, Extraction, ExtractionConfig, PathVariant};
use crate::interp::{self, ExecOptions, ExecResult, Outcome, TraceEvent};
use crate::testcase::{parse_test, TestCase};
use crate::tree::{SymTree, Walk};

#[derive(Debug, Clone)]
pub struct Analysis {
    pub program: Program,
    pub config: ExtractionConfig,
    pub extraction: Extraction,
    /// Tree with the statuses assigned at extraction time.
    pub tree: SymTree,
}

/// Where a test's execution ends up in the tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Located {
    pub path_id: Option<u32>,
    /// The execution ran past a loop or recursion bound.
    pub bound_exceeded: bool,
    pub exec: ExecResult,
    /// Why no path was found, when none was.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
}

impl Analysis {
    pub fn new(program: Program, config: ExtractionConfig) -> Result<Analysis, AnalysisError> {
        let extraction = extract(&program, &config)?;
        let tree = SymTree::build(&program, &extraction.paths)?;
        Ok(Analysis { program, config, extraction, tree })
    }

    pub fn from_source(source: &str, config: ExtractionConfig) -> Result<Analysis, AnalysisError> {
        Analysis::new(crate::parse(source)?, config)
    }

    pub fn entry(&self) -> &str {
        &self.config.entry_function
    }

    pub fn paths(&self) -> &[PathVariant] {
        &self.extraction.paths
    }

    pub fn path(&self, id: u32) -> Option<&PathVariant> {
        self.extraction.paths.get(id as usize)
    }

    pub fn parse_test(&self, text: &str) -> Result<TestCase, TestError> {
        parse_test(text, &self.program, self.entry())
    }

    /// Branch decisions of a trace as the variants see them: decisions made
    /// inside calls that were not inlined are dropped.
    pub fn decisions(&self, trace: &[TraceEvent]) -> Vec<(NodeId, bool)> {
        decisions(trace, &self.extraction.inlined_sites)
    }

    pub fn run_path(&self, id: u32, test: &TestCase) -> Option<ExecResult> {
        self.path(id).map(|v| interp::run_variant(&self.program, v, test, ExecOptions::default()))
    }

    /// Run `test` on the original program and find the leaf it follows.
    pub fn locate(&self, test: &TestCase) -> Located {
        let exec = interp::run_program(&self.program, test, ExecOptions::default());
        let decisions = self.decisions(&exec.trace);
        let walk = self.tree.walk(&decisions);
        let mut located = Located { path_id: None, bound_exceeded: false, exec, reason: None };
        if let Walk::BoundExceeded(_) = walk {
            located.bound_exceeded = true;
            located.reason = Some("execution exceeds the loop or recursion bound".into());
            return located;
        }
        match &located.exec.outcome {
            Outcome::Returned { .. } => match walk {
                Walk::Leaf(p) => located.path_id = Some(p),
                _ => located.reason = Some("no enumerated path matches the execution".into()),
            },
            Outcome::RuntimeError { error, span } => located.reason = Some(format!("runtime error at {span}: {error}")),
            Outcome::StepLimitExceeded => located.reason = Some("step limit exceeded".into()),
            Outcome::AssertionViolated { text, .. } => located.reason = Some(format!("assertion failed: {text}")),
        }
        located
    }
}

pub fn decisions(trace: &[TraceEvent], inlined: &BTreeSet<NodeId>) -> Vec<(NodeId, bool)> {
    let mut out = Vec::new();
    // Depth inside opaque calls; the entry call itself is never in the trace.
    let mut opaque = 0usize;
    for ev in trace {
        match ev {
            TraceEvent::Enter { site, .. } if opaque > 0 || !inlined.contains(site) => opaque += 1,
            TraceEvent::Exit { .. } if opaque > 0 => opaque -= 1,
            TraceEvent::Branch { node, outcome } if opaque == 0 => out.push((*node, *outcome)),
            _ => {}
        }
    }
    out
}
