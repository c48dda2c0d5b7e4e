//! Path, branch and line coverage of a test suite.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

use serde::Serialize;

use crate::analysis::Analysis;
use crate::ast::{NodeId, Program, StmtKind};
use crate::interp::{condition_id, Outcome, TraceEvent};
use crate::testcase::TestCase;
use crate::tree::SymTree;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Ratio {
    pub covered: usize,
    pub total: usize,
    pub ratio: f64,
}

impl Ratio {
    /// With nothing to cover, a non-empty suite covers everything and an
    /// empty one covers nothing.
    fn new(covered: usize, total: usize, suite_empty: bool) -> Ratio {
        let ratio = match (total, suite_empty) {
            (_, true) => 0.0,
            (0, false) => 1.0,
            _ => covered as f64 / total as f64,
        };
        Ratio { covered, total, ratio }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Attribution {
    pub test: String,
    pub path_id: Option<u32>,
    /// `returned`, `runtimeError`, `stepLimitExceeded`, or `boundExceeded`.
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CoverageReport {
    /// Covered feasible leaves over feasible leaves.
    pub path_coverage: Ratio,
    /// Condition outcomes reached by feasible paths within the bounds.
    pub branch_coverage: Ratio,
    /// Both outcomes of every condition in every function.
    pub program_branch_coverage: Ratio,
    pub line_coverage: Ratio,
    pub tests: Vec<Attribution>,
}

/// Lines holding a simple statement or a branch condition, in all functions.
pub fn executable_lines(program: &Program) -> BTreeSet<u32> {
    let mut lines = BTreeSet::new();
    for f in &program.functions {
        f.body.walk(&mut |s| match &s.kind {
            StmtKind::Block(_) => {}
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => {
                lines.insert(cond.span.line);
            }
            StmtKind::For { cond, .. } => {
                lines.insert(cond.as_ref().map_or(s.span.line, |c| c.span.line));
            }
            _ => {
                lines.insert(s.span.line);
            }
        });
    }
    lines
}

fn all_conditions(program: &Program) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    for f in &program.functions {
        f.body.walk(&mut |s| {
            if let Some(id) = condition_id(s) {
                out.insert(id);
            }
        });
    }
    out
}

/// Measure `tests` against the leaves of `tree` (whose statuses decide which
/// leaves count as feasible).
pub fn measure(analysis: &Analysis, tree: &SymTree, tests: &[TestCase]) -> CoverageReport {
    let feasible: BTreeSet<u32> = tree.target_paths().into_iter().collect();
    let in_bounds: BTreeSet<(NodeId, bool)> =
        feasible.iter().filter_map(|&p| analysis.path(p)).flat_map(|v| v.decisions()).collect();

    let mut paths = BTreeSet::new();
    let mut branches = BTreeSet::new();
    let mut program_branches = BTreeSet::new();
    let mut lines = BTreeSet::new();
    let mut attribution = Vec::new();
    for t in tests {
        let located = analysis.locate(t);
        branches.extend(analysis.decisions(&located.exec.trace));
        program_branches.extend(located.exec.trace.iter().filter_map(|e| match e {
            TraceEvent::Branch { node, outcome } => Some((*node, *outcome)),
            _ => None,
        }));
        lines.extend(located.exec.lines.iter().copied());
        let path_id = located.path_id.filter(|p| feasible.contains(p));
        if let Some(p) = path_id {
            paths.insert(p);
        }
        let outcome = match (&located.exec.outcome, located.bound_exceeded) {
            (_, true) => "boundExceeded",
            (Outcome::Returned { .. }, _) => "returned",
            (Outcome::RuntimeError { .. }, _) => "runtimeError",
            (Outcome::StepLimitExceeded, _) => "stepLimitExceeded",
            (Outcome::AssertionViolated { .. }, _) => "assertionViolated",
        };
        attribution.push(Attribution { test: format!("{t}"), path_id, outcome: outcome.into() });
    }

    let empty = tests.is_empty();
    let executable = executable_lines(&analysis.program);
    let conditions = all_conditions(&analysis.program);
    CoverageReport {
        path_coverage: Ratio::new(paths.len(), feasible.len(), empty),
        branch_coverage: Ratio::new(branches.intersection(&in_bounds).count(), in_bounds.len(), empty),
        program_branch_coverage: Ratio::new(
            program_branches.iter().filter(|(n, _)| conditions.contains(n)).count(),
            2 * conditions.len(),
            empty,
        ),
        line_coverage: Ratio::new(lines.intersection(&executable).count(), executable.len(), empty),
        tests: attribution,
    }
}

impl CoverageReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:>8} {:>8} {:>8}", "metric", "covered", "total", "ratio");
        let rows = [
            ("path", &self.path_coverage),
            ("branch (bounded)", &self.branch_coverage),
            ("branch (program)", &self.program_branch_coverage),
            ("line", &self.line_coverage),
        ];
        for (name, r) in rows {
            let _ = writeln!(out, "{:<18} {:>8} {:>8} {:>7.1}%", name, r.covered, r.total, r.ratio * 100.0);
        }
        if !self.tests.is_empty() {
            out.push('\n');
            let mut per_path: BTreeMap<Option<u32>, usize> = BTreeMap::new();
            for a in &self.tests {
                *per_path.entry(a.path_id).or_default() += 1;
                let path = a.path_id.map_or_else(|| String::from("-"), |p| format!("{p}"));
                let _ = writeln!(out, "{:<40} path {:>4}  {}", a.test, path, a.outcome);
            }
            let _ = writeln!(out, "\n{} tests over {} distinct paths", self.tests.len(), per_path.keys().flatten().count());
        }
        out
    }
}
