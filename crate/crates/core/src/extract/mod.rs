//! Path extraction: enumerate the execution paths of an entry function up to
//! loop and recursion bounds, inline symbolic callees, rename duplicated
//! locals and fold constants.
//!
//! Every branch decision along a path becomes an `assertTrue(cond)` or
//! `assertFalse(cond)` step, so a path variant is a straight-line program that
//! accepts exactly the inputs driving the original function down that path.

mod enumerate;
mod fold;
mod rename;

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::*;
use crate::error::ExtractError;
use crate::pretty;

pub use enumerate::inlinable_call_sites;
pub use fold::fold_constants;
pub use rename::rename_variables;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ExtractionConfig {
    pub loop_bound: u32,
    pub recursion_bound: u32,
    pub max_paths: usize,
    pub entry_function: String,
    /// Functions whose bodies are path-enumerated when called. The entry
    /// function is always symbolic.
    pub symbolic_functions: BTreeSet<String>,
    /// Constant propagation and pruning; disabling it is mostly useful for
    /// checking that folding preserves behavior.
    pub fold: bool,
}

impl Default for ExtractionConfig {
    fn default() -> Self {
        ExtractionConfig {
            loop_bound: 2,
            recursion_bound: 2,
            max_paths: 50,
            entry_function: String::new(),
            symbolic_functions: BTreeSet::new(),
            fold: true,
        }
    }
}

impl ExtractionConfig {
    pub fn for_entry(entry: impl Into<String>) -> Self {
        ExtractionConfig { entry_function: entry.into(), ..Default::default() }
    }

    pub fn is_symbolic(&self, name: &str) -> bool {
        name == self.entry_function || self.symbolic_functions.contains(name)
    }
}

/// Parameter of the entry function as seen by a variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamSlot {
    pub name: String,
    pub ty: Type,
    pub instance: u32,
}

/// One statement of a path variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    /// Declaration, assignment, expression statement, return or assertion.
    /// Local variables are bound to per-path instances.
    pub stmt: Stmt,
    /// Originating node: the branch condition for assertions, the statement
    /// otherwise (the parameter for a bound argument of an inlined call).
    pub provenance: NodeId,
    /// Instance declared by this step.
    pub binds: Option<u32>,
    /// False for assertions that constant folding proved to hold.
    pub visible: bool,
    /// Display text before renaming; shared prefixes of different paths
    /// always agree on it.
    pub label: String,
}

impl Step {
    pub fn is_assert(&self) -> bool {
        matches!(self.stmt.kind, StmtKind::Assert { .. })
    }

    pub fn assert_expected(&self) -> Option<bool> {
        match self.stmt.kind {
            StmtKind::Assert { expected, .. } => Some(expected),
            _ => None,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self.stmt.kind {
            StmtKind::Decl { .. } => "decl",
            StmtKind::Assign { .. } => "assign",
            StmtKind::Return(_) => "return",
            StmtKind::Assert { .. } => "assert",
            _ => "expr",
        }
    }

    pub fn text(&self) -> String {
        pretty::stmt_text(&self.stmt, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PathVariant {
    pub id: u32,
    pub entry: String,
    pub params: Vec<ParamSlot>,
    pub steps: Vec<Step>,
    pub bound_exceeded: bool,
    pub pruned_infeasible: bool,
}

impl PathVariant {
    pub fn asserts(&self) -> impl Iterator<Item = &Step> {
        self.steps.iter().filter(|s| s.is_assert())
    }

    /// `(condition node, outcome)` for every assertion, in path order.
    pub fn decisions(&self) -> Vec<(NodeId, bool)> {
        self.steps.iter().filter_map(|s| Some((s.provenance, s.assert_expected()?))).collect()
    }

    /// Whether the path is a generation target.
    pub fn is_feasible(&self) -> bool {
        !self.bound_exceeded && !self.pruned_infeasible
    }

    /// The variant as a function with the entry's signature; hidden
    /// assertions are left out.
    pub fn pretty(&self, program: &Program) -> String {
        self.pretty_with_lines(program).0
    }

    /// Like [`PathVariant::pretty`], also returning the 1-based line of each
    /// visible step (`None` for hidden ones).
    pub fn pretty_with_lines(&self, program: &Program) -> (String, Vec<Option<usize>>) {
        let mut out = match program.function(&self.entry) {
            Some(f) => f.signature(),
            None => self.entry.clone(),
        };
        out.push_str(" {\n");
        let mut lines = Vec::with_capacity(self.steps.len());
        let mut line = 1;
        for s in &self.steps {
            if s.visible {
                line += 1;
                lines.push(Some(line));
                out.push_str("    ");
                out.push_str(&s.text());
                out.push('\n');
            } else {
                lines.push(None);
            }
        }
        if self.bound_exceeded {
            out.push_str("    // path truncated at the loop or recursion bound\n");
        }
        out.push_str("}\n");
        (out, lines)
    }

    /// JSON document `{id, steps:[{kind, text, provenanceNodeId, assertExpected?, visible}], boundExceeded, prunedInfeasible}`.
    pub fn to_json(&self) -> serde_json::Value {
        let steps: Vec<serde_json::Value> = self
            .steps
            .iter()
            .map(|s| {
                let mut o = serde_json::Map::new();
                o.insert("kind".into(), s.kind_name().into());
                o.insert("text".into(), s.text().into());
                o.insert("provenanceNodeId".into(), s.provenance.0.into());
                if let Some(e) = s.assert_expected() {
                    o.insert("assertExpected".into(), e.into());
                }
                o.insert("visible".into(), s.visible.into());
                serde_json::Value::Object(o)
            })
            .collect();
        serde_json::json!({
            "id": self.id,
            "entry": self.entry,
            "steps": steps,
            "boundExceeded": self.bound_exceeded,
            "prunedInfeasible": self.pruned_infeasible,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Extraction {
    pub paths: Vec<PathVariant>,
    /// Enumeration stopped at `max_paths` with paths left unexplored.
    pub truncated: bool,
    /// Call expressions whose callee is spliced into the variants.
    pub inlined_sites: BTreeSet<NodeId>,
}

/// Enumerate, inline, rename and fold the paths of `cfg.entry_function`.
pub fn extract(program: &Program, cfg: &ExtractionConfig) -> Result<Extraction, ExtractError> {
    if cfg.max_paths == 0 {
        return Err(ExtractError::InvalidConfig);
    }
    if program.function(&cfg.entry_function).is_none() {
        return Err(ExtractError::EntryNotFound(cfg.entry_function.clone()));
    }
    if let Some(missing) = cfg.symbolic_functions.iter().find(|f| program.function(f).is_none()) {
        return Err(ExtractError::CalleeNotFound(missing.clone()));
    }
    Ok(enumerate::run(program, cfg))
}
