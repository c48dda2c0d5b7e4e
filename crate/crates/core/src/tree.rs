//! Prefix-sharing tree over the steps of all path variants.
//!
//! Assertions become condition nodes; the node following an assertion
//! remembers the asserted outcome, so a condition node has at most one child
//! per outcome. A path that ends right after an assertion (truncated at a
//! bound, pruned, or simply finished) gets a terminal statement node so that
//! every path owns a distinct leaf.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::ast::{NodeId, Program};
use crate::error::TreeError;
use crate::extract::PathVariant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NodeKind {
    Statement,
    Condition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Status {
    Covered,
    Uncovered,
    Infeasible,
    BoundExceeded,
}

impl Status {
    /// Leaves that are not generation targets.
    pub fn is_unreachable(self) -> bool {
        matches!(self, Status::Infeasible | Status::BoundExceeded)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TreeNode {
    pub id: u32,
    pub kind: NodeKind,
    pub label: String,
    /// Outcome of the parent condition leading here.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<bool>,
    /// Leaf status. Internal nodes are serialized with their summary status.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<Status>,
    pub children: Vec<u32>,
    /// Originating program node; absent for the root and terminal markers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<NodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path_id: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymTree {
    nodes: Vec<TreeNode>,
    root: u32,
    leaves: BTreeMap<u32, u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct TreeDoc {
    nodes: Vec<TreeNode>,
    root_id: u32,
    leaves: BTreeMap<u32, u32>,
}

/// Result of replaying a sequence of branch decisions through the tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Walk {
    Leaf(u32),
    /// The decisions run past a loop or recursion bound.
    BoundExceeded(u32),
    NoMatch,
}

impl SymTree {
    pub fn build(program: &Program, paths: &[PathVariant]) -> Result<SymTree, TreeError> {
        let Some(first) = paths.first() else { return Err(TreeError::Empty) };
        let root_label = program.function(&first.entry).map_or_else(|| first.entry.clone(), |f| f.signature());
        let mut t = SymTree { nodes: Vec::new(), root: 0, leaves: BTreeMap::new() };
        t.push(NodeKind::Statement, root_label, None, None);
        for p in paths {
            let mut cur = t.root;
            let mut pending = None;
            for s in &p.steps {
                let kind = if s.is_assert() { NodeKind::Condition } else { NodeKind::Statement };
                cur = t.child(cur, kind, Some(s.provenance), pending, &s.label);
                pending = s.assert_expected();
            }
            if pending.is_some() || p.bound_exceeded || p.pruned_infeasible {
                let label = if p.pruned_infeasible {
                    "infeasible"
                } else if p.bound_exceeded {
                    "bound exceeded"
                } else {
                    "end"
                };
                cur = t.child(cur, NodeKind::Statement, None, pending, label);
            }
            let node = &mut t.nodes[cur as usize];
            if let Some(other) = node.path_id {
                return Err(TreeError::DuplicatePath(other, p.id));
            }
            node.path_id = Some(p.id);
            node.status = Some(if p.pruned_infeasible {
                Status::Infeasible
            } else if p.bound_exceeded {
                Status::BoundExceeded
            } else {
                Status::Uncovered
            });
            if t.leaves.insert(p.id, cur).is_some() {
                return Err(TreeError::Malformed(format!("path id {} used twice", p.id)));
            }
        }
        if let Some(n) = t.nodes.iter().find(|n| n.path_id.is_some() && !n.children.is_empty()) {
            return Err(TreeError::Malformed(format!("path {} is a prefix of another path", n.path_id.unwrap_or(0))));
        }
        Ok(t.canonical())
    }

    fn push(&mut self, kind: NodeKind, label: String, provenance: Option<NodeId>, outcome: Option<bool>) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(TreeNode { id, kind, label, outcome, status: None, children: Vec::new(), provenance, path_id: None });
        id
    }

    fn child(&mut self, parent: u32, kind: NodeKind, provenance: Option<NodeId>, outcome: Option<bool>, label: &str) -> u32 {
        let found = self.nodes[parent as usize].children.iter().copied().find(|&c| {
            let n = &self.nodes[c as usize];
            n.kind == kind && n.provenance == provenance && n.outcome == outcome
        });
        match found {
            Some(c) => c,
            None => {
                let c = self.push(kind, label.to_string(), provenance, outcome);
                self.nodes[parent as usize].children.push(c);
                c
            }
        }
    }

    /// Renumber nodes in pre-order with children ordered by the smallest path
    /// id below them, so the result does not depend on insertion order.
    fn canonical(self) -> SymTree {
        let n = self.nodes.len();
        let mut min_path = alloc::vec![u32::MAX; n];
        fn fill(t: &SymTree, i: u32, min_path: &mut [u32]) -> u32 {
            let node = &t.nodes[i as usize];
            let mut m = node.path_id.unwrap_or(u32::MAX);
            for &c in &node.children {
                m = m.min(fill(t, c, min_path));
            }
            min_path[i as usize] = m;
            m
        }
        fill(&self, self.root, &mut min_path);
        let mut order = Vec::with_capacity(n);
        let mut stack = alloc::vec![self.root];
        while let Some(i) = stack.pop() {
            order.push(i);
            let mut kids = self.nodes[i as usize].children.clone();
            kids.sort_by_key(|&c| min_path[c as usize]);
            stack.extend(kids.into_iter().rev());
        }
        let mut new_id = alloc::vec![0u32; n];
        for (k, &old) in order.iter().enumerate() {
            new_id[old as usize] = k as u32;
        }
        let nodes = order
            .iter()
            .map(|&old| {
                let mut node = self.nodes[old as usize].clone();
                node.id = new_id[old as usize];
                node.children.sort_by_key(|&c| min_path[c as usize]);
                node.children.iter_mut().for_each(|c| *c = new_id[*c as usize]);
                node
            })
            .collect();
        let leaves = self.leaves.iter().map(|(&p, &l)| (p, new_id[l as usize])).collect();
        SymTree { nodes, root: 0, leaves }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, id: u32) -> Option<&TreeNode> {
        self.nodes.get(id as usize)
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn leaves(&self) -> &BTreeMap<u32, u32> {
        &self.leaves
    }

    pub fn leaf(&self, path: u32) -> Option<&TreeNode> {
        self.leaves.get(&path).and_then(|&i| self.node(i))
    }

    pub fn status(&self, path: u32) -> Option<Status> {
        self.leaf(path).and_then(|n| n.status)
    }

    /// Replace a leaf's status. A covered leaf stays covered when asked to
    /// become uncovered again.
    pub fn mark_status(&mut self, path: u32, status: Status) -> Result<(), TreeError> {
        let &i = self.leaves.get(&path).ok_or(TreeError::UnknownPath(path))?;
        let node = &mut self.nodes[i as usize];
        if !(node.status == Some(Status::Covered) && status == Status::Uncovered) {
            node.status = Some(status);
        }
        Ok(())
    }

    /// Leaf status, or for internal nodes: covered if any leaf below is
    /// covered, else uncovered if any is, else infeasible if any is.
    pub fn summary(&self, id: u32) -> Status {
        let node = &self.nodes[id as usize];
        if node.children.is_empty() {
            return node.status.unwrap_or(Status::Uncovered);
        }
        node.children.iter().map(|&c| self.summary(c)).min().unwrap_or(Status::Uncovered)
    }

    /// Path ids in enumeration order that are generation targets.
    pub fn target_paths(&self) -> Vec<u32> {
        self.leaves.keys().copied().filter(|&p| self.status(p).is_some_and(|s| !s.is_unreachable())).collect()
    }

    pub fn count(&self, status: Status) -> usize {
        self.leaves.keys().filter(|&&p| self.status(p) == Some(status)).count()
    }

    /// Follow `(condition node, outcome)` decisions from the root.
    pub fn walk(&self, decisions: &[(NodeId, bool)]) -> Walk {
        let mut cur = self.root;
        let mut k = 0;
        loop {
            let node = &self.nodes[cur as usize];
            if node.children.is_empty() {
                return match (node.path_id, node.status) {
                    (Some(p), Some(Status::BoundExceeded)) => Walk::BoundExceeded(p),
                    (Some(p), _) if k == decisions.len() => Walk::Leaf(p),
                    _ => Walk::NoMatch,
                };
            }
            let next = match node.kind {
                NodeKind::Condition => {
                    let Some(&(id, outcome)) = decisions.get(k) else { return Walk::NoMatch };
                    if node.provenance != Some(id) {
                        return Walk::NoMatch;
                    }
                    k += 1;
                    node.children.iter().copied().find(|&c| self.nodes[c as usize].outcome == Some(outcome))
                }
                NodeKind::Statement => node.children.first().copied(),
            };
            match next {
                Some(c) => cur = c,
                None => return Walk::NoMatch,
            }
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let nodes = self
            .nodes
            .iter()
            .map(|n| {
                let mut n = n.clone();
                n.status = Some(self.summary(n.id));
                n
            })
            .collect();
        let doc = TreeDoc { nodes, root_id: self.root, leaves: self.leaves.clone() };
        serde_json::to_value(doc).unwrap_or(serde_json::Value::Null)
    }

    pub fn from_json(text: &str) -> Result<SymTree, TreeError> {
        let doc: TreeDoc = serde_json::from_str(text).map_err(|e| TreeError::Malformed(e.to_string()))?;
        let n = doc.nodes.len() as u32;
        let mut nodes = doc.nodes;
        for (i, node) in nodes.iter_mut().enumerate() {
            if node.id != i as u32 || node.children.iter().any(|&c| c >= n) {
                return Err(TreeError::Malformed(format!("bad node {}", node.id)));
            }
            if node.path_id.is_none() {
                node.status = None;
            }
        }
        if doc.root_id >= n {
            return Err(TreeError::Malformed("bad root".into()));
        }
        for (&p, &l) in &doc.leaves {
            if nodes.get(l as usize).and_then(|x| x.path_id) != Some(p) {
                return Err(TreeError::Malformed(format!("leaf entry for path {p}")));
            }
        }
        Ok(SymTree { nodes, root: doc.root_id, leaves: doc.leaves })
    }

    /// Graphviz rendering: conditions as diamonds, statements as boxes, leaves
    /// colored by status.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph symtree {\n  node [fontname=\"monospace\"];\n");
        for n in &self.nodes {
            let shape = match n.kind {
                NodeKind::Condition => "diamond",
                NodeKind::Statement => "box",
            };
            let fill = match (n.kind, n.children.is_empty(), self.summary(n.id)) {
                (_, true, Status::Covered) => "palegreen",
                (_, true, Status::Uncovered) => "lightcoral",
                (_, true, _) => "lightgray",
                (NodeKind::Condition, false, _) => "lightyellow",
                (NodeKind::Statement, false, _) => "lightblue",
            };
            let label = n.label.replace('\\', "\\\\").replace('"', "\\\"");
            out.push_str(&format!("  n{} [shape={shape}, style=filled, fillcolor={fill}, label=\"{label}\"];\n", n.id));
            for &c in &n.children {
                match self.nodes[c as usize].outcome {
                    Some(o) => out.push_str(&format!("  n{} -> n{c} [label=\"{}\"];\n", n.id, if o { "T" } else { "F" })),
                    None => out.push_str(&format!("  n{} -> n{c};\n", n.id)),
                }
            }
        }
        out.push_str("}\n");
        out
    }
}
