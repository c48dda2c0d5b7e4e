//! Depth-first path enumeration with on-the-fly inlining and folding.
//!
//! A path under construction is a [`State`]: the steps emitted so far and a
//! stack of pending work. Branches clone the state, so each pending
//! alternative carries its own continuation. Calls to symbolic functions are
//! hoisted out of the statement that contains them and the callee body is
//! spliced in place, binding parameters to fresh locals and the result to a
//! `<callee>_ret` local.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use super::fold::{Folded, Folder};
use super::{rename_variables, Extraction, ExtractionConfig, ParamSlot, PathVariant, Step};
use crate::ast::*;
use crate::interp::condition_id;
use crate::pretty;

/// User-function calls of `e` in evaluation order, leaving out the right
/// operands of `&&` and `||`, which may not run.
fn collect_calls<'e>(e: &'e Expr, program: &Program, out: &mut Vec<&'e Expr>) {
    match &e.kind {
        ExprKind::Binary(op, l, _) if op.is_short_circuit() => collect_calls(l, program, out),
        ExprKind::Binary(_, l, r) | ExprKind::Index(l, r) => {
            collect_calls(l, program, out);
            collect_calls(r, program, out);
        }
        ExprKind::Unary(_, x) | ExprKind::Len(x) | ExprKind::NewArray(_, x) => collect_calls(x, program, out),
        ExprKind::Call { name, args } => {
            args.iter().for_each(|a| collect_calls(a, program, out));
            if program.function(name).is_some() {
                out.push(e);
            }
        }
        ExprKind::Method { receiver, args, .. } => {
            collect_calls(receiver, program, out);
            args.iter().for_each(|a| collect_calls(a, program, out));
        }
        _ => {}
    }
}

fn callee_name(call: &Expr) -> &str {
    match &call.kind {
        ExprKind::Call { name, .. } => name,
        _ => unreachable!("not a call"),
    }
}

/// Calls that are lifted out of a statement before it is emitted. Nothing is
/// lifted unless a symbolic callee is involved; then every user call goes, so
/// calls keep their relative order.
fn hoisted<'e>(exprs: &[&'e Expr], program: &Program, cfg: &ExtractionConfig) -> Vec<&'e Expr> {
    let mut out = Vec::new();
    for e in exprs {
        collect_calls(e, program, &mut out);
    }
    if out.iter().any(|c| cfg.is_symbolic(callee_name(c))) {
        out
    } else {
        Vec::new()
    }
}

/// Call expressions whose callee is inlined during extraction. Branches
/// executed inside any other call are invisible to path variants.
pub fn inlinable_call_sites(program: &Program, cfg: &ExtractionConfig) -> BTreeSet<NodeId> {
    let mut sites = BTreeSet::new();
    for f in program.functions.iter().filter(|f| cfg.is_symbolic(&f.name)) {
        f.body.walk(&mut |s| {
            let own: Vec<&Expr> = match &s.kind {
                StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => vec![cond],
                StmtKind::For { cond, .. } => cond.iter().collect(),
                _ => s.exprs(),
            };
            for c in hoisted(&own, program, cfg) {
                if cfg.is_symbolic(callee_name(c)) {
                    sites.insert(c.id);
                }
            }
        });
    }
    sites
}

#[derive(Clone)]
struct Frame<'p> {
    func: &'p FunctionDecl,
    /// Declaration, parameter or call node to the instance it currently denotes.
    map: BTreeMap<NodeId, u32>,
    caller: Option<(usize, NodeId)>,
    active: bool,
}

#[derive(Clone, Copy)]
struct Cond<'p> {
    expr: Option<&'p Expr>,
    id: NodeId,
    span: Span,
}

#[derive(Clone, Copy)]
struct Loop<'p> {
    cond: Cond<'p>,
    body: &'p Stmt,
    update: Option<&'p Stmt>,
    frame: usize,
}

#[derive(Clone, Copy)]
enum Work<'p> {
    Stmt(&'p Stmt, usize),
    /// Emit a simple statement whose calls have already been hoisted.
    Emit(&'p Stmt, usize),
    /// Split on an `if` whose condition calls have been hoisted.
    Branch(&'p Stmt, usize),
    Loop(Loop<'p>, u32),
    LoopTest(Loop<'p>, u32),
    Assert(Cond<'p>, bool, usize),
    Call(&'p Expr, usize),
    FrameEnd(usize),
    Bound,
}

#[derive(Clone)]
struct State<'p> {
    steps: Vec<Step>,
    work: Vec<Work<'p>>,
    frames: Vec<Frame<'p>>,
    folder: Folder,
    next_instance: u32,
    bound: bool,
    pruned: bool,
}

impl State<'_> {
    fn fresh(&mut self) -> u32 {
        let i = self.next_instance;
        self.next_instance += 1;
        i
    }
}

struct Enumerator<'p> {
    program: &'p Program,
    cfg: &'p ExtractionConfig,
    entry: &'p FunctionDecl,
    sites: BTreeSet<NodeId>,
    paths: Vec<PathVariant>,
}

pub(super) fn run(program: &Program, cfg: &ExtractionConfig) -> Extraction {
    let entry = program.function(&cfg.entry_function).expect("entry checked by caller");
    let mut init = State {
        steps: Vec::new(),
        work: vec![Work::Stmt(&entry.body, 0)],
        frames: vec![Frame { func: entry, map: BTreeMap::new(), caller: None, active: true }],
        folder: Folder::default(),
        next_instance: 0,
        bound: false,
        pruned: false,
    };
    for p in &entry.params {
        let i = init.fresh();
        init.frames[0].map.insert(p.id, i);
        init.folder.declare(i, &p.ty);
    }
    let mut e = Enumerator { program, cfg, entry, sites: inlinable_call_sites(program, cfg), paths: Vec::new() };
    let mut stack = vec![init];
    let mut truncated = false;
    while let Some(st) = stack.pop() {
        if e.paths.len() >= cfg.max_paths {
            truncated = true;
            break;
        }
        let children = e.advance(st);
        stack.extend(children.into_iter().rev());
    }
    Extraction { paths: e.paths, truncated, inlined_sites: e.sites }
}

impl<'p> Enumerator<'p> {
    /// Run a state until it forks (returning the alternatives in exploration
    /// order) or its path is complete.
    fn advance(&mut self, mut st: State<'p>) -> Vec<State<'p>> {
        loop {
            let Some(w) = st.work.pop() else {
                self.finish(st);
                return Vec::new();
            };
            match w {
                Work::Stmt(s, f) => self.stmt(&mut st, s, f),
                Work::Emit(s, f) => {
                    if self.emit(&mut st, s, f) {
                        self.finish(st);
                        return Vec::new();
                    }
                }
                Work::Branch(s, f) => return self.branch(st, s, f),
                Work::Loop(l, j) => {
                    st.work.push(Work::LoopTest(l, j));
                    let own: Vec<&Expr> = l.cond.expr.into_iter().collect();
                    self.push_calls(&mut st, &own, l.frame);
                }
                Work::LoopTest(l, j) => return self.loop_test(st, l, j),
                Work::Assert(c, expected, f) => {
                    if !self.assert(&mut st, c, expected, f) {
                        self.finish(st);
                        return Vec::new();
                    }
                }
                Work::Call(c, f) => {
                    if !self.call(&mut st, c, f) {
                        self.finish(st);
                        return Vec::new();
                    }
                }
                Work::FrameEnd(f) => st.frames[f].active = false,
                Work::Bound => {
                    st.bound = true;
                    self.finish(st);
                    return Vec::new();
                }
            }
        }
    }

    fn push_calls(&self, st: &mut State<'p>, exprs: &[&'p Expr], frame: usize) {
        for c in hoisted(exprs, self.program, self.cfg).into_iter().rev() {
            st.work.push(Work::Call(c, frame));
        }
    }

    fn stmt(&self, st: &mut State<'p>, s: &'p Stmt, f: usize) {
        let cond_of = |e: Option<&'p Expr>| Cond { expr: e, id: condition_id(s).unwrap_or(s.id), span: e.map_or(s.span, |e| e.span) };
        match &s.kind {
            StmtKind::Block(stmts) => st.work.extend(stmts.iter().rev().map(|x| Work::Stmt(x, f))),
            StmtKind::If { cond, .. } => {
                st.work.push(Work::Branch(s, f));
                self.push_calls(st, &[cond], f);
            }
            StmtKind::While { cond, body } => {
                let l = Loop { cond: cond_of(Some(cond)), body, update: None, frame: f };
                st.work.push(Work::Loop(l, 0));
            }
            StmtKind::DoWhile { body, cond } => {
                let l = Loop { cond: cond_of(Some(cond)), body, update: None, frame: f };
                st.work.push(Work::Loop(l, 0));
                st.work.push(Work::Stmt(body, f));
            }
            StmtKind::For { init, cond, update, body } => {
                let l = Loop { cond: cond_of(cond.as_ref()), body, update: update.as_deref(), frame: f };
                st.work.push(Work::Loop(l, 0));
                if let Some(i) = init {
                    st.work.push(Work::Stmt(i, f));
                }
            }
            StmtKind::Assert { .. } => unreachable!("assertions do not occur in source programs"),
            _ => {
                st.work.push(Work::Emit(s, f));
                self.push_calls(st, &s.exprs(), f);
            }
        }
    }

    fn branch(&self, st: State<'p>, s: &'p Stmt, f: usize) -> Vec<State<'p>> {
        let StmtKind::If { cond, then_branch, else_branch } = &s.kind else { unreachable!() };
        let c = Cond { expr: Some(cond), id: cond.id, span: cond.span };
        let mut taken = st.clone();
        taken.work.push(Work::Stmt(then_branch, f));
        taken.work.push(Work::Assert(c, true, f));
        let mut other = st;
        if let Some(e) = else_branch {
            other.work.push(Work::Stmt(e, f));
        }
        other.work.push(Work::Assert(c, false, f));
        vec![taken, other]
    }

    /// Iteration `j` of a loop: leave now, or run the body once more. At the
    /// bound, running the body again ends the path as bound-exceeded.
    fn loop_test(&self, st: State<'p>, l: Loop<'p>, j: u32) -> Vec<State<'p>> {
        let mut out = Vec::with_capacity(2);
        if l.cond.expr.is_some() {
            let mut exit = st.clone();
            exit.work.push(Work::Assert(l.cond, false, l.frame));
            out.push(exit);
        }
        let mut enter = st;
        if j < self.cfg.loop_bound {
            enter.work.push(Work::Loop(l, j + 1));
            if let Some(u) = l.update {
                enter.work.push(Work::Stmt(u, l.frame));
            }
            enter.work.push(Work::Stmt(l.body, l.frame));
        } else {
            enter.work.push(Work::Bound);
        }
        enter.work.push(Work::Assert(l.cond, true, l.frame));
        out.push(enter);
        out
    }

    /// Returns false when the assertion can never hold.
    fn assert(&self, st: &mut State<'p>, c: Cond<'p>, expected: bool, f: usize) -> bool {
        let cond = match c.expr {
            Some(e) => self.rewrite(st, e, f),
            None => Expr::new(c.id, c.span, ExprKind::Bool(true)),
        };
        let mut step = Step {
            stmt: Stmt::new(c.id, c.span, StmtKind::Assert { cond, expected }),
            provenance: c.id,
            binds: None,
            visible: true,
            label: String::new(),
        };
        let folded = if self.cfg.fold { st.folder.step(&mut step) } else { Folded::Kept };
        if let StmtKind::Assert { cond, .. } = &step.stmt.kind {
            step.label = pretty::expr_text(cond);
        }
        st.steps.push(step);
        if folded == Folded::Fails {
            st.pruned = true;
            return false;
        }
        true
    }

    fn push_step(&self, st: &mut State<'p>, stmt: Stmt, provenance: NodeId, binds: Option<u32>) {
        let mut step = Step { stmt, provenance, binds, visible: true, label: String::new() };
        if self.cfg.fold {
            st.folder.step(&mut step);
        }
        step.label = pretty::stmt_text(&step.stmt, 0);
        st.steps.push(step);
    }

    fn rebind(&self, st: &State<'p>, v: &VarRef, f: usize) -> VarRef {
        let mut v = v.clone();
        if let Binding::Local(id) = v.binding {
            v.binding = Binding::Instance(st.frames[f].map[&id]);
        }
        v
    }

    /// Copy of `e` with locals bound to instances and hoisted calls replaced
    /// by their result variables.
    fn rewrite(&self, st: &State<'p>, e: &Expr, f: usize) -> Expr {
        let map = &st.frames[f].map;
        let mut out = e.clone();
        out.walk_mut(&mut |x| {
            let replacement = match &mut x.kind {
                ExprKind::Var(v) => {
                    if let Binding::Local(id) = v.binding {
                        v.binding = Binding::Instance(map[&id]);
                    }
                    None
                }
                ExprKind::Call { name, .. } => map
                    .get(&x.id)
                    .map(|i| ExprKind::Var(VarRef { name: format!("{name}_ret"), binding: Binding::Instance(*i) })),
                _ => None,
            };
            if let Some(k) = replacement {
                x.kind = k;
            }
        });
        out
    }

    /// Returns true when the statement ends the path.
    fn emit(&self, st: &mut State<'p>, s: &'p Stmt, f: usize) -> bool {
        match &s.kind {
            StmtKind::Decl { ty, name, init } => {
                let init = init.as_ref().map(|e| self.rewrite(st, e, f));
                let i = st.fresh();
                st.frames[f].map.insert(s.id, i);
                let kind = StmtKind::Decl { ty: ty.clone(), name: name.clone(), init };
                self.push_step(st, Stmt::new(s.id, s.span, kind), s.id, Some(i));
            }
            StmtKind::Assign { target, value } => {
                let target = match target {
                    LValue::Var(v) => LValue::Var(self.rebind(st, v, f)),
                    LValue::Index(v, idx) => LValue::Index(self.rebind(st, v, f), self.rewrite(st, idx, f)),
                };
                let value = self.rewrite(st, value, f);
                self.push_step(st, Stmt::new(s.id, s.span, StmtKind::Assign { target, value }), s.id, None);
            }
            StmtKind::Expr(e) => {
                let lifted = hoisted(&[e], self.program, self.cfg);
                if !lifted.iter().any(|c| c.id == e.id) {
                    let e = self.rewrite(st, e, f);
                    self.push_step(st, Stmt::new(s.id, s.span, StmtKind::Expr(e)), s.id, None);
                }
            }
            StmtKind::Return(value) => {
                let value = value.as_ref().map(|e| self.rewrite(st, e, f));
                if f == 0 {
                    self.push_step(st, Stmt::new(s.id, s.span, StmtKind::Return(value)), s.id, None);
                    return true;
                }
                let func = st.frames[f].func;
                let (caller, site) = st.frames[f].caller.expect("callee frame has a caller");
                if let (Some(v), Some(ty)) = (value, &func.ret) {
                    let i = st.fresh();
                    st.frames[caller].map.insert(site, i);
                    let kind = StmtKind::Decl { ty: ty.clone(), name: format!("{}_ret", func.name), init: Some(v) };
                    self.push_step(st, Stmt::new(s.id, s.span, kind), s.id, Some(i));
                }
                while let Some(w) = st.work.pop() {
                    if matches!(w, Work::FrameEnd(g) if g == f) {
                        break;
                    }
                }
                st.frames[f].active = false;
            }
            _ => unreachable!("not a simple statement"),
        }
        false
    }

    /// Returns false when inlining would exceed the recursion bound.
    fn call(&self, st: &mut State<'p>, c: &'p Expr, f: usize) -> bool {
        let ExprKind::Call { name, args } = &c.kind else { unreachable!("not a call") };
        let callee = self.program.function(name).expect("hoisted calls target user functions");
        let args: Vec<Expr> = args.iter().map(|a| self.rewrite(st, a, f)).collect();
        if self.cfg.is_symbolic(name) && self.sites.contains(&c.id) {
            let depth = st.frames.iter().skip(1).filter(|fr| fr.active && fr.func.name == *name).count();
            if depth >= self.cfg.recursion_bound as usize {
                st.bound = true;
                return false;
            }
            let g = st.frames.len();
            st.frames.push(Frame { func: callee, map: BTreeMap::new(), caller: Some((f, c.id)), active: true });
            for (p, a) in callee.params.iter().zip(args) {
                let i = st.fresh();
                st.frames[g].map.insert(p.id, i);
                let kind = StmtKind::Decl { ty: p.ty.clone(), name: p.name.clone(), init: Some(a) };
                self.push_step(st, Stmt::new(p.id, c.span, kind), p.id, Some(i));
            }
            st.work.push(Work::FrameEnd(g));
            st.work.push(Work::Stmt(&callee.body, g));
        } else {
            let call = Expr::new(c.id, c.span, ExprKind::Call { name: name.clone(), args });
            match &callee.ret {
                Some(ty) => {
                    let i = st.fresh();
                    st.frames[f].map.insert(c.id, i);
                    let kind = StmtKind::Decl { ty: ty.clone(), name: format!("{name}_ret"), init: Some(call) };
                    self.push_step(st, Stmt::new(c.id, c.span, kind), c.id, Some(i));
                }
                None => self.push_step(st, Stmt::new(c.id, c.span, StmtKind::Expr(call)), c.id, None),
            }
        }
        true
    }

    fn finish(&mut self, st: State<'p>) {
        let params = self
            .entry
            .params
            .iter()
            .map(|p| ParamSlot { name: p.name.clone(), ty: p.ty.clone(), instance: st.frames[0].map[&p.id] })
            .collect();
        let v = PathVariant {
            id: self.paths.len() as u32,
            entry: self.entry.name.clone(),
            params,
            steps: st.steps,
            bound_exceeded: st.bound,
            pruned_infeasible: st.pruned,
        };
        self.paths.push(rename_variables(&v, self.program));
    }
}
