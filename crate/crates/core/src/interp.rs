//! Tree-walking interpreter for programs and path variants.
//!
//! Executions record a trace of every evaluated branch condition and every
//! user-function call, plus the set of source lines that ran. Path variants are
//! executed step by step; an `assertTrue`/`assertFalse` step whose condition
//! disagrees halts the run with the first violated assertion.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Serialize, Serializer};

use crate::ast::*;
use crate::builtins;
use crate::extract::PathVariant;
use crate::pretty;
use crate::testcase::TestCase;
use crate::value::{self, RuntimeErrorKind, Value};

pub const DEFAULT_STEP_LIMIT: u64 = 100_000;
pub const MAX_CALL_DEPTH: u32 = 256;
/// Native stack the interpreter may consume for nested calls before it
/// reports `CallDepthExceeded`. Unoptimized builds use several kilobytes per
/// subject-language frame, so deep recursion can hit this before
/// `MAX_CALL_DEPTH`.
pub const DEFAULT_STACK_BUDGET: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecOptions {
    pub step_limit: u64,
    pub stack_budget: usize,
}

impl Default for ExecOptions {
    fn default() -> Self {
        ExecOptions { step_limit: DEFAULT_STEP_LIMIT, stack_budget: DEFAULT_STACK_BUDGET }
    }
}

#[inline(always)]
fn stack_address() -> usize {
    let marker = 0u8;
    core::hint::black_box(&marker) as *const u8 as usize
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "camelCase")]
pub enum TraceEvent {
    /// A branch condition was evaluated. `node` is the condition expression
    /// (for a `for` without condition, the loop statement itself).
    Branch { node: NodeId, outcome: bool },
    Enter { site: NodeId, callee: String },
    Exit { site: NodeId },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "camelCase")]
pub enum Outcome {
    Returned {
        #[serde(serialize_with = "literal_opt")]
        value: Option<Value>,
    },
    #[serde(rename_all = "camelCase")]
    AssertionViolated { step: usize, text: String, expected: bool, provenance: NodeId },
    RuntimeError { error: RuntimeErrorKind, span: Span },
    StepLimitExceeded,
}

fn literal_opt<S: Serializer>(v: &Option<Value>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(v) => s.collect_str(v),
        None => s.serialize_none(),
    }
}

impl Outcome {
    pub fn returned(&self) -> Option<&Option<Value>> {
        match self {
            Outcome::Returned { value } => Some(value),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExecResult {
    #[serde(flatten)]
    pub outcome: Outcome,
    pub trace: Vec<TraceEvent>,
    pub lines: BTreeSet<u32>,
}

/// Run the test's function in the original program.
pub fn run_program(program: &Program, test: &TestCase, opts: ExecOptions) -> ExecResult {
    let mut m = Machine::new(program, opts);
    let outcome = m.init_fields().and_then(|()| {
        let Some(func) = program.function(&test.function) else {
            return Err(Halt::Error(RuntimeErrorKind::UnknownFunction { name: test.function.clone() }, Span::default()));
        };
        m.invoke(func, test.args.clone(), func.body.span)
    });
    m.finish(outcome.map(|v| Outcome::Returned { value: v }))
}

/// Run a path variant of `program`'s entry function on the test's arguments.
///
/// Calls that were not inlined into the variant execute with the semantics of
/// the original program.
pub fn run_variant(program: &Program, variant: &PathVariant, test: &TestCase, opts: ExecOptions) -> ExecResult {
    let mut m = Machine::new(program, opts);
    let outcome = m.init_fields().and_then(|()| {
        let mut frame = Frame::new();
        for (slot, arg) in variant.params.iter().zip(test.args.iter().cloned()) {
            frame.insert(Binding::Instance(slot.instance), arg.coerce(&slot.ty));
        }
        m.steps_of(variant, &mut frame)
    });
    m.finish(outcome)
}

type Frame = BTreeMap<Binding, Value>;

enum Halt {
    Error(RuntimeErrorKind, Span),
    StepLimit,
    Assert { step: usize, text: String, expected: bool, provenance: NodeId },
}

enum Flow {
    Next,
    Return(Option<Value>),
}

struct Machine<'p> {
    program: &'p Program,
    fields: BTreeMap<String, Value>,
    trace: Vec<TraceEvent>,
    lines: BTreeSet<u32>,
    steps: u64,
    limit: u64,
    depth: u32,
    stack_base: Option<usize>,
    stack_budget: usize,
    tracing: bool,
}

/// Key of the condition node recorded for a branch statement.
pub fn condition_id(s: &Stmt) -> Option<NodeId> {
    match &s.kind {
        StmtKind::If { cond, .. } | StmtKind::While { cond, .. } | StmtKind::DoWhile { cond, .. } => Some(cond.id),
        StmtKind::For { cond, .. } => Some(cond.as_ref().map_or(s.id, |c| c.id)),
        _ => None,
    }
}

impl<'p> Machine<'p> {
    fn new(program: &'p Program, opts: ExecOptions) -> Self {
        Machine {
            program,
            fields: BTreeMap::new(),
            trace: Vec::new(),
            lines: BTreeSet::new(),
            steps: 0,
            limit: opts.step_limit,
            depth: 0,
            stack_base: None,
            stack_budget: opts.stack_budget,
            tracing: true,
        }
    }

    fn finish(self, outcome: Result<Outcome, Halt>) -> ExecResult {
        let outcome = match outcome {
            Ok(o) => o,
            Err(Halt::Error(error, span)) => Outcome::RuntimeError { error, span },
            Err(Halt::StepLimit) => Outcome::StepLimitExceeded,
            Err(Halt::Assert { step, text, expected, provenance }) => {
                Outcome::AssertionViolated { step, text, expected, provenance }
            }
        };
        ExecResult { outcome, trace: self.trace, lines: self.lines }
    }

    fn init_fields(&mut self) -> Result<(), Halt> {
        self.tracing = false;
        let mut empty = Frame::new();
        for f in &self.program.fields {
            let v = match &f.init {
                Some(e) => self.eval(e, &mut empty)?.coerce(&f.ty),
                None => Value::default_for(&f.ty),
            };
            self.fields.insert(f.name.clone(), v);
        }
        self.tracing = true;
        Ok(())
    }

    fn tick(&mut self) -> Result<(), Halt> {
        self.tick_n(1)
    }

    fn tick_n(&mut self, n: u64) -> Result<(), Halt> {
        self.steps = self.steps.saturating_add(n);
        if self.steps > self.limit {
            Err(Halt::StepLimit)
        } else {
            Ok(())
        }
    }

    fn line(&mut self, span: Span) {
        if self.tracing {
            self.lines.insert(span.line);
        }
    }

    fn invoke(&mut self, func: &FunctionDecl, args: Vec<Value>, span: Span) -> Result<Option<Value>, Halt> {
        let here = stack_address();
        let base = *self.stack_base.get_or_insert(here);
        if self.depth >= MAX_CALL_DEPTH || base.abs_diff(here) > self.stack_budget {
            return Err(Halt::Error(RuntimeErrorKind::CallDepthExceeded, span));
        }
        self.depth += 1;
        let mut frame = bind_params(func, args);
        let flow = self.exec(&func.body, &mut frame)?;
        self.depth -= 1;
        returned_value(func, flow)
    }

    fn condition(&mut self, cond: Option<&Expr>, node: NodeId, span: Span, frame: &mut Frame) -> Result<bool, Halt> {
        self.tick()?;
        self.line(span);
        let b = match cond {
            Some(e) => self.eval(e, frame)?.as_bool().unwrap_or(false),
            None => true,
        };
        if self.tracing {
            self.trace.push(TraceEvent::Branch { node, outcome: b });
        }
        Ok(b)
    }

    // `exec`, `simple` and `eval` are thin dispatchers: every arm lives in
    // its own non-inlined function, so a recursion through them only keeps
    // the frames of the arms actually taken on the stack. Unoptimized builds
    // otherwise reserve room for all arms at once, and deep subject-program
    // recursion then needs several megabytes of native stack.

    fn exec(&mut self, s: &Stmt, frame: &mut Frame) -> Result<Flow, Halt> {
        match &s.kind {
            StmtKind::Block(stmts) => self.block(stmts, frame),
            StmtKind::If { cond, then_branch, else_branch } => self.if_stmt(cond, then_branch, else_branch.as_deref(), frame),
            StmtKind::While { cond, body } => self.while_loop(cond, body, frame),
            StmtKind::DoWhile { body, cond } => self.do_while(body, cond, frame),
            StmtKind::For { .. } => self.for_loop(s, frame),
            _ => self.simple(s, Binding::Local(s.id), frame),
        }
    }

    #[inline(never)]
    fn block(&mut self, stmts: &[Stmt], frame: &mut Frame) -> Result<Flow, Halt> {
        for st in stmts {
            if let Flow::Return(v) = self.exec(st, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    #[inline(never)]
    fn if_stmt(&mut self, cond: &Expr, then_branch: &Stmt, else_branch: Option<&Stmt>, frame: &mut Frame) -> Result<Flow, Halt> {
        if self.condition(Some(cond), cond.id, cond.span, frame)? {
            self.exec(then_branch, frame)
        } else if let Some(e) = else_branch {
            self.exec(e, frame)
        } else {
            Ok(Flow::Next)
        }
    }

    #[inline(never)]
    fn while_loop(&mut self, cond: &Expr, body: &Stmt, frame: &mut Frame) -> Result<Flow, Halt> {
        while self.condition(Some(cond), cond.id, cond.span, frame)? {
            if let Flow::Return(v) = self.exec(body, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    #[inline(never)]
    fn do_while(&mut self, body: &Stmt, cond: &Expr, frame: &mut Frame) -> Result<Flow, Halt> {
        loop {
            if let Flow::Return(v) = self.exec(body, frame)? {
                return Ok(Flow::Return(v));
            }
            if !self.condition(Some(cond), cond.id, cond.span, frame)? {
                return Ok(Flow::Next);
            }
        }
    }

    #[inline(never)]
    fn for_loop(&mut self, s: &Stmt, frame: &mut Frame) -> Result<Flow, Halt> {
        let StmtKind::For { init, cond, update, body } = &s.kind else { unreachable!("not a for loop") };
        if let Some(i) = init {
            self.exec(i, frame)?;
        }
        let node = condition_id(s).unwrap_or(s.id);
        let span = cond.as_ref().map_or(s.span, |c| c.span);
        while self.condition(cond.as_ref(), node, span, frame)? {
            if let Flow::Return(v) = self.exec(body, frame)? {
                return Ok(Flow::Return(v));
            }
            if let Some(u) = update {
                self.exec(u, frame)?;
            }
        }
        Ok(Flow::Next)
    }

    /// Declarations, assignments, expression statements and returns.
    /// `slot` is where a declaration stores its value.
    fn simple(&mut self, s: &Stmt, slot: Binding, frame: &mut Frame) -> Result<Flow, Halt> {
        self.tick()?;
        self.line(s.span);
        match &s.kind {
            StmtKind::Decl { ty, init, .. } => self.declare(ty, init.as_ref(), slot, frame)?,
            StmtKind::Assign { target: LValue::Var(var), value } => self.assign(var, value, frame)?,
            StmtKind::Assign { target: LValue::Index(var, idx), value } => self.assign_index(var, idx, value, frame)?,
            StmtKind::Expr(e) => self.eval(e, frame).map(drop)?,
            StmtKind::Return(e) => return self.ret(e.as_ref(), frame),
            _ => unreachable!("not a simple statement"),
        }
        Ok(Flow::Next)
    }

    #[inline(never)]
    fn ret(&mut self, e: Option<&Expr>, frame: &mut Frame) -> Result<Flow, Halt> {
        match e {
            Some(e) => Ok(Flow::Return(Some(self.eval(e, frame)?))),
            None => Ok(Flow::Return(None)),
        }
    }

    #[inline(never)]
    fn declare(&mut self, ty: &Type, init: Option<&Expr>, slot: Binding, frame: &mut Frame) -> Result<(), Halt> {
        let v = match init {
            Some(e) => self.eval(e, frame)?.coerce(ty),
            None => Value::default_for(ty),
        };
        frame.insert(slot, v);
        Ok(())
    }

    #[inline(never)]
    fn assign(&mut self, var: &VarRef, value: &Expr, frame: &mut Frame) -> Result<(), Halt> {
        let v = self.eval(value, frame)?;
        let cell = self.lookup_mut(var, frame);
        let ty = cell.type_of();
        *cell = v.coerce(&ty);
        Ok(())
    }

    #[inline(never)]
    fn assign_index(&mut self, var: &VarRef, idx: &Expr, value: &Expr, frame: &mut Frame) -> Result<(), Halt> {
        let i = self.eval(idx, frame)?.as_int().unwrap_or(0);
        let v = self.eval(value, frame)?;
        let Value::Array(items) = self.lookup_mut(var, frame) else {
            unreachable!("indexed assignment to a non-array");
        };
        let len = items.len();
        let Some(cell) = usize::try_from(i).ok().and_then(|i| items.get_mut(i)) else {
            return Err(Halt::Error(RuntimeErrorKind::IndexOutOfBounds { index: i, len }, idx.span));
        };
        let ty = cell.type_of();
        *cell = v.coerce(&ty);
        Ok(())
    }

    fn steps_of(&mut self, variant: &PathVariant, frame: &mut Frame) -> Result<Outcome, Halt> {
        for (index, step) in variant.steps.iter().enumerate() {
            match &step.stmt.kind {
                StmtKind::Assert { cond, expected } => {
                    self.tick()?;
                    let b = self.eval(cond, frame)?.as_bool().unwrap_or(false);
                    if b != *expected {
                        return Err(Halt::Assert {
                            step: index,
                            text: assertion_text(cond, *expected),
                            expected: *expected,
                            provenance: step.provenance,
                        });
                    }
                }
                _ => {
                    let slot = step.binds.map_or(Binding::Local(step.stmt.id), Binding::Instance);
                    if let Flow::Return(v) = self.simple(&step.stmt, slot, frame)? {
                        let ret = self.program.function(&variant.entry).and_then(|f| f.ret.clone());
                        return Ok(Outcome::Returned { value: v.map(|v| ret.map_or(v.clone(), |t| v.coerce(&t))) });
                    }
                }
            }
        }
        Ok(Outcome::Returned { value: None })
    }

    fn lookup(&self, var: &VarRef, frame: &Frame) -> Value {
        let v = match var.binding {
            Binding::Field => self.fields.get(&var.name),
            b => frame.get(&b),
        };
        v.cloned().unwrap_or_else(|| panic!("unbound variable `{}`", var.name))
    }

    fn lookup_mut<'a>(&'a mut self, var: &VarRef, frame: &'a mut Frame) -> &'a mut Value {
        let v = match var.binding {
            Binding::Field => self.fields.get_mut(&var.name),
            b => frame.get_mut(&b),
        };
        v.unwrap_or_else(|| panic!("unbound variable `{}`", var.name))
    }

    fn eval(&mut self, e: &Expr, frame: &mut Frame) -> Result<Value, Halt> {
        match &e.kind {
            ExprKind::Int(v) => Ok(Value::Int(*v)),
            ExprKind::Double(v) => Ok(Value::Double(*v)),
            ExprKind::Bool(b) => Ok(Value::Bool(*b)),
            ExprKind::Str(s) => Ok(Value::Str(s.clone())),
            ExprKind::Char(c) => Ok(Value::Char(*c)),
            ExprKind::Var(v) => Ok(self.lookup(v, frame)),
            ExprKind::Unary(op, x) => self.unary(*op, x, frame),
            ExprKind::Binary(op, l, r) if op.is_short_circuit() => self.short_circuit(*op, l, r, frame),
            ExprKind::Binary(op, l, r) => self.binary(e, *op, l, r, frame),
            ExprKind::Call { name, args } => self.call(e, name, args, frame),
            ExprKind::Method { receiver, method, args } => self.method(e, receiver, method, args, frame),
            ExprKind::Index(base, idx) => self.index(e, base, idx, frame),
            ExprKind::Len(base) => self.len(base, frame),
            ExprKind::NewArray(ty, size) => self.new_array(e, ty, size, frame),
        }
    }

    #[inline(never)]
    fn unary(&mut self, op: UnaryOp, x: &Expr, frame: &mut Frame) -> Result<Value, Halt> {
        let v = self.eval(x, frame)?;
        Ok(value::unary(op, &v).expect("operand type checked"))
    }

    #[inline(never)]
    fn short_circuit(&mut self, op: BinOp, l: &Expr, r: &Expr, frame: &mut Frame) -> Result<Value, Halt> {
        let lv = self.eval(l, frame)?.as_bool().unwrap_or(false);
        Ok(match (op, lv) {
            (BinOp::And, false) => Value::Bool(false),
            (BinOp::Or, true) => Value::Bool(true),
            _ => Value::Bool(self.eval(r, frame)?.as_bool().unwrap_or(false)),
        })
    }

    #[inline(never)]
    fn binary(&mut self, e: &Expr, op: BinOp, l: &Expr, r: &Expr, frame: &mut Frame) -> Result<Value, Halt> {
        let lv = self.eval(l, frame)?;
        let rv = self.eval(r, frame)?;
        let v = value::binary(op, &lv, &rv).map_err(|k| Halt::Error(k, e.span))?;
        Ok(v.expect("operand types checked"))
    }

    #[inline(never)]
    fn len(&mut self, base: &Expr, frame: &mut Frame) -> Result<Value, Halt> {
        match self.eval(base, frame)? {
            Value::Array(items) => Ok(Value::Int(items.len() as i64)),
            _ => unreachable!("length of a non-array"),
        }
    }

    #[inline(never)]
    fn call(&mut self, e: &Expr, name: &str, args: &[Expr], frame: &mut Frame) -> Result<Value, Halt> {
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, frame)?);
        }
        let Some(func) = self.program.function(name) else {
            return builtins::call_function(name, &vals).map_err(|k| Halt::Error(k, e.span));
        };
        if self.tracing {
            self.trace.push(TraceEvent::Enter { site: e.id, callee: name.into() });
        }
        let v = self.invoke(func, vals, e.span)?;
        if self.tracing {
            self.trace.push(TraceEvent::Exit { site: e.id });
        }
        Ok(v.unwrap_or(Value::Int(0)))
    }

    #[inline(never)]
    fn method(&mut self, e: &Expr, receiver: &Expr, method: &str, args: &[Expr], frame: &mut Frame) -> Result<Value, Halt> {
        let recv = self.eval(receiver, frame)?;
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.eval(a, frame)?);
        }
        builtins::call_method(recv.as_str().unwrap_or(""), method, &vals).map_err(|k| Halt::Error(k, e.span))
    }

    #[inline(never)]
    fn index(&mut self, e: &Expr, base: &Expr, idx: &Expr, frame: &mut Frame) -> Result<Value, Halt> {
        let b = self.eval(base, frame)?;
        let i = self.eval(idx, frame)?.as_int().unwrap_or(0);
        let Value::Array(items) = b else { unreachable!("indexing a non-array") };
        let len = items.len();
        usize::try_from(i)
            .ok()
            .and_then(|i| items.into_iter().nth(i))
            .ok_or(Halt::Error(RuntimeErrorKind::IndexOutOfBounds { index: i, len }, e.span))
    }

    #[inline(never)]
    fn new_array(&mut self, e: &Expr, ty: &Type, size: &Expr, frame: &mut Frame) -> Result<Value, Halt> {
        let n = self.eval(size, frame)?.as_int().unwrap_or(0);
        if n < 0 {
            return Err(Halt::Error(RuntimeErrorKind::NegativeArraySize { size: n }, e.span));
        }
        // Allocation is charged against the step budget.
        self.tick_n(n as u64)?;
        Ok(Value::Array(alloc::vec![Value::default_for(ty); n as usize]))
    }
}

#[inline(never)]
fn bind_params(func: &FunctionDecl, args: Vec<Value>) -> Frame {
    let mut frame = Frame::new();
    for (p, a) in func.params.iter().zip(args) {
        frame.insert(Binding::Local(p.id), a.coerce(&p.ty));
    }
    frame
}

#[inline(never)]
fn returned_value(func: &FunctionDecl, flow: Flow) -> Result<Option<Value>, Halt> {
    match (flow, &func.ret) {
        (Flow::Return(Some(v)), Some(t)) => Ok(Some(v.coerce(t))),
        (_, None) => Ok(None),
        (_, Some(_)) => Err(Halt::Error(RuntimeErrorKind::MissingReturn, func.span)),
    }
}

/// Text of an assertion as reported in verdicts, e.g. `assertTrue(y + z > 0)`.
pub fn assertion_text(cond: &Expr, expected: bool) -> String {
    let mut t = pretty::assert_text(cond, expected);
    t.pop();
    t
}
