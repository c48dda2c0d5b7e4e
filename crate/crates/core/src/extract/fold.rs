//! Constant propagation and folding along a single path.
//!
//! Only int, boolean and char locals are propagated. Doubles and strings are
//! left alone, and so are fields, which opaque calls may modify.

use alloc::collections::BTreeMap;

use super::{PathVariant, Step};
use crate::ast::*;
use crate::value::{self, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Folded {
    Kept,
    /// An assertion that always holds on this path.
    Holds,
    /// An assertion that can never hold on this path.
    Fails,
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Folder {
    consts: BTreeMap<u32, Value>,
    types: BTreeMap<u32, Type>,
}

fn propagated(ty: &Type) -> bool {
    matches!(ty, Type::Int | Type::Boolean | Type::Char)
}

fn literal_value(e: &Expr) -> Option<Value> {
    match e.kind {
        ExprKind::Int(v) => Some(Value::Int(v)),
        ExprKind::Bool(b) => Some(Value::Bool(b)),
        ExprKind::Char(c) => Some(Value::Char(c)),
        _ => None,
    }
}

fn literal_expr(v: &Value) -> Option<Expr> {
    let kind = match v {
        Value::Int(v) => ExprKind::Int(*v),
        Value::Bool(b) => ExprKind::Bool(*b),
        Value::Char(c) => ExprKind::Char(*c),
        _ => return None,
    };
    Some(Expr::new(NodeId::default(), Span::default(), kind))
}

impl Folder {
    pub(crate) fn declare(&mut self, instance: u32, ty: &Type) {
        self.types.insert(instance, ty.clone());
        self.consts.remove(&instance);
    }

    fn set(&mut self, instance: u32, value: Option<&Expr>) {
        let ty = self.types.get(&instance);
        match (ty, value.and_then(literal_value)) {
            (Some(ty), Some(v)) if propagated(ty) => {
                self.consts.insert(instance, v.coerce(ty));
            }
            _ => {
                self.consts.remove(&instance);
            }
        }
    }

    pub(crate) fn expr(&self, e: &Expr) -> Expr {
        let mut out = e.clone();
        self.fold_in_place(&mut out);
        out
    }

    fn fold_in_place(&self, e: &mut Expr) {
        let replacement = match &mut e.kind {
            ExprKind::Var(VarRef { binding: Binding::Instance(i), .. }) => {
                self.consts.get(i).and_then(literal_expr)
            }
            ExprKind::Unary(op, x) => {
                self.fold_in_place(x);
                literal_value(x).and_then(|v| value::unary(*op, &v)).and_then(|v| literal_expr(&v))
            }
            ExprKind::Binary(op, l, r) if op.is_short_circuit() => {
                self.fold_in_place(l);
                self.fold_in_place(r);
                match (op, l.as_bool()) {
                    (BinOp::And, Some(false)) | (BinOp::Or, Some(true)) => Some((**l).clone()),
                    (_, Some(_)) => Some((**r).clone()),
                    _ => None,
                }
            }
            ExprKind::Binary(op, l, r) => {
                self.fold_in_place(l);
                self.fold_in_place(r);
                match (literal_value(l), literal_value(r)) {
                    (Some(a), Some(b)) => match value::binary(*op, &a, &b) {
                        Ok(Some(v)) => literal_expr(&v),
                        _ => None,
                    },
                    _ => None,
                }
            }
            ExprKind::Call { args, .. } => {
                args.iter_mut().for_each(|a| self.fold_in_place(a));
                None
            }
            ExprKind::Method { receiver, args, .. } => {
                self.fold_in_place(receiver);
                args.iter_mut().for_each(|a| self.fold_in_place(a));
                None
            }
            ExprKind::Index(a, b) => {
                self.fold_in_place(a);
                self.fold_in_place(b);
                None
            }
            ExprKind::Len(a) | ExprKind::NewArray(_, a) => {
                self.fold_in_place(a);
                None
            }
            _ => None,
        };
        if let Some(mut r) = replacement {
            // Keep the identity of the folded node.
            r.id = e.id;
            r.span = e.span;
            *e = r;
        }
    }

    /// Fold one step in place and update the propagated constants.
    pub(crate) fn step(&mut self, step: &mut Step) -> Folded {
        match &mut step.stmt.kind {
            StmtKind::Decl { ty, init, .. } => {
                if let Some(e) = init.as_mut() {
                    *e = self.expr(e);
                }
                if let Some(i) = step.binds {
                    self.declare(i, ty);
                    match init {
                        Some(e) => self.set(i, Some(e)),
                        None => {
                            if propagated(ty) {
                                self.consts.insert(i, Value::default_for(ty));
                            }
                        }
                    }
                }
            }
            StmtKind::Assign { target, value } => {
                *value = self.expr(value);
                match target {
                    LValue::Var(VarRef { binding: Binding::Instance(i), .. }) => {
                        let i = *i;
                        self.set(i, Some(value));
                    }
                    LValue::Index(_, idx) => *idx = self.expr(idx),
                    LValue::Var(_) => {}
                }
            }
            StmtKind::Expr(e) => *e = self.expr(e),
            StmtKind::Return(Some(e)) => *e = self.expr(e),
            StmtKind::Assert { cond, expected } => {
                let folded = self.expr(cond);
                match folded.as_bool() {
                    // Constant assertions keep their unfolded text so the
                    // reason for the verdict stays readable.
                    Some(b) if b == *expected => {
                        step.visible = false;
                        return Folded::Holds;
                    }
                    Some(_) => return Folded::Fails,
                    None => *cond = folded,
                }
            }
            _ => {}
        }
        Folded::Kept
    }
}

/// Fold a whole variant: propagate constants forward, hide assertions that
/// always hold and flag the path infeasible if one can never hold.
pub fn fold_constants(variant: &PathVariant) -> PathVariant {
    let mut out = variant.clone();
    let mut folder = Folder::default();
    for p in &out.params {
        folder.declare(p.instance, &p.ty);
    }
    for step in &mut out.steps {
        if folder.step(step) == Folded::Fails {
            out.pruned_infeasible = true;
        }
    }
    out
}
