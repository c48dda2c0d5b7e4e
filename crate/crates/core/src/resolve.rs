//! Name resolution and type checking.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ast::*;
use crate::builtins;
use crate::error::ParseError;

struct Sig {
    params: Vec<Type>,
    ret: Option<Type>,
}

struct Resolver {
    fields: BTreeMap<String, Type>,
    functions: BTreeMap<String, Sig>,
    scopes: Vec<BTreeMap<String, (NodeId, Type)>>,
    ret: Option<Type>,
}

fn type_err(span: Span, found: impl ToString, expected: impl ToString) -> ParseError {
    ParseError::Type { span, found: found.to_string(), expected: expected.to_string() }
}

fn show(t: &Option<Type>) -> String {
    t.as_ref().map_or_else(|| String::from("void"), |t| t.to_string())
}

/// Resolve every name in `program` and check types. Variable references are
/// rewritten in place to point at their declaration.
pub fn resolve(program: &mut Program) -> Result<(), ParseError> {
    let mut r = Resolver { fields: BTreeMap::new(), functions: BTreeMap::new(), scopes: Vec::new(), ret: None };
    for f in &program.functions {
        if r.functions.contains_key(&f.name) || builtins::is_builtin_function(&f.name) {
            return Err(type_err(f.span, format!("duplicate function `{}`", f.name), "unique function name"));
        }
        r.functions.insert(
            f.name.clone(),
            Sig { params: f.params.iter().map(|p| p.ty.clone()).collect(), ret: f.ret.clone() },
        );
    }
    for field in &mut program.fields {
        if r.fields.contains_key(&field.name) {
            return Err(type_err(field.span, format!("duplicate field `{}`", field.name), "unique field name"));
        }
        if let Some(init) = &mut field.init {
            let t = r.expr(init)?;
            r.assignable(&field.ty, &t, init.span)?;
        }
        r.fields.insert(field.name.clone(), field.ty.clone());
    }
    for f in &mut program.functions {
        r.ret = f.ret.clone();
        let mut scope = BTreeMap::new();
        for p in &f.params {
            if scope.insert(p.name.clone(), (p.id, p.ty.clone())).is_some() {
                return Err(type_err(f.span, format!("duplicate parameter `{}`", p.name), "unique parameter name"));
            }
        }
        r.scopes = alloc::vec![scope];
        r.stmt(&mut f.body)?;
        if f.ret.is_some() && !always_returns(&f.body) {
            return Err(type_err(f.span, format!("`{}` may end without returning", f.name), "return statement"));
        }
    }
    Ok(())
}

/// Conservative check that control cannot fall off the end of `s`.
fn always_returns(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Return(_) => true,
        StmtKind::Block(stmts) => stmts.iter().any(always_returns),
        StmtKind::If { then_branch, else_branch: Some(e), .. } => always_returns(then_branch) && always_returns(e),
        StmtKind::While { cond, .. } => cond.as_bool() == Some(true),
        StmtKind::For { cond, .. } => cond.as_ref().is_none_or(|c| c.as_bool() == Some(true)),
        StmtKind::DoWhile { body, cond } => always_returns(body) || cond.as_bool() == Some(true),
        _ => false,
    }
}

impl Resolver {
    fn lookup(&self, name: &str) -> Option<(Binding, Type)> {
        for scope in self.scopes.iter().rev() {
            if let Some((id, t)) = scope.get(name) {
                return Some((Binding::Local(*id), t.clone()));
            }
        }
        self.fields.get(name).map(|t| (Binding::Field, t.clone()))
    }

    fn var(&self, v: &mut VarRef, span: Span) -> Result<Type, ParseError> {
        let (binding, t) =
            self.lookup(&v.name).ok_or_else(|| ParseError::Resolve { name: v.name.clone(), span })?;
        v.binding = binding;
        Ok(t)
    }

    fn assignable(&self, to: &Type, from: &Option<Type>, span: Span) -> Result<(), ParseError> {
        match from {
            Some(f) if to.accepts(f) => Ok(()),
            _ => Err(type_err(span, show(from), to)),
        }
    }

    fn bool_cond(&mut self, e: &mut Expr) -> Result<(), ParseError> {
        let t = self.expr(e)?;
        if t != Some(Type::Boolean) {
            return Err(type_err(e.span, show(&t), "boolean"));
        }
        Ok(())
    }

    fn scoped(&mut self, s: &mut Stmt) -> Result<(), ParseError> {
        self.scopes.push(BTreeMap::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    fn stmt(&mut self, s: &mut Stmt) -> Result<(), ParseError> {
        let span = s.span;
        match &mut s.kind {
            StmtKind::Decl { ty, name, init } => {
                if let Some(init) = init {
                    let t = self.expr(init)?;
                    self.assignable(ty, &t, init.span)?;
                }
                if self.scopes.iter().any(|sc| sc.contains_key(name.as_str())) {
                    return Err(type_err(span, format!("redeclaration of `{name}`"), "fresh local name"));
                }
                let scope = self.scopes.last_mut().expect("function scope");
                scope.insert(name.clone(), (s.id, ty.clone()));
            }
            StmtKind::Assign { target, value } => {
                let vt = self.expr(value)?;
                let slot = match target {
                    LValue::Var(v) => self.var(v, span)?,
                    LValue::Index(v, idx) => {
                        let it = self.expr(idx)?;
                        self.assignable(&Type::Int, &it, idx.span)?;
                        match self.var(v, span)? {
                            Type::Array(elem) => *elem,
                            other => return Err(type_err(span, other, "array")),
                        }
                    }
                };
                self.assignable(&slot, &vt, value.span)?;
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.bool_cond(cond)?;
                self.scoped(then_branch)?;
                if let Some(e) = else_branch {
                    self.scoped(e)?;
                }
            }
            StmtKind::While { cond, body } => {
                self.bool_cond(cond)?;
                self.scoped(body)?;
            }
            StmtKind::DoWhile { body, cond } => {
                self.scoped(body)?;
                self.bool_cond(cond)?;
            }
            StmtKind::For { init, cond, update, body } => {
                self.scopes.push(BTreeMap::new());
                let r = (|| {
                    if let Some(i) = init {
                        self.stmt(i)?;
                    }
                    if let Some(c) = cond {
                        self.bool_cond(c)?;
                    }
                    if let Some(u) = update {
                        self.stmt(u)?;
                    }
                    self.scoped(body)
                })();
                self.scopes.pop();
                r?;
            }
            StmtKind::Return(value) => {
                let ret = self.ret.clone();
                match (value, ret) {
                    (None, None) => {}
                    (Some(e), Some(rt)) => {
                        let t = self.expr(e)?;
                        self.assignable(&rt, &t, e.span)?;
                    }
                    (None, Some(rt)) => return Err(type_err(span, "void", rt)),
                    (Some(e), None) => return Err(type_err(e.span, "value", "void")),
                }
            }
            StmtKind::Block(stmts) => {
                self.scopes.push(BTreeMap::new());
                let r = stmts.iter_mut().try_for_each(|st| self.stmt(st));
                self.scopes.pop();
                r?;
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Assert { cond, .. } => self.bool_cond(cond)?,
        }
        Ok(())
    }

    fn expr(&mut self, e: &mut Expr) -> Result<Option<Type>, ParseError> {
        let span = e.span;
        let t = match &mut e.kind {
            ExprKind::Int(_) => Type::Int,
            ExprKind::Double(_) => Type::Double,
            ExprKind::Bool(_) => Type::Boolean,
            ExprKind::Str(_) => Type::Str,
            ExprKind::Char(_) => Type::Char,
            ExprKind::Var(v) => self.var(v, span)?,
            ExprKind::Unary(op, operand) => {
                let t = self.expr(operand)?;
                match (op, &t) {
                    (UnaryOp::Neg, Some(Type::Double)) => Type::Double,
                    (UnaryOp::Neg, Some(Type::Int | Type::Char)) => Type::Int,
                    (UnaryOp::Not, Some(Type::Boolean)) => Type::Boolean,
                    (UnaryOp::Neg, _) => return Err(type_err(span, show(&t), "numeric operand")),
                    (UnaryOp::Not, _) => return Err(type_err(span, show(&t), "boolean")),
                }
            }
            ExprKind::Binary(op, l, r) => {
                let op = *op;
                let lt = self.expr(l)?;
                let rt = self.expr(r)?;
                binary_type(op, &lt, &rt).ok_or_else(|| {
                    type_err(span, format!("{} {} {}", show(&lt), op.symbol(), show(&rt)), "compatible operands")
                })?
            }
            ExprKind::Call { name, args } => {
                let mut arg_types = Vec::with_capacity(args.len());
                for a in args.iter_mut() {
                    let t = self.expr(a)?;
                    arg_types.push(t.ok_or_else(|| type_err(a.span, "void", "value"))?);
                }
                if let Some(sig) = self.functions.get(name.as_str()) {
                    if sig.params.len() != arg_types.len() {
                        return Err(type_err(
                            span,
                            format!("{} arguments", arg_types.len()),
                            format!("{} arguments to `{name}`", sig.params.len()),
                        ));
                    }
                    for ((p, a), arg) in sig.params.iter().zip(&arg_types).zip(args.iter()) {
                        if !p.accepts(a) {
                            return Err(type_err(arg.span, a, p));
                        }
                    }
                    return Ok(sig.ret.clone());
                }
                if !builtins::is_builtin_function(name) {
                    return Err(ParseError::Resolve { name: name.clone(), span });
                }
                builtins::function_type(name, &arg_types)
                    .ok_or_else(|| type_err(span, format!("{name}({})", join(&arg_types)), "builtin signature"))?
            }
            ExprKind::Method { receiver, method, args } => {
                let rt = self.expr(receiver)?;
                if rt != Some(Type::Str) {
                    return Err(type_err(receiver.span, show(&rt), "String receiver"));
                }
                let mut arg_types = Vec::with_capacity(args.len());
                for a in args.iter_mut() {
                    let t = self.expr(a)?;
                    arg_types.push(t.ok_or_else(|| type_err(a.span, "void", "value"))?);
                }
                builtins::method_type(method, &arg_types).ok_or_else(|| {
                    type_err(span, format!("String.{method}({})", join(&arg_types)), "known String method")
                })?
            }
            ExprKind::Index(base, idx) => {
                let bt = self.expr(base)?;
                let it = self.expr(idx)?;
                self.assignable(&Type::Int, &it, idx.span)?;
                match bt {
                    Some(Type::Array(elem)) => *elem,
                    other => return Err(type_err(base.span, show(&other), "array")),
                }
            }
            ExprKind::Len(base) => match self.expr(base)? {
                Some(Type::Array(_)) => Type::Int,
                other => return Err(type_err(base.span, show(&other), "array")),
            },
            ExprKind::NewArray(elem, size) => {
                let st = self.expr(size)?;
                self.assignable(&Type::Int, &st, size.span)?;
                Type::array_of(elem.clone())
            }
        };
        Ok(Some(t))
    }
}

fn join(ts: &[Type]) -> String {
    let parts: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
    parts.join(", ")
}

pub(crate) fn binary_type(op: BinOp, l: &Option<Type>, r: &Option<Type>) -> Option<Type> {
    let (l, r) = (l.as_ref()?, r.as_ref()?);
    let numeric = l.is_numeric() && r.is_numeric();
    match op {
        BinOp::Add if *l == Type::Str || *r == Type::Str => {
            (!matches!(l, Type::Array(_)) && !matches!(r, Type::Array(_))).then_some(Type::Str)
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem if numeric => {
            Some(if *l == Type::Double || *r == Type::Double { Type::Double } else { Type::Int })
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge if numeric => Some(Type::Boolean),
        BinOp::Eq | BinOp::Ne
            if numeric || (l == r && matches!(l, Type::Boolean | Type::Str)) =>
        {
            Some(Type::Boolean)
        }
        BinOp::And | BinOp::Or if *l == Type::Boolean && *r == Type::Boolean => Some(Type::Boolean),
        _ => None,
    }
}
