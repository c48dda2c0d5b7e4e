//! Canonical source rendering.

use alloc::format;
use alloc::string::String;

use crate::ast::*;
use crate::value::{double_literal, escape};

const INDENT: &str = "    ";

pub fn pretty_print(program: &Program) -> String {
    let mut out = String::new();
    for f in &program.fields {
        out.push_str(&field_text(f));
        out.push('\n');
    }
    for (i, f) in program.functions.iter().enumerate() {
        if i > 0 || !program.fields.is_empty() {
            out.push('\n');
        }
        out.push_str(&function_text(f));
    }
    out
}

pub fn field_text(f: &FieldDecl) -> String {
    match &f.init {
        Some(e) => format!("{} {} = {};", f.ty, f.name, expr_text(e)),
        None => format!("{} {};", f.ty, f.name),
    }
}

pub fn function_text(f: &FunctionDecl) -> String {
    let mut out = f.signature();
    out.push(' ');
    write_stmt(&mut out, &f.body, 0);
    out.push('\n');
    out
}

/// Render a statement at the given indentation depth, without trailing newline.
pub fn stmt_text(s: &Stmt, depth: usize) -> String {
    let mut out = String::new();
    write_stmt(&mut out, s, depth);
    out
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

/// Child statement of a control construct: blocks stay on the same line.
fn write_body(out: &mut String, s: &Stmt, depth: usize) {
    if matches!(s.kind, StmtKind::Block(_)) {
        out.push(' ');
        write_stmt(out, s, depth);
    } else {
        out.push('\n');
        indent(out, depth + 1);
        write_stmt(out, s, depth + 1);
    }
}

fn simple_text(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl { ty, name, init: Some(e) } => format!("{ty} {name} = {}", expr_text(e)),
        StmtKind::Decl { ty, name, init: None } => format!("{ty} {name}"),
        StmtKind::Assign { target, value } => format!("{} = {}", lvalue_text(target), expr_text(value)),
        StmtKind::Expr(e) => expr_text(e),
        _ => {
            let mut out = String::new();
            write_stmt(&mut out, s, 0);
            out
        }
    }
}

fn write_stmt(out: &mut String, s: &Stmt, depth: usize) {
    match &s.kind {
        StmtKind::Decl { .. } | StmtKind::Assign { .. } | StmtKind::Expr(_) => {
            out.push_str(&simple_text(s));
            out.push(';');
        }
        StmtKind::Return(Some(e)) => {
            out.push_str("return ");
            out.push_str(&expr_text(e));
            out.push(';');
        }
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Assert { cond, expected } => {
            out.push_str(&assert_text(cond, *expected));
        }
        StmtKind::Block(stmts) if stmts.is_empty() => out.push_str("{ }"),
        StmtKind::Block(stmts) => {
            out.push_str("{\n");
            for st in stmts {
                indent(out, depth + 1);
                write_stmt(out, st, depth + 1);
                out.push('\n');
            }
            indent(out, depth);
            out.push('}');
        }
        StmtKind::If { cond, then_branch, else_branch } => {
            out.push_str("if (");
            out.push_str(&expr_text(cond));
            out.push(')');
            write_body(out, then_branch, depth);
            if let Some(e) = else_branch {
                if matches!(then_branch.kind, StmtKind::Block(_)) {
                    out.push(' ');
                } else {
                    out.push('\n');
                    indent(out, depth);
                }
                out.push_str("else");
                if matches!(e.kind, StmtKind::If { .. }) {
                    out.push(' ');
                    write_stmt(out, e, depth);
                } else {
                    write_body(out, e, depth);
                }
            }
        }
        StmtKind::While { cond, body } => {
            out.push_str("while (");
            out.push_str(&expr_text(cond));
            out.push(')');
            write_body(out, body, depth);
        }
        StmtKind::DoWhile { body, cond } => {
            out.push_str("do");
            write_body(out, body, depth);
            if matches!(body.kind, StmtKind::Block(_)) {
                out.push(' ');
            } else {
                out.push('\n');
                indent(out, depth);
            }
            out.push_str("while (");
            out.push_str(&expr_text(cond));
            out.push_str(");");
        }
        StmtKind::For { init, cond, update, body } => {
            out.push_str("for (");
            if let Some(i) = init {
                out.push_str(&simple_text(i));
            }
            out.push_str("; ");
            if let Some(c) = cond {
                out.push_str(&expr_text(c));
            }
            out.push_str("; ");
            if let Some(u) = update {
                out.push_str(&simple_text(u));
            }
            out.push(')');
            write_body(out, body, depth);
        }
    }
}

pub fn assert_text(cond: &Expr, expected: bool) -> String {
    let name = if expected { "assertTrue" } else { "assertFalse" };
    format!("{name}({});", expr_text(cond))
}

pub fn lvalue_text(l: &LValue) -> String {
    match l {
        LValue::Var(v) => v.name.clone(),
        LValue::Index(v, idx) => format!("{}[{}]", v.name, expr_text(idx)),
    }
}

pub fn expr_text(e: &Expr) -> String {
    let mut out = String::new();
    write_expr(&mut out, e);
    out
}

const UNARY_PREC: u8 = 7;

fn prec(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Binary(op, ..) => op.precedence(),
        ExprKind::Unary(..) => UNARY_PREC,
        ExprKind::Int(v) if *v < 0 => UNARY_PREC,
        ExprKind::Double(v) if v.is_sign_negative() => UNARY_PREC,
        _ => 8,
    }
}

fn write_operand(out: &mut String, e: &Expr, min: u8) {
    if prec(e) < min {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_args(out: &mut String, args: &[Expr]) {
    out.push('(');
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        write_expr(out, a);
    }
    out.push(')');
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(v) => out.push_str(&format!("{v}")),
        ExprKind::Double(v) => out.push_str(&double_literal(*v)),
        ExprKind::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Str(s) => {
            out.push('"');
            for c in s.chars() {
                out.push_str(&escape(c, '"'));
            }
            out.push('"');
        }
        ExprKind::Char(c) => {
            out.push('\'');
            out.push_str(&escape(*c, '\''));
            out.push('\'');
        }
        ExprKind::Var(v) => out.push_str(&v.name),
        ExprKind::Unary(op, operand) => {
            out.push(match op {
                UnaryOp::Neg => '-',
                UnaryOp::Not => '!',
            });
            let mut inner = String::new();
            write_operand(&mut inner, operand, UNARY_PREC + 1);
            // `- -x` must not lex as `--x`.
            if inner.starts_with('-') {
                out.push('(');
                out.push_str(&inner);
                out.push(')');
            } else {
                out.push_str(&inner);
            }
        }
        ExprKind::Binary(op, l, r) => {
            let p = op.precedence();
            write_operand(out, l, p);
            out.push(' ');
            out.push_str(op.symbol());
            out.push(' ');
            write_operand(out, r, p + 1);
        }
        ExprKind::Call { name, args } => {
            out.push_str(name);
            write_args(out, args);
        }
        ExprKind::Method { receiver, method, args } => {
            write_operand(out, receiver, 8);
            out.push('.');
            out.push_str(method);
            write_args(out, args);
        }
        ExprKind::Index(base, idx) => {
            write_operand(out, base, 8);
            out.push('[');
            write_expr(out, idx);
            out.push(']');
        }
        ExprKind::Len(base) => {
            write_operand(out, base, 8);
            out.push_str(".length");
        }
        ExprKind::NewArray(elem, size) => {
            out.push_str(&format!("new {elem}["));
            write_expr(out, size);
            out.push(']');
        }
    }
}
