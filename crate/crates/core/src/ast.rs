//! Syntax tree of the subject language.
//!
//! Every statement and expression carries a [`NodeId`] that is unique across a
//! program. Ids are assigned in source order by the parser, so reparsing the
//! pretty-printed form of a program yields the same ids.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a syntax node, unique within one program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub const fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Double,
    Boolean,
    Char,
    Str,
    /// One-dimensional array; the element is never itself an array.
    Array(Box<Type>),
}

impl Type {
    pub fn array_of(elem: Type) -> Type {
        Type::Array(Box::new(elem))
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Int | Type::Double | Type::Char)
    }

    /// Whether a value of type `from` may be stored in a slot of this type.
    pub fn accepts(&self, from: &Type) -> bool {
        self == from
            || matches!(
                (self, from),
                (Type::Double, Type::Int) | (Type::Double, Type::Char) | (Type::Int, Type::Char)
            )
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Double => f.write_str("double"),
            Type::Boolean => f.write_str("boolean"),
            Type::Char => f.write_str("char"),
            Type::Str => f.write_str("String"),
            Type::Array(elem) => write!(f, "{elem}[]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding strength; larger binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_short_circuit(self) -> bool {
        matches!(self, BinOp::And | BinOp::Or)
    }
}

/// What a variable reference points at.
///
/// The parser produces `Unresolved`; the resolver rewrites every reference to
/// `Field` or `Local` (the declaring statement or parameter); path extraction
/// finally rewrites locals to per-path `Instance` slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Binding {
    Unresolved,
    Field,
    Local(NodeId),
    Instance(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarRef {
    pub name: String,
    pub binding: Binding,
}

impl VarRef {
    pub fn unresolved(name: impl Into<String>) -> Self {
        VarRef { name: name.into(), binding: Binding::Unresolved }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Expr {
    pub id: NodeId,
    pub span: Span,
    pub kind: ExprKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExprKind {
    Int(i64),
    Double(f64),
    Bool(bool),
    Str(String),
    Char(char),
    Var(VarRef),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    /// Call of a user function or a free builtin (`abs`, `min`, ...).
    Call { name: String, args: Vec<Expr> },
    /// Builtin method on a string receiver.
    Method { receiver: Box<Expr>, method: String, args: Vec<Expr> },
    Index(Box<Expr>, Box<Expr>),
    /// `array.length`
    Len(Box<Expr>),
    /// `new T[size]`
    NewArray(Type, Box<Expr>),
}

impl Expr {
    pub fn new(id: NodeId, span: Span, kind: ExprKind) -> Self {
        Expr { id, span, kind }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self.kind {
            ExprKind::Bool(b) => Some(b),
            _ => None,
        }
    }

    pub fn is_literal(&self) -> bool {
        matches!(
            self.kind,
            ExprKind::Int(_)
                | ExprKind::Double(_)
                | ExprKind::Bool(_)
                | ExprKind::Str(_)
                | ExprKind::Char(_)
        )
    }

    /// Visit this expression and all sub-expressions in evaluation order
    /// (operands before the operator node).
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        match &self.kind {
            ExprKind::Unary(_, e) | ExprKind::Len(e) | ExprKind::NewArray(_, e) => e.walk(f),
            ExprKind::Binary(_, l, r) | ExprKind::Index(l, r) => {
                l.walk(f);
                r.walk(f);
            }
            ExprKind::Call { args, .. } => args.iter().for_each(|a| a.walk(f)),
            ExprKind::Method { receiver, args, .. } => {
                receiver.walk(f);
                args.iter().for_each(|a| a.walk(f));
            }
            _ => {}
        }
        f(self);
    }

    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        match &mut self.kind {
            ExprKind::Unary(_, e) | ExprKind::Len(e) | ExprKind::NewArray(_, e) => e.walk_mut(f),
            ExprKind::Binary(_, l, r) | ExprKind::Index(l, r) => {
                l.walk_mut(f);
                r.walk_mut(f);
            }
            ExprKind::Call { args, .. } => args.iter_mut().for_each(|a| a.walk_mut(f)),
            ExprKind::Method { receiver, args, .. } => {
                receiver.walk_mut(f);
                args.iter_mut().for_each(|a| a.walk_mut(f));
            }
            _ => {}
        }
        f(self);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LValue {
    Var(VarRef),
    Index(VarRef, Expr),
}

impl LValue {
    pub fn var(&self) -> &VarRef {
        match self {
            LValue::Var(v) | LValue::Index(v, _) => v,
        }
    }

    pub fn var_mut(&mut self) -> &mut VarRef {
        match self {
            LValue::Var(v) | LValue::Index(v, _) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stmt {
    pub id: NodeId,
    pub span: Span,
    pub kind: StmtKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StmtKind {
    Decl { ty: Type, name: String, init: Option<Expr> },
    Assign { target: LValue, value: Expr },
    If { cond: Expr, then_branch: Box<Stmt>, else_branch: Option<Box<Stmt>> },
    While { cond: Expr, body: Box<Stmt> },
    DoWhile { body: Box<Stmt>, cond: Expr },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        update: Option<Box<Stmt>>,
        body: Box<Stmt>,
    },
    Return(Option<Expr>),
    Block(Vec<Stmt>),
    Expr(Expr),
    /// Branch decision inserted by path extraction; never parsed from source.
    Assert { cond: Expr, expected: bool },
}

impl Stmt {
    pub fn new(id: NodeId, span: Span, kind: StmtKind) -> Self {
        Stmt { id, span, kind }
    }

    /// Whether this statement evaluates a branch condition.
    pub fn is_branch(&self) -> bool {
        matches!(
            self.kind,
            StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::DoWhile { .. } | StmtKind::For { .. }
        )
    }

    /// Visit this statement and every nested statement, pre-order.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match &self.kind {
            StmtKind::If { then_branch, else_branch, .. } => {
                then_branch.walk(f);
                if let Some(e) = else_branch {
                    e.walk(f);
                }
            }
            StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => body.walk(f),
            StmtKind::For { init, update, body, .. } => {
                if let Some(s) = init {
                    s.walk(f);
                }
                body.walk(f);
                if let Some(s) = update {
                    s.walk(f);
                }
            }
            StmtKind::Block(stmts) => stmts.iter().for_each(|s| s.walk(f)),
            _ => {}
        }
    }

    /// Expressions owned directly by this statement (not by nested statements).
    pub fn exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl { init, .. } => init.iter().collect(),
            StmtKind::Assign { target, value } => match target {
                LValue::Var(_) => alloc::vec![value],
                LValue::Index(_, idx) => alloc::vec![idx, value],
            },
            StmtKind::If { cond, .. }
            | StmtKind::While { cond, .. }
            | StmtKind::DoWhile { cond, .. }
            | StmtKind::Assert { cond, .. }
            | StmtKind::Expr(cond) => alloc::vec![cond],
            StmtKind::For { cond, .. } => cond.iter().collect(),
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Block(_) => Vec::new(),
        }
    }

    pub fn exprs_mut(&mut self) -> Vec<&mut Expr> {
        match &mut self.kind {
            StmtKind::Decl { init, .. } => init.iter_mut().collect(),
            StmtKind::Assign { target, value } => match target {
                LValue::Var(_) => alloc::vec![value],
                LValue::Index(_, idx) => alloc::vec![idx, value],
            },
            StmtKind::If { cond, .. }
            | StmtKind::While { cond, .. }
            | StmtKind::DoWhile { cond, .. }
            | StmtKind::Assert { cond, .. }
            | StmtKind::Expr(cond) => alloc::vec![cond],
            StmtKind::For { cond, .. } => cond.iter_mut().collect(),
            StmtKind::Return(e) => e.iter_mut().collect(),
            StmtKind::Block(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub id: NodeId,
    pub name: String,
    pub ty: Type,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldDecl {
    pub id: NodeId,
    pub span: Span,
    pub ty: Type,
    pub name: String,
    pub init: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionDecl {
    pub id: NodeId,
    pub span: Span,
    pub name: String,
    pub params: Vec<Param>,
    /// `None` for `void`.
    pub ret: Option<Type>,
    pub body: Stmt,
    /// Half-open range of node ids allocated inside this function.
    pub node_range: (NodeId, NodeId),
}

impl FunctionDecl {
    pub fn signature(&self) -> String {
        use core::fmt::Write;
        let mut out = String::new();
        match &self.ret {
            Some(t) => {
                let _ = write!(out, "{t}");
            }
            None => out.push_str("void"),
        }
        let _ = write!(out, " {}(", self.name);
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "{} {}", p.ty, p.name);
        }
        out.push(')');
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Program {
    pub fields: Vec<FieldDecl>,
    pub functions: Vec<FunctionDecl>,
    pub source: String,
}

impl Program {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDecl> {
        self.fields.iter().find(|f| f.name == name)
    }

    /// Copy with every node id, span and binding erased, for comparisons that
    /// should only look at program structure.
    pub fn erased(&self) -> Program {
        let mut p = self.clone();
        p.source.clear();
        for field in &mut p.fields {
            field.id = NodeId::default();
            field.span = Span::default();
            if let Some(e) = &mut field.init {
                erase_expr(e);
            }
        }
        for func in &mut p.functions {
            func.id = NodeId::default();
            func.span = Span::default();
            func.node_range = (NodeId::default(), NodeId::default());
            for param in &mut func.params {
                param.id = NodeId::default();
            }
            erase_stmt(&mut func.body);
        }
        p
    }

    pub fn structurally_eq(&self, other: &Program) -> bool {
        self.erased() == other.erased()
    }
}

fn erase_expr(e: &mut Expr) {
    e.walk_mut(&mut |x| {
        x.id = NodeId::default();
        x.span = Span::default();
        if let ExprKind::Var(v) = &mut x.kind {
            v.binding = Binding::Unresolved;
        }
    });
}

fn erase_stmt(s: &mut Stmt) {
    s.id = NodeId::default();
    s.span = Span::default();
    if let StmtKind::Assign { target, .. } = &mut s.kind {
        target.var_mut().binding = Binding::Unresolved;
    }
    for e in s.exprs_mut() {
        erase_expr(e);
    }
    match &mut s.kind {
        StmtKind::If { then_branch, else_branch, .. } => {
            erase_stmt(then_branch);
            if let Some(e) = else_branch {
                erase_stmt(e);
            }
        }
        StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => erase_stmt(body),
        StmtKind::For { init, update, body, .. } => {
            if let Some(s) = init {
                erase_stmt(s);
            }
            if let Some(s) = update {
                erase_stmt(s);
            }
            erase_stmt(body);
        }
        StmtKind::Block(stmts) => stmts.iter_mut().for_each(erase_stmt),
        _ => {}
    }
}
