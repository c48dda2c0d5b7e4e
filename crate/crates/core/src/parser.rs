//! Recursive-descent parser for the subject language.
//!
//! ```text
//! program   := (fieldDecl | funcDecl)* ;
//! fieldDecl := type IDENT ("=" expr)? ";" ;
//! funcDecl  := (type | "void") IDENT "(" params? ")" block ;
//! stmt      := varDecl | assign ";" | "if" "(" expr ")" stmt ("else" stmt)?
//!            | "while" "(" expr ")" stmt | "do" stmt "while" "(" expr ")" ";"
//!            | "for" "(" simple? ";" expr? ";" simple? ")" stmt
//!            | "return" expr? ";" | block | expr ";" ;
//! type      := ("int"|"double"|"boolean"|"char"|"String") ("[" "]")? ;
//! ```
//!
//! `x++`, `x--` and compound assignments (`x += e`) are accepted and desugared
//! to plain assignments.

use alloc::borrow::ToOwned;
use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::ast::*;
use crate::error::{ParseError, SyntaxError};
use crate::lexer::{tokenize, Tok, Token};

/// Parse and resolve a complete program.
pub fn parse(source: &str) -> Result<Program, ParseError> {
    let mut program = parse_unresolved(source)?;
    crate::resolve::resolve(&mut program)?;
    Ok(program)
}

/// Parse without name resolution or type checking.
pub fn parse_unresolved(source: &str) -> Result<Program, SyntaxError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0, next_id: 0, depth: 0 };
    let mut program = p.program()?;
    program.source = source.to_owned();
    Ok(program)
}

/// Deepest statement or expression nesting accepted. Everything downstream
/// (folding, extraction, interpretation) recurses over the tree, so this keeps
/// hostile input from exhausting the native stack.
pub const MAX_NESTING: u32 = 64;

const TYPE_KEYWORDS: &[&str] = &["int", "double", "boolean", "char", "String"];
const RESERVED: &[&str] = &[
    "int", "double", "boolean", "char", "String", "void", "if", "else", "while", "do", "for",
    "return", "true", "false", "new", "assertTrue", "assertFalse", "break", "continue",
];

pub(crate) struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    next_id: u32,
    depth: u32,
}

impl Parser {
    fn id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    pub(crate) fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let i = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    pub(crate) fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    pub(crate) fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            span: self.span(),
            found: alloc::format!("found {}", self.peek()),
            expected: expected.iter().map(|s| (*s).to_string()).collect(),
        }
    }

    pub(crate) fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    pub(crate) fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.is_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_punct(&mut self, p: &'static str) -> Result<(), SyntaxError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.error(&[p]))
        }
    }

    fn expect_keyword(&mut self, kw: &'static str) -> Result<(), SyntaxError> {
        if self.eat_keyword(kw) {
            Ok(())
        } else {
            Err(self.error(&[kw]))
        }
    }

    pub(crate) fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.advance();
                Ok(s)
            }
            _ => Err(self.error(&["identifier"])),
        }
    }

    pub(crate) fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    fn at_type(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if TYPE_KEYWORDS.contains(&s.as_str()))
    }

    fn ty(&mut self) -> Result<Type, SyntaxError> {
        let base = self.base_ty()?;
        if self.is_punct("[") {
            self.advance();
            self.expect_punct("]")?;
            if self.is_punct("[") {
                return Err(self.error(&["identifier"]));
            }
            return Ok(Type::array_of(base));
        }
        Ok(base)
    }

    fn base_ty(&mut self) -> Result<Type, SyntaxError> {
        let base = match self.peek() {
            Tok::Ident(s) => match s.as_str() {
                "int" => Type::Int,
                "double" => Type::Double,
                "boolean" => Type::Boolean,
                "char" => Type::Char,
                "String" => Type::Str,
                _ => return Err(self.error(&["type"])),
            },
            _ => return Err(self.error(&["type"])),
        };
        self.advance();
        Ok(base)
    }

    fn program(&mut self) -> Result<Program, SyntaxError> {
        let mut fields = Vec::new();
        let mut functions = Vec::new();
        while !self.at_eof() {
            let span = self.span();
            let start = NodeId(self.next_id);
            let ret = if self.eat_keyword("void") { None } else { Some(self.ty()?) };
            let name = self.ident()?;
            if self.is_punct("(") {
                let id = self.id();
                self.advance();
                let mut params = Vec::new();
                if !self.is_punct(")") {
                    loop {
                        let ty = self.ty()?;
                        let pname = self.ident()?;
                        params.push(Param { id: self.id(), name: pname, ty });
                        if !self.eat_punct(",") {
                            break;
                        }
                    }
                }
                self.expect_punct(")")?;
                if !self.is_punct("{") {
                    return Err(self.error(&["{"]));
                }
                let body = self.stmt()?;
                let end = NodeId(self.next_id);
                functions.push(FunctionDecl { id, span, name, params, ret, body, node_range: (start, end) });
            } else {
                let Some(ty) = ret else {
                    return Err(self.error(&["("]));
                };
                let id = self.id();
                let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                self.expect_punct(";")?;
                fields.push(FieldDecl { id, span, ty, name, init });
            }
        }
        Ok(Program { fields, functions, source: String::new() })
    }

    fn nested<T>(&mut self, f: fn(&mut Self) -> Result<T, SyntaxError>) -> Result<T, SyntaxError> {
        if self.depth >= MAX_NESTING {
            return Err(SyntaxError {
                span: self.span(),
                found: String::from("nesting too deep"),
                expected: Vec::new(),
            });
        }
        self.depth += 1;
        let r = f(self);
        self.depth -= 1;
        r
    }

    fn stmt(&mut self) -> Result<Stmt, SyntaxError> {
        self.nested(Self::stmt_inner)
    }

    fn stmt_inner(&mut self) -> Result<Stmt, SyntaxError> {
        let span = self.span();
        if self.eat_punct("{") {
            let mut stmts = Vec::new();
            while !self.is_punct("}") {
                if self.at_eof() {
                    return Err(self.error(&["}"]));
                }
                stmts.push(self.stmt()?);
            }
            self.advance();
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::Block(stmts)));
        }
        if self.eat_keyword("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_branch = Box::new(self.stmt()?);
            let else_branch = if self.eat_keyword("else") { Some(Box::new(self.stmt()?)) } else { None };
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::If { cond, then_branch, else_branch }));
        }
        if self.eat_keyword("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::While { cond, body }));
        }
        if self.eat_keyword("do") {
            let body = Box::new(self.stmt()?);
            self.expect_keyword("while")?;
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            self.expect_punct(";")?;
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::DoWhile { body, cond }));
        }
        if self.eat_keyword("for") {
            self.expect_punct("(")?;
            let init = if self.is_punct(";") { None } else { Some(Box::new(self.simple()?)) };
            self.expect_punct(";")?;
            let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            let update = if self.is_punct(")") { None } else { Some(Box::new(self.simple()?)) };
            self.expect_punct(")")?;
            let body = Box::new(self.stmt()?);
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::For { init, cond, update, body }));
        }
        if self.eat_keyword("return") {
            let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::Return(value)));
        }
        if self.is_keyword("break") || self.is_keyword("continue") {
            return Err(SyntaxError {
                span,
                found: String::from("`break`/`continue` are not part of the language"),
                expected: Vec::new(),
            });
        }
        let s = self.simple()?;
        self.expect_punct(";")?;
        Ok(s)
    }

    /// Declaration, assignment or expression statement without the `;`.
    fn simple(&mut self) -> Result<Stmt, SyntaxError> {
        let span = self.span();
        if self.at_type() {
            let ty = self.ty()?;
            let name = self.ident()?;
            let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::Decl { ty, name, init }));
        }
        let lhs = self.expr()?;
        let compound = match self.peek() {
            Tok::Punct("=") => Some(None),
            Tok::Punct("+=") => Some(Some(BinOp::Add)),
            Tok::Punct("-=") => Some(Some(BinOp::Sub)),
            Tok::Punct("*=") => Some(Some(BinOp::Mul)),
            Tok::Punct("/=") => Some(Some(BinOp::Div)),
            Tok::Punct("%=") => Some(Some(BinOp::Rem)),
            _ => None,
        };
        let step = match self.peek() {
            Tok::Punct("++") => Some(BinOp::Add),
            Tok::Punct("--") => Some(BinOp::Sub),
            _ => None,
        };
        if compound.is_none() && step.is_none() {
            if !matches!(lhs.kind, ExprKind::Call { .. } | ExprKind::Method { .. }) {
                return Err(SyntaxError {
                    span,
                    found: String::from("expression is not a statement"),
                    expected: vec![String::from("assignment or call")],
                });
            }
            let id = self.id();
            return Ok(Stmt::new(id, span, StmtKind::Expr(lhs)));
        }
        let target = match &lhs.kind {
            ExprKind::Var(v) => LValue::Var(v.clone()),
            ExprKind::Index(base, idx) => match &base.kind {
                ExprKind::Var(v) => LValue::Index(v.clone(), (**idx).clone()),
                _ => return Err(self.error(&["assignable expression"])),
            },
            _ => return Err(self.error(&["assignable expression"])),
        };
        self.advance();
        let value = match (compound, step) {
            (Some(None), _) => self.expr()?,
            (Some(Some(op)), _) => {
                let rhs = self.expr()?;
                self.desugar(&lhs, op, rhs, span)
            }
            (None, Some(op)) => {
                let one_id = self.id();
                let one = Expr::new(one_id, span, ExprKind::Int(1));
                self.desugar(&lhs, op, one, span)
            }
            (None, None) => unreachable!(),
        };
        let id = self.id();
        Ok(Stmt::new(id, span, StmtKind::Assign { target, value }))
    }

    fn desugar(&mut self, lhs: &Expr, op: BinOp, rhs: Expr, span: Span) -> Expr {
        let mut read = lhs.clone();
        // Fresh ids for the copied read of the target.
        read.walk_mut(&mut |e| {
            e.id = NodeId(self.next_id);
            self.next_id += 1;
        });
        let id = self.id();
        Expr::new(id, span, ExprKind::Binary(op, Box::new(read), Box::new(rhs)))
    }

    pub(crate) fn expr(&mut self) -> Result<Expr, SyntaxError> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "||" => BinOp::Or,
            "&&" => BinOp::And,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, SyntaxError> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op().filter(|op| op.precedence() >= min_prec) {
            let span = lhs.span;
            self.advance();
            let rhs = self.binary(op.precedence() + 1)?;
            let id = self.id();
            lhs = Expr::new(id, span, ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, SyntaxError> {
        self.nested(Self::unary_inner)
    }

    fn unary_inner(&mut self) -> Result<Expr, SyntaxError> {
        let span = self.span();
        let op = if self.eat_punct("-") {
            UnaryOp::Neg
        } else if self.eat_punct("!") {
            UnaryOp::Not
        } else {
            return self.postfix();
        };
        let operand = self.unary()?;
        let id = self.id();
        Ok(Expr::new(id, span, ExprKind::Unary(op, Box::new(operand))))
    }

    fn postfix(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.primary()?;
        loop {
            let span = self.span();
            if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                let id = self.id();
                e = Expr::new(id, e.span, ExprKind::Index(Box::new(e), Box::new(idx)));
            } else if self.eat_punct(".") {
                let name = match self.peek() {
                    Tok::Ident(s) => s.clone(),
                    _ => return Err(self.error(&["method name"])),
                };
                self.advance();
                if self.is_punct("(") {
                    let args = self.args()?;
                    let id = self.id();
                    e = Expr::new(id, e.span, ExprKind::Method { receiver: Box::new(e), method: name, args });
                } else if name == "length" {
                    let id = self.id();
                    e = Expr::new(id, e.span, ExprKind::Len(Box::new(e)));
                } else {
                    return Err(SyntaxError {
                        span,
                        found: alloc::format!("unknown member `{name}`"),
                        expected: vec![String::from("`length` or a method call")],
                    });
                }
            } else {
                return Ok(e);
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, SyntaxError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let span = self.span();
        let kind = match self.peek().clone() {
            Tok::Int(v) => {
                self.advance();
                ExprKind::Int(v)
            }
            Tok::Double(v) => {
                self.advance();
                ExprKind::Double(v)
            }
            Tok::Str(s) => {
                self.advance();
                ExprKind::Str(s)
            }
            Tok::Char(c) => {
                self.advance();
                ExprKind::Char(c)
            }
            Tok::Punct("(") => {
                self.advance();
                let e = self.expr()?;
                self.expect_punct(")")?;
                return Ok(e);
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.advance();
                ExprKind::Bool(s == "true")
            }
            Tok::Ident(s) if s == "new" => {
                self.advance();
                let elem = self.base_ty()?;
                self.expect_punct("[")?;
                let size = self.expr()?;
                self.expect_punct("]")?;
                ExprKind::NewArray(elem, Box::new(size))
            }
            Tok::Ident(s)
                if s == "Math"
                    && matches!(self.peek_at(1), Tok::Punct("."))
                    && matches!(self.peek_at(2), Tok::Ident(_)) =>
            {
                self.advance();
                self.advance();
                let name = self.ident()?;
                let args = self.args()?;
                ExprKind::Call { name, args }
            }
            Tok::Ident(_) => {
                let name = self.ident()?;
                if self.is_punct("(") {
                    let args = self.args()?;
                    ExprKind::Call { name, args }
                } else {
                    ExprKind::Var(VarRef::unresolved(name))
                }
            }
            _ => return Err(self.error(&["expression"])),
        };
        let id = self.id();
        Ok(Expr::new(id, span, kind))
    }
}
