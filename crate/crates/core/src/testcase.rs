//! Concrete tests: a single call of the entry function with literal arguments,
//! written `name(arg, arg, ...)`. Arrays are written `{v1, v2}`.

use alloc::borrow::ToOwned;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::ast::{FunctionDecl, Program, Span, Type};
use crate::error::{SyntaxError, TestError};
use crate::lexer::{tokenize, Tok, Token};
use crate::value::Value;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCase {
    pub function: String,
    pub args: Vec<Value>,
}

impl TestCase {
    pub fn new(function: impl Into<String>, args: Vec<Value>) -> Self {
        TestCase { function: function.into(), args }
    }

    /// Parse the call syntax only; see [`TestCase::check`] for typing.
    pub fn parse(text: &str) -> Result<TestCase, SyntaxError> {
        let tokens = tokenize(text)?;
        let mut c = Cursor { tokens, pos: 0 };
        let function = match c.next() {
            Tok::Ident(name) => name,
            _ => return Err(c.error_prev(&["function name"])),
        };
        c.expect("(")?;
        let mut args = Vec::new();
        if !c.eat(")") {
            loop {
                args.push(c.literal()?);
                if c.eat(")") {
                    break;
                }
                c.expect(",")?;
            }
        }
        c.eat(";");
        if !matches!(c.peek(), Tok::Eof) {
            return Err(c.error(&["end of test"]));
        }
        Ok(TestCase { function, args })
    }

    /// Check arity and argument types against `func`, widening numeric
    /// arguments to the declared parameter types.
    pub fn check(mut self, func: &FunctionDecl) -> Result<TestCase, TestError> {
        if self.function != func.name {
            return Err(TestError::WrongFunction { found: self.function, expected: func.name.clone() });
        }
        if self.args.len() != func.params.len() {
            return Err(TestError::Arity {
                function: func.name.clone(),
                expected: func.params.len(),
                found: self.args.len(),
            });
        }
        for (index, (arg, param)) in self.args.iter_mut().zip(&func.params).enumerate() {
            let mismatch = |found: &Value| TestError::ArgType {
                index,
                found: found.type_of().to_string(),
                expected: param.ty.to_string(),
            };
            match (&param.ty, &mut *arg) {
                (Type::Array(elem), Value::Array(items)) => {
                    for item in items.iter_mut() {
                        if matches!(item, Value::Array(_)) || !elem.accepts(&item.type_of()) {
                            return Err(mismatch(item));
                        }
                        *item = item.clone().coerce(elem);
                    }
                }
                (ty, v) if !matches!(v, Value::Array(_)) && ty.accepts(&v.type_of()) => {
                    *v = v.clone().coerce(ty);
                }
                (_, v) => return Err(mismatch(v)),
            }
        }
        Ok(self)
    }
}

/// Parse `text` and check it against the function `entry` of `program`.
pub fn parse_test(text: &str, program: &Program, entry: &str) -> Result<TestCase, TestError> {
    let test = TestCase::parse(text)?;
    let func = program.function(entry).ok_or_else(|| TestError::WrongFunction {
        found: test.function.clone(),
        expected: entry.to_owned(),
    })?;
    test.check(func)
}

impl fmt::Display for TestCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.function)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{a}")?;
        }
        f.write_str(")")
    }
}

struct Cursor {
    tokens: Vec<Token>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn error(&self, expected: &[&str]) -> SyntaxError {
        SyntaxError {
            span: self.span(),
            found: alloc::format!("found {}", self.peek()),
            expected: expected.iter().map(|s| (*s).to_string()).collect(),
        }
    }

    fn error_prev(&self, expected: &[&str]) -> SyntaxError {
        let t = &self.tokens[self.pos.saturating_sub(1)];
        SyntaxError {
            span: t.span,
            found: alloc::format!("found {}", t.tok),
            expected: expected.iter().map(|s| (*s).to_string()).collect(),
        }
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Tok::Punct(q) if *q == p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &'static str) -> Result<(), SyntaxError> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.error(&[p]))
        }
    }

    fn literal(&mut self) -> Result<Value, SyntaxError> {
        const EXPECTED: &[&str] = &["literal"];
        if self.eat("-") {
            return match self.next() {
                Tok::Int(v) => Ok(Value::Int(v.wrapping_neg())),
                Tok::Double(v) => Ok(Value::Double(-v)),
                _ => Err(self.error_prev(&["number"])),
            };
        }
        if self.eat("{") {
            return self.array_items();
        }
        match self.next() {
            Tok::Int(v) => Ok(Value::Int(v)),
            Tok::Double(v) => Ok(Value::Double(v)),
            Tok::Str(s) => Ok(Value::Str(s)),
            Tok::Char(c) => Ok(Value::Char(c)),
            Tok::Ident(w) if w == "true" => Ok(Value::Bool(true)),
            Tok::Ident(w) if w == "false" => Ok(Value::Bool(false)),
            // `new int[]{1, 2}` is accepted as a spelling of `{1, 2}`.
            Tok::Ident(w) if w == "new" => {
                if !matches!(self.next(), Tok::Ident(_)) {
                    return Err(self.error_prev(&["element type"]));
                }
                self.expect("[")?;
                self.expect("]")?;
                self.expect("{")?;
                self.array_items()
            }
            _ => Err(self.error_prev(EXPECTED)),
        }
    }

    fn array_items(&mut self) -> Result<Value, SyntaxError> {
        let mut items = Vec::new();
        if !self.eat("}") {
            loop {
                if matches!(self.peek(), Tok::Punct("{")) || matches!(self.peek(), Tok::Ident(w) if w == "new") {
                    return Err(self.error(&["scalar literal"]));
                }
                items.push(self.literal()?);
                if self.eat("}") {
                    break;
                }
                self.expect(",")?;
            }
        }
        Ok(Value::Array(items))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;
    use alloc::vec;

    #[test]
    fn parses_scalar_call() {
        let t = TestCase::parse("tutorial(1, 6, 0)").unwrap();
        assert_eq!(t, TestCase::new("tutorial", vec![Value::Int(1), Value::Int(6), Value::Int(0)]));
        assert_eq!(t.to_string(), "tutorial(1, 6, 0)");
    }

    #[test]
    fn parses_strings_arrays_and_negatives() {
        let t = TestCase::parse("f(\"a\\\"b\", {\"-f\", \"x\"}, -3, -1.5, 'c', true);").unwrap();
        assert_eq!(t.args.len(), 6);
        assert_eq!(t.args[2], Value::Int(-3));
        let again = TestCase::parse(&t.to_string()).unwrap();
        assert_eq!(again, t);
        let t = TestCase::parse("g(new String[]{\"a\"})").unwrap();
        assert_eq!(t.args[0], Value::Array(vec![Value::Str("a".into())]));
    }

    #[test]
    fn malformed_literal() {
        assert!(TestCase::parse("tutorial(1,").is_err());
        assert!(TestCase::parse("tutorial(1) extra").is_err());
        assert!(TestCase::parse("f({{1}})").is_err());
        assert!(TestCase::parse("f({new int[]{1}})").is_err());
    }

    #[test]
    fn checks_against_signature() {
        let p = parse("double f(double x, int[] a){ return x; }").unwrap();
        let t = parse_test("f(1, {1, 'a'})", &p, "f").unwrap();
        assert_eq!(t.args[0], Value::Double(1.0));
        assert_eq!(t.args[1], Value::Array(vec![Value::Int(1), Value::Int(97)]));
        assert!(matches!(parse_test("f(1)", &p, "f"), Err(TestError::Arity { .. })));
        assert!(matches!(parse_test("g(1, {})", &p, "f"), Err(TestError::WrongFunction { .. })));
        assert!(matches!(parse_test("f(true, {})", &p, "f"), Err(TestError::ArgType { index: 0, .. })));
        assert!(matches!(parse_test("f(1.0, {1.5})", &p, "f"), Err(TestError::ArgType { index: 1, .. })));
    }
}
