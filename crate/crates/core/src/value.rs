//! Runtime values and the operator semantics shared by the interpreter and the
//! constant folder.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ast::{BinOp, Type, UnaryOp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Int(i64),
    Double(f64),
    Bool(bool),
    Char(char),
    Str(String),
    Array(Vec<Value>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum RuntimeErrorKind {
    #[error("division by zero")]
    DivideByZero,
    #[error("index {index} out of bounds for length {len}")]
    IndexOutOfBounds { index: i64, len: usize },
    #[error("substring({begin}, {end}) out of range for length {len}")]
    NegativeSubstring { begin: i64, end: i64, len: usize },
    #[error("negative array size {size}")]
    NegativeArraySize { size: i64 },
    #[error("unknown function `{name}`")]
    UnknownFunction { name: String },
    #[error("call depth exceeded")]
    CallDepthExceeded,
    #[error("function ended without returning a value")]
    MissingReturn,
}

impl Value {
    pub fn default_for(ty: &Type) -> Value {
        match ty {
            Type::Int => Value::Int(0),
            Type::Double => Value::Double(0.0),
            Type::Boolean => Value::Bool(false),
            Type::Char => Value::Char('\0'),
            Type::Str => Value::Str(String::new()),
            Type::Array(_) => Value::Array(Vec::new()),
        }
    }

    /// Convert to the representation of a slot of type `ty` (widening only).
    pub fn coerce(self, ty: &Type) -> Value {
        match (ty, self) {
            (Type::Double, Value::Int(v)) => Value::Double(v as f64),
            (Type::Double, Value::Char(c)) => Value::Double(c as u32 as f64),
            (Type::Int, Value::Char(c)) => Value::Int(c as i64),
            (_, v) => v,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(v) => Some(*v),
            Value::Char(c) => Some(*c as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            _ => None,
        }
    }

    /// Runtime type; arrays report the type of their first element (int when empty).
    pub fn type_of(&self) -> Type {
        match self {
            Value::Int(_) => Type::Int,
            Value::Double(_) => Type::Double,
            Value::Bool(_) => Type::Boolean,
            Value::Char(_) => Type::Char,
            Value::Str(_) => Type::Str,
            Value::Array(items) => Type::array_of(items.first().map_or(Type::Int, Value::type_of)),
        }
    }

    /// Text produced when the value is concatenated to a string.
    pub fn to_display_string(&self) -> String {
        match self {
            Value::Int(v) => format!("{v}"),
            Value::Double(v) => java_double(*v),
            Value::Bool(b) => format!("{b}"),
            Value::Char(c) => format!("{c}"),
            Value::Str(s) => s.clone(),
            Value::Array(items) => {
                let parts: Vec<String> = items.iter().map(Value::to_display_string).collect();
                format!("[{}]", parts.join(", "))
            }
        }
    }
}

/// Prints the value in literal syntax, as accepted in test calls.
impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Double(v) => f.write_str(&double_literal(*v)),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Char(c) => write!(f, "'{}'", escape(*c, '\'')),
            Value::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    f.write_str(&escape(c, '"'))?;
                }
                f.write_str("\"")
            }
            Value::Array(items) => {
                f.write_str("{")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("}")
            }
        }
    }
}

pub(crate) fn escape(c: char, quote: char) -> String {
    match c {
        '\n' => String::from("\\n"),
        '\t' => String::from("\\t"),
        '\\' => String::from("\\\\"),
        '\0' => String::from("\\0"),
        c if c == quote => format!("\\{c}"),
        c => format!("{c}"),
    }
}

/// Literal form of a double that always contains a `.` or an exponent.
pub fn double_literal(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'N', 'i']) {
        s
    } else {
        format!("{s}.0")
    }
}

fn java_double(v: f64) -> String {
    if v.is_nan() {
        String::from("NaN")
    } else if v.is_infinite() {
        String::from(if v > 0.0 { "Infinity" } else { "-Infinity" })
    } else {
        double_literal(v)
    }
}

enum Num {
    I(i64),
    D(f64),
}

fn num(v: &Value) -> Option<Num> {
    match v {
        Value::Int(i) => Some(Num::I(*i)),
        Value::Char(c) => Some(Num::I(*c as i64)),
        Value::Double(d) => Some(Num::D(*d)),
        _ => None,
    }
}

fn both(l: &Value, r: &Value) -> Option<(Num, Num)> {
    Some((num(l)?, num(r)?))
}

fn as_f64(n: &Num) -> f64 {
    match n {
        Num::I(i) => *i as f64,
        Num::D(d) => *d,
    }
}

pub fn unary(op: UnaryOp, v: &Value) -> Option<Value> {
    match (op, v) {
        (UnaryOp::Neg, Value::Int(i)) => Some(Value::Int(i.wrapping_neg())),
        (UnaryOp::Neg, Value::Char(c)) => Some(Value::Int(-(*c as i64))),
        (UnaryOp::Neg, Value::Double(d)) => Some(Value::Double(-d)),
        (UnaryOp::Not, Value::Bool(b)) => Some(Value::Bool(!b)),
        _ => None,
    }
}

/// Evaluate a binary operator on two already-evaluated operands.
///
/// `&&`/`||` are evaluated strictly here; callers implement short-circuiting.
/// `Ok(None)` signals operand types the operator does not accept, which the
/// type checker rules out for resolved programs.
pub fn binary(op: BinOp, l: &Value, r: &Value) -> Result<Option<Value>, RuntimeErrorKind> {
    use BinOp::*;
    let v = match op {
        Add if matches!(l, Value::Str(_)) || matches!(r, Value::Str(_)) => {
            let mut s = l.to_display_string();
            s.push_str(&r.to_display_string());
            Value::Str(s)
        }
        Add | Sub | Mul | Div | Rem => {
            let Some((a, b)) = both(l, r) else { return Ok(None) };
            match (a, b) {
                (Num::I(a), Num::I(b)) => Value::Int(match op {
                    Add => a.wrapping_add(b),
                    Sub => a.wrapping_sub(b),
                    Mul => a.wrapping_mul(b),
                    Div if b == 0 => return Err(RuntimeErrorKind::DivideByZero),
                    Div => a.wrapping_div(b),
                    Rem if b == 0 => return Err(RuntimeErrorKind::DivideByZero),
                    _ => a.wrapping_rem(b),
                }),
                (a, b) => {
                    let (a, b) = (as_f64(&a), as_f64(&b));
                    Value::Double(match op {
                        Add => a + b,
                        Sub => a - b,
                        Mul => a * b,
                        Div if b == 0.0 => return Err(RuntimeErrorKind::DivideByZero),
                        Div => a / b,
                        Rem if b == 0.0 => return Err(RuntimeErrorKind::DivideByZero),
                        _ => libm::fmod(a, b),
                    })
                }
            }
        }
        Lt | Le | Gt | Ge => {
            let Some((a, b)) = both(l, r) else { return Ok(None) };
            let ord = match (a, b) {
                (Num::I(a), Num::I(b)) => a.partial_cmp(&b),
                (a, b) => as_f64(&a).partial_cmp(&as_f64(&b)),
            };
            Value::Bool(match (op, ord) {
                (_, None) => false,
                (Lt, Some(o)) => o.is_lt(),
                (Le, Some(o)) => o.is_le(),
                (Gt, Some(o)) => o.is_gt(),
                (_, Some(o)) => o.is_ge(),
            })
        }
        Eq | Ne => {
            let eq = match (l, r) {
                (Value::Bool(a), Value::Bool(b)) => a == b,
                (Value::Str(a), Value::Str(b)) => a == b,
                (Value::Array(a), Value::Array(b)) => a == b,
                _ => match both(l, r) {
                    Some((Num::I(a), Num::I(b))) => a == b,
                    Some((a, b)) => as_f64(&a) == as_f64(&b),
                    None => return Ok(None),
                },
            };
            Value::Bool(if op == Eq { eq } else { !eq })
        }
        And | Or => match (l, r) {
            (Value::Bool(a), Value::Bool(b)) => Value::Bool(if op == And { *a && *b } else { *a || *b }),
            _ => return Ok(None),
        },
    };
    Ok(Some(v))
}
