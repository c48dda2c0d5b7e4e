//! Library functions available to subject programs.
//!
//! Builtins are pure. Their bodies never appear in prompts and they are never
//! path-enumerated; calls to them stay opaque inside path variants.

use alloc::string::String;
use alloc::vec::Vec;

use serde::Serialize;

use crate::ast::Type;
use crate::value::{RuntimeErrorKind, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BuiltinSig {
    /// Receiver type for methods (`"String"`, `"T[]"`), `None` for free functions.
    pub receiver: Option<&'static str>,
    pub name: &'static str,
    pub signature: &'static str,
}

const fn method(name: &'static str, signature: &'static str) -> BuiltinSig {
    BuiltinSig { receiver: Some("String"), name, signature }
}

const fn function(name: &'static str, signature: &'static str) -> BuiltinSig {
    BuiltinSig { receiver: None, name, signature }
}

static BUILTINS: &[BuiltinSig] = &[
    method("length", "String.length() -> int"),
    method("charAt", "String.charAt(int) -> char"),
    method("equals", "String.equals(String) -> boolean"),
    method("equalsIgnoreCase", "String.equalsIgnoreCase(String) -> boolean"),
    method("substring", "String.substring(int, int) -> String"),
    method("substring", "String.substring(int) -> String"),
    method("indexOf", "String.indexOf(String) -> int"),
    method("split", "String.split(String) -> String[]"),
    method("trim", "String.trim() -> String"),
    method("toLowerCase", "String.toLowerCase() -> String"),
    method("toUpperCase", "String.toUpperCase() -> String"),
    method("startsWith", "String.startsWith(String) -> boolean"),
    method("endsWith", "String.endsWith(String) -> boolean"),
    method("contains", "String.contains(String) -> boolean"),
    method("isEmpty", "String.isEmpty() -> boolean"),
    function("abs", "abs(int) -> int"),
    function("abs", "abs(double) -> double"),
    function("min", "min(int, int) -> int"),
    function("min", "min(double, double) -> double"),
    function("max", "max(int, int) -> int"),
    function("max", "max(double, double) -> double"),
    function("floor", "floor(double) -> double"),
    BuiltinSig { receiver: Some("T[]"), name: "length", signature: "T[].length -> int" },
];

pub fn list_builtins() -> &'static [BuiltinSig] {
    BUILTINS
}

pub fn is_builtin_function(name: &str) -> bool {
    matches!(name, "abs" | "min" | "max" | "floor")
}

/// Result type of a free builtin applied to arguments of the given types.
pub fn function_type(name: &str, args: &[Type]) -> Option<Type> {
    let numeric = |t: &Type| t.is_numeric();
    match (name, args) {
        ("abs", [t]) if numeric(t) => Some(if *t == Type::Double { Type::Double } else { Type::Int }),
        ("min" | "max", [a, b]) if numeric(a) && numeric(b) => {
            Some(if *a == Type::Double || *b == Type::Double { Type::Double } else { Type::Int })
        }
        ("floor", [t]) if numeric(t) => Some(Type::Double),
        _ => None,
    }
}

/// Result type of a string method, `None` if the method or arity is unknown.
pub fn method_type(method: &str, args: &[Type]) -> Option<Type> {
    let int = |t: &Type| Type::Int.accepts(t);
    let s = |t: &Type| *t == Type::Str;
    match (method, args) {
        ("length", []) | ("indexOf", [_]) if args.iter().all(s) => Some(Type::Int),
        ("charAt", [i]) if int(i) => Some(Type::Char),
        ("equals" | "equalsIgnoreCase" | "startsWith" | "endsWith" | "contains", [a]) if s(a) => {
            Some(Type::Boolean)
        }
        ("isEmpty", []) => Some(Type::Boolean),
        ("substring", [a]) if int(a) => Some(Type::Str),
        ("substring", [a, b]) if int(a) && int(b) => Some(Type::Str),
        ("split", [a]) if s(a) => Some(Type::array_of(Type::Str)),
        ("trim" | "toLowerCase" | "toUpperCase", []) => Some(Type::Str),
        _ => None,
    }
}

pub fn call_function(name: &str, args: &[Value]) -> Result<Value, RuntimeErrorKind> {
    let v = match (name, args) {
        ("abs", [Value::Double(d)]) => Value::Double(libm::fabs(*d)),
        ("abs", [v]) => Value::Int(v.as_int().unwrap_or(0).wrapping_abs()),
        ("min" | "max", [a, b]) => match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => Value::Int(if name == "min" { x.min(y) } else { x.max(y) }),
            _ => {
                let (x, y) = (to_f64(a), to_f64(b));
                Value::Double(if name == "min" { libm::fmin(x, y) } else { libm::fmax(x, y) })
            }
        },
        ("floor", [v]) => Value::Double(libm::floor(to_f64(v))),
        _ => unreachable!("unchecked builtin call {name}"),
    };
    Ok(v)
}

fn to_f64(v: &Value) -> f64 {
    match v {
        Value::Double(d) => *d,
        other => other.as_int().unwrap_or(0) as f64,
    }
}

fn chars(s: &str) -> Vec<char> {
    s.chars().collect()
}

fn find(hay: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() {
        return Some(from.min(hay.len()));
    }
    (from..hay.len()).find(|&i| hay[i..].starts_with(needle))
}

/// Split on a literal separator with Java's conventions: trailing empty
/// strings are dropped and an empty separator splits into characters.
pub fn split(s: &str, sep: &str) -> Vec<String> {
    let cs = chars(s);
    let sep = chars(sep);
    let mut parts: Vec<String> = Vec::new();
    if sep.is_empty() {
        parts = cs.iter().map(|c| String::from(*c)).collect();
    } else {
        let mut start = 0;
        while let Some(at) = find(&cs, &sep, start) {
            parts.push(cs[start..at].iter().collect());
            start = at + sep.len();
        }
        parts.push(cs[start..].iter().collect());
    }
    if parts.len() == 1 {
        return parts;
    }
    while parts.last().is_some_and(String::is_empty) {
        parts.pop();
    }
    parts
}

pub fn call_method(receiver: &str, method: &str, args: &[Value]) -> Result<Value, RuntimeErrorKind> {
    let cs = chars(receiver);
    let len = cs.len();
    let arg_str = |i: usize| args.get(i).and_then(Value::as_str).unwrap_or("");
    let arg_int = |i: usize| args.get(i).and_then(Value::as_int).unwrap_or(0);
    let v = match method {
        "length" => Value::Int(len as i64),
        "charAt" => {
            let i = arg_int(0);
            if i < 0 || i as usize >= len {
                return Err(RuntimeErrorKind::IndexOutOfBounds { index: i, len });
            }
            Value::Char(cs[i as usize])
        }
        "equals" => Value::Bool(receiver == arg_str(0)),
        "equalsIgnoreCase" => {
            let other = chars(arg_str(0));
            Value::Bool(
                other.len() == len
                    && cs.iter().zip(&other).all(|(a, b)| {
                        a == b || a.to_lowercase().eq(b.to_lowercase()) || a.to_uppercase().eq(b.to_uppercase())
                    }),
            )
        }
        "substring" => {
            let begin = arg_int(0);
            let end = if args.len() > 1 { arg_int(1) } else { len as i64 };
            if begin < 0 || end > len as i64 || begin > end {
                return Err(RuntimeErrorKind::NegativeSubstring { begin, end, len });
            }
            Value::Str(cs[begin as usize..end as usize].iter().collect())
        }
        "indexOf" => Value::Int(find(&cs, &chars(arg_str(0)), 0).map_or(-1, |i| i as i64)),
        "split" => Value::Array(split(receiver, arg_str(0)).into_iter().map(Value::Str).collect()),
        "trim" => Value::Str(String::from(receiver.trim_matches(|c: char| c <= ' '))),
        "toLowerCase" => Value::Str(receiver.to_lowercase()),
        "toUpperCase" => Value::Str(receiver.to_uppercase()),
        "startsWith" => Value::Bool(receiver.starts_with(arg_str(0))),
        "endsWith" => Value::Bool(receiver.ends_with(arg_str(0))),
        "contains" => Value::Bool(receiver.contains(arg_str(0))),
        "isEmpty" => Value::Bool(receiver.is_empty()),
        _ => unreachable!("unchecked method call {method}"),
    };
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn s(v: &str) -> Value {
        Value::Str(v.into())
    }

    #[test]
    fn length_of_abc() {
        assert_eq!(call_method("abc", "length", &[]), Ok(Value::Int(3)));
    }

    #[test]
    fn split_on_space() {
        assert_eq!(call_method("a b", "split", &[s(" ")]), Ok(Value::Array(vec![s("a"), s("b")])));
    }

    #[test]
    fn split_java_conventions() {
        assert_eq!(split("", " "), vec![String::new()]);
        assert_eq!(split(" ", " "), Vec::<String>::new());
        assert_eq!(split(" a", " "), ["", "a"]);
        assert_eq!(split("a  b ", " "), ["a", "", "b"]);
        assert_eq!(split("abc", ""), ["a", "b", "c"]);
        assert_eq!(split("abc", "-"), ["abc"]);
    }

    #[test]
    fn equals_ignore_case() {
        assert_eq!(call_method("-F", "equalsIgnoreCase", &[s("-f")]), Ok(Value::Bool(true)));
        assert_eq!(call_method("-F", "equalsIgnoreCase", &[s("-v")]), Ok(Value::Bool(false)));
    }

    #[test]
    fn substring_bounds() {
        assert_eq!(call_method("hello", "substring", &[Value::Int(1), Value::Int(3)]), Ok(s("el")));
        assert!(matches!(
            call_method("hello", "substring", &[Value::Int(3), Value::Int(1)]),
            Err(RuntimeErrorKind::NegativeSubstring { .. })
        ));
        assert!(matches!(
            call_method("ab", "charAt", &[Value::Int(2)]),
            Err(RuntimeErrorKind::IndexOutOfBounds { index: 2, len: 2 })
        ));
    }

    #[test]
    fn numeric_functions() {
        assert_eq!(call_function("abs", &[Value::Int(-4)]), Ok(Value::Int(4)));
        assert_eq!(call_function("abs", &[Value::Double(-1.5)]), Ok(Value::Double(1.5)));
        assert_eq!(call_function("max", &[Value::Int(2), Value::Double(1.5)]), Ok(Value::Double(2.0)));
        assert_eq!(call_function("floor", &[Value::Double(-1.1)]), Ok(Value::Double(-2.0)));
    }

    #[test]
    fn listing_covers_required_builtins() {
        let names: Vec<_> = list_builtins().iter().map(|b| b.name).collect();
        for n in [
            "length", "charAt", "equals", "equalsIgnoreCase", "substring", "indexOf", "split", "trim",
            "toLowerCase", "abs", "min", "max", "floor",
        ] {
            assert!(names.contains(&n), "{n}");
        }
    }
}
