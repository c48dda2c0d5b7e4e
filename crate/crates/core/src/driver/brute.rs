//! Exhaustive search over small input domains.
//!
//! The search doubles as an oracle: when it runs through the whole product
//! of domains without a hit, no input in those domains follows the path.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::Analysis;
use crate::ast::Type;
use crate::extract::PathVariant;
use crate::interp::{run_variant, ExecOptions, Outcome};
use crate::testcase::TestCase;
use crate::value::Value;

use super::{Backend, BackendError, GenRequest, GenResponse};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct Domains {
    /// Ints range over `-int_bound..=int_bound`.
    pub int_bound: i64,
    pub doubles: Vec<f64>,
    pub chars: Vec<char>,
    pub string_alphabet: Vec<char>,
    pub max_string_len: usize,
    pub max_array_len: usize,
    /// Largest number of candidates a search may try.
    pub budget: u64,
}

impl Default for Domains {
    fn default() -> Self {
        Domains {
            int_bound: 8,
            doubles: vec![-2.0, -1.1, -1.0, -0.5, 0.0, 0.5, 1.0, 1.1, 2.0, 3.0],
            chars: "abc-f. ".chars().collect(),
            string_alphabet: vec!['a', 'b', 'c', ' ', '-', 'f'],
            max_string_len: 4,
            max_array_len: 3,
            budget: 5_000_000,
        }
    }
}

/// Every sequence over `alphabet` of length `0..=max_len`, shorter first,
/// then in alphabet order with the first element varying slowest.
fn sequences<T: Clone>(alphabet: &[T], max_len: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    let mut layer: Vec<Vec<T>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::with_capacity(layer.len() * alphabet.len());
        for prefix in &layer {
            for a in alphabet {
                let mut s = prefix.clone();
                s.push(a.clone());
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

impl Domains {
    /// Values of `ty` in search order.
    pub fn values(&self, ty: &Type) -> Vec<Value> {
        match ty {
            Type::Int => (-self.int_bound..=self.int_bound).map(Value::Int).collect(),
            Type::Double => self.doubles.iter().copied().map(Value::Double).collect(),
            Type::Boolean => vec![Value::Bool(false), Value::Bool(true)],
            Type::Char => self.chars.iter().copied().map(Value::Char).collect(),
            Type::Str => sequences(&self.string_alphabet, self.max_string_len)
                .into_iter()
                .map(|s| Value::Str(s.into_iter().collect::<String>()))
                .collect(),
            Type::Array(elem) => {
                // Sizes grow fast; refuse early instead of materializing a
                // huge array domain.
                let n = self.values(elem);
                let total: u128 = (0..=self.max_array_len as u32).map(|k| (n.len() as u128).pow(k)).sum();
                if total > self.budget as u128 {
                    return Vec::new();
                }
                sequences(&n, self.max_array_len).into_iter().map(Value::Array).collect()
            }
        }
    }

    /// Number of candidates for a parameter list, saturating.
    pub fn size(&self, params: &[Type]) -> u128 {
        params.iter().map(|t| self.domain_size(t)).fold(1u128, |a, b| a.saturating_mul(b))
    }

    fn domain_size(&self, ty: &Type) -> u128 {
        let geometric = |n: u128, k: usize| (0..=k as u32).map(|i| n.saturating_pow(i)).fold(0u128, u128::saturating_add);
        match ty {
            Type::Int => 2 * self.int_bound.max(0) as u128 + 1,
            Type::Double => self.doubles.len() as u128,
            Type::Boolean => 2,
            Type::Char => self.chars.len() as u128,
            Type::Str => geometric(self.string_alphabet.len() as u128, self.max_string_len),
            Type::Array(elem) => geometric(self.domain_size(elem), self.max_array_len),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Search {
    Found { test: TestCase, candidates: u64 },
    Exhausted { candidates: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BruteError {
    #[error("input domain has {size} candidates, more than the budget of {budget}")]
    DomainTooLarge { size: u128, budget: u64 },
}

/// First test (in domain order, first parameter varying slowest) on which
/// the variant returns normally.
pub fn brute_force_search(analysis: &Analysis, variant: &PathVariant, domains: &Domains) -> Result<Search, BruteError> {
    let types: Vec<Type> = variant.params.iter().map(|p| p.ty.clone()).collect();
    let size = domains.size(&types);
    if size > domains.budget as u128 {
        return Err(BruteError::DomainTooLarge { size, budget: domains.budget });
    }
    let values: Vec<Vec<Value>> = types.iter().map(|t| domains.values(t)).collect();
    if values.iter().any(Vec::is_empty) {
        return Ok(Search::Exhausted { candidates: 0 });
    }
    let mut idx = vec![0usize; values.len()];
    let mut candidates = 0u64;
    loop {
        candidates += 1;
        let args = idx.iter().zip(&values).map(|(&i, vs)| vs[i].clone()).collect();
        let test = TestCase::new(variant.entry.clone(), args);
        let r = run_variant(&analysis.program, variant, &test, ExecOptions::default());
        if matches!(r.outcome, Outcome::Returned { .. }) {
            return Ok(Search::Found { test, candidates });
        }
        // Odometer step, last parameter fastest.
        let mut k = idx.len();
        loop {
            if k == 0 {
                return Ok(Search::Exhausted { candidates });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < values[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Backend answering with the brute-force search result.
#[derive(Debug, Clone, Default)]
pub struct BruteForce {
    pub domains: Domains,
}

impl BruteForce {
    pub fn new(domains: Domains) -> Self {
        BruteForce { domains }
    }
}

impl Backend for BruteForce {
    fn name(&self) -> String {
        String::from("brute-force")
    }

    fn generate(&mut self, analysis: &Analysis, request: &GenRequest) -> Result<GenResponse, BackendError> {
        let Some(variant) = analysis.path(request.path_id) else {
            return Ok(GenResponse::Declined(alloc::format!("unknown path {}", request.path_id)));
        };
        Ok(match brute_force_search(analysis, variant, &self.domains) {
            Ok(Search::Found { test, .. }) => GenResponse::Reply(alloc::format!("```\n{test}\n```")),
            Ok(Search::Exhausted { .. }) => GenResponse::Exhausted,
            Err(e) => GenResponse::Declined(alloc::format!("{e}")),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn string_order_is_length_then_alphabet() {
        let d = Domains { max_string_len: 2, ..Domains::default() };
        let v = d.values(&Type::Str);
        assert_eq!(v.len(), 1 + 6 + 36);
        assert_eq!(v[0], Value::Str("".into()));
        assert_eq!(v[1], Value::Str("a".into()));
        assert_eq!(v[7], Value::Str("aa".into()));
        assert_eq!(v[8], Value::Str("ab".into()));
    }

    #[test]
    fn sizes() {
        let d = Domains::default();
        assert_eq!(d.size(&[Type::Int, Type::Int, Type::Int]), 17 * 17 * 17);
        assert_eq!(d.size(&[Type::Str]), 1 + 6 + 36 + 216 + 1296);
        assert!(d.size(&[Type::array_of(Type::Str)]) > d.budget as u128);
        let small = Domains { max_string_len: 2, ..d };
        assert_eq!(small.size(&[Type::array_of(Type::Str)]), 1 + 43 + 43 * 43 + 43 * 43 * 43);
    }
}
