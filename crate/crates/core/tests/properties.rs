//! Property tests over randomly generated programs and inputs.

use palm_core::corpus::EXAMPLES;
use palm_core::extract::{extract, fold_constants, ExtractionConfig};
use palm_core::interp::{run_program, run_variant, ExecOptions, Outcome};
use palm_core::testcase::TestCase;
use palm_core::value::Value;
use palm_core::{parse, pretty_print, Analysis};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random programs over `int f(int a, int b, boolean c)` with branches,
/// bounded loops, locals declared inside loops, and calls to a helper that
/// may or may not be symbolic.
struct Gen {
    rng: ChaCha8Rng,
    vars: Vec<Vec<String>>,
    next: u32,
    depth: u32,
}

impl Gen {
    fn new(seed: u64) -> Gen {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed), vars: vec![vec!["a".into(), "b".into()]], next: 0, depth: 0 }
    }

    fn var(&mut self) -> String {
        let all: Vec<&String> = self.vars.iter().flatten().collect();
        all[self.rng.gen_range(0..all.len())].clone()
    }

    fn atom(&mut self) -> String {
        match self.rng.gen_range(0..4) {
            0 => self.rng.gen_range(-3..=3).to_string(),
            1 => "h(".to_string() + &self.var() + ")",
            _ => self.var(),
        }
    }

    fn int_expr(&mut self) -> String {
        let l = self.atom();
        if self.rng.gen_bool(0.4) {
            return l;
        }
        let op = ["+", "-", "*", "%"][self.rng.gen_range(0..4)];
        let r = if op == "%" { self.rng.gen_range(1..=4).to_string() } else { self.atom() };
        format!("{l} {op} {r}")
    }

    fn cond(&mut self) -> String {
        let cmp = ["<", "<=", ">", ">=", "==", "!="][self.rng.gen_range(0..6)];
        let base = format!("{} {cmp} {}", self.int_expr(), self.atom());
        match self.rng.gen_range(0..6) {
            0 => format!("{base} && {} > 0", self.atom()),
            1 => format!("c || {base}"),
            2 => format!("!({base})"),
            3 => "c".into(),
            _ => base,
        }
    }

    fn fresh(&mut self, prefix: &str) -> String {
        self.next += 1;
        format!("{prefix}{}", self.next)
    }

    fn block(&mut self, n: usize, out: &mut String) {
        self.vars.push(Vec::new());
        for _ in 0..n {
            self.stmt(out);
        }
        self.vars.pop();
    }

    fn stmt(&mut self, out: &mut String) {
        let nested = self.depth < 2;
        match self.rng.gen_range(0..10) {
            0 | 1 => {
                let name = self.fresh("v");
                let e = self.int_expr();
                out.push_str(&format!("int {name} = {e};\n"));
                self.vars.last_mut().unwrap().push(name);
            }
            2 | 3 => {
                let target = self.var();
                let e = self.int_expr();
                out.push_str(&format!("{target} = {e};\n"));
            }
            4 | 5 if nested => {
                self.depth += 1;
                let c = self.cond();
                out.push_str(&format!("if ({c}) {{\n"));
                let n = self.rng.gen_range(0..3);
                self.block(n, out);
                if self.rng.gen_bool(0.5) {
                    out.push_str("} else {\n");
                    let n = self.rng.gen_range(0..3);
                    self.block(n, out);
                }
                out.push_str("}\n");
                self.depth -= 1;
            }
            6 if nested => {
                self.depth += 1;
                let k = self.fresh("k");
                let bound = self.var();
                let extra = if self.rng.gen_bool(0.3) { format!(" && {}", self.cond()) } else { String::new() };
                out.push_str(&format!("int {k} = 0;\nwhile ({k} < {bound}{extra}) {{\n"));
                self.vars.last_mut().unwrap().push(k.clone());
                let n = self.rng.gen_range(1..3);
                self.block(n, out);
                out.push_str(&format!("{k} = {k} + 1;\n}}\n"));
                self.depth -= 1;
            }
            7 if nested => {
                let c = self.cond();
                let e = self.int_expr();
                out.push_str(&format!("if ({c}) {{\nreturn {e};\n}}\n"));
            }
            _ => {
                let target = self.var();
                out.push_str(&format!("{target} = {target} + 1;\n"));
            }
        }
    }

    fn program(&mut self) -> String {
        let mut body = String::new();
        let n = self.rng.gen_range(1..6);
        self.block(n, &mut body);
        let ret = self.int_expr();
        format!(
            "int h(int p) {{\nif (p > 0) {{\nreturn p - 1;\n}}\nreturn p + 2;\n}}\n\
             int f(int a, int b, boolean c) {{\n{body}return {ret};\n}}\n"
        )
    }
}

fn config(symbolic_helper: bool) -> ExtractionConfig {
    let mut cfg = ExtractionConfig { max_paths: 400, ..ExtractionConfig::for_entry("f") };
    if symbolic_helper {
        cfg.symbolic_functions.insert("h".into());
    }
    cfg
}

fn inputs() -> impl Strategy<Value = Vec<(i64, i64, bool)>> {
    prop::collection::vec((-4i64..=4, -4i64..=4, any::<bool>()), 12)
}

fn test_of(a: i64, b: i64, c: bool) -> TestCase {
    TestCase::new("f", vec![Value::Int(a), Value::Int(b), Value::Bool(c)])
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn generated_programs_round_trip(seed in any::<u64>()) {
        let src = Gen::new(seed).program();
        let p = parse(&src).map_err(|e| TestCaseError::fail(format!("{e}\n{src}")))?;
        let again = parse(&pretty_print(&p)).unwrap();
        prop_assert!(p.structurally_eq(&again), "{}", src);
    }

    /// Within the bounds exactly one variant accepts an input, it is the one
    /// `locate` finds, and it returns what the program returns.
    #[test]
    fn variants_preserve_semantics(seed in any::<u64>(), symbolic in any::<bool>(), args in inputs()) {
        let src = Gen::new(seed).program();
        let an = Analysis::from_source(&src, config(symbolic)).unwrap();
        prop_assume!(!an.extraction.truncated);
        for (a, b, c) in args {
            let t = test_of(a, b, c);
            let orig = run_program(&an.program, &t, ExecOptions::default());
            let Outcome::Returned { value } = &orig.outcome else { continue };
            let located = an.locate(&t);
            if located.bound_exceeded {
                continue;
            }
            let id = located.path_id.ok_or_else(|| TestCaseError::fail(format!("unlocated {t}\n{src}")))?;
            let accepting: Vec<u32> = an
                .paths()
                .iter()
                .filter(|p| !p.bound_exceeded)
                .filter(|p| matches!(run_variant(&an.program, p, &t, ExecOptions::default()).outcome, Outcome::Returned { .. }))
                .map(|p| p.id)
                .collect();
            prop_assert_eq!(&accepting, &vec![id], "{} on\n{}", t, src);
            let v = run_variant(&an.program, an.path(id).unwrap(), &t, ExecOptions::default());
            prop_assert_eq!(v.outcome.returned(), Some(value), "{} on\n{}", t, src);
            prop_assert!(an.path(id).unwrap().is_feasible());
        }
    }

    /// Folding a variant never changes whether an input passes it.
    #[test]
    fn folding_preserves_acceptance(seed in any::<u64>(), args in inputs()) {
        let src = Gen::new(seed).program();
        let p = parse(&src).unwrap();
        let cfg = ExtractionConfig { fold: false, ..config(false) };
        let raw = extract(&p, &cfg).unwrap();
        for v in &raw.paths {
            let folded = fold_constants(v);
            for &(a, b, c) in &args {
                let t = test_of(a, b, c);
                let x = run_variant(&p, v, &t, ExecOptions::default()).outcome;
                let y = run_variant(&p, &folded, &t, ExecOptions::default()).outcome;
                prop_assert_eq!(matches!(x, Outcome::Returned { .. }), matches!(y, Outcome::Returned { .. }), "{}\n{}", t, src);
                prop_assert_eq!(x.returned(), y.returned());
            }
            if folded.pruned_infeasible {
                for &(a, b, c) in &args {
                    let out = run_variant(&p, &folded, &test_of(a, b, c), ExecOptions::default()).outcome;
                    let accepted = matches!(out, Outcome::Returned { .. });
                    prop_assert!(!accepted);
                }
            }
        }
    }

    #[test]
    fn traces_are_deterministic(seed in any::<u64>(), a in -4i64..=4, b in -4i64..=4, c in any::<bool>()) {
        let p = parse(&Gen::new(seed).program()).unwrap();
        let t = test_of(a, b, c);
        prop_assert_eq!(run_program(&p, &t, ExecOptions::default()), run_program(&p, &t, ExecOptions::default()));
    }

    #[test]
    fn single_loop_path_count(k in 0u32..6) {
        let p = parse("int f(int n){ int s = 0; while (s < n) { s = s + 2; } return s; }").unwrap();
        let cfg = ExtractionConfig { loop_bound: k, ..ExtractionConfig::for_entry("f") };
        let e = extract(&p, &cfg).unwrap();
        prop_assert_eq!(e.paths.len() as u32, k + 2);
        prop_assert_eq!(e.paths.iter().filter(|p| p.bound_exceeded).count(), 1);
    }

    /// A pruned path ends in an assertion that fails whatever the input.
    #[test]
    fn pruned_paths_end_in_a_failing_assert(seed in any::<u64>(), args in inputs()) {
        let src = Gen::new(seed).program();
        let an = Analysis::from_source(&src, config(false)).unwrap();
        for p in an.paths().iter().filter(|p| p.pruned_infeasible) {
            let last = p.steps.len() - 1;
            prop_assert!(p.steps[last].is_assert());
            for &(a, b, c) in &args {
                let r = run_variant(&an.program, p, &test_of(a, b, c), ExecOptions::default());
                match r.outcome {
                    Outcome::AssertionViolated { step, .. } => prop_assert!(step <= last),
                    Outcome::RuntimeError { .. } | Outcome::StepLimitExceeded => {}
                    Outcome::Returned { .. } => prop_assert!(false, "pruned path accepted input\n{}", src),
                }
            }
        }
    }
}

#[test]
fn short_circuit_skips_the_right_operand() {
    let p = parse("boolean f(){ return false && (1 / 0 == 0); }").unwrap();
    let r = run_program(&p, &TestCase::new("f", vec![]), ExecOptions::default());
    assert_eq!(r.outcome, Outcome::Returned { value: Some(Value::Bool(false)) });
}

#[test]
fn corpus_round_trips() {
    for ex in EXAMPLES {
        let p = parse(ex.source).unwrap();
        let again = parse(&pretty_print(&p)).unwrap();
        assert!(p.structurally_eq(&again), "{}", ex.name);
    }
}

