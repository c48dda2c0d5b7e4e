//! Self-checks run by `palm accept` and by the acceptance test target.
//!
//! Each check returns a [`CriterionResult`] instead of panicking so that the
//! whole list is always reported.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use palm_core::ast::Type;
use palm_core::corpus::{example, Example, EXAMPLES};
use palm_core::coverage::measure;
use palm_core::driver::{
    brute_force_search, generate_all, verify, BruteForce, Domains, NoHooks, RunState, RunStatus, Scripted, Search,
    Verdict, DEFAULT_TRIAL_LIMIT,
};
use palm_core::extract::{ExtractionConfig, PathVariant};
use palm_core::interp::{run_program, run_variant, ExecOptions, Outcome};
use palm_core::testcase::TestCase;
use palm_core::tree::Status;
use palm_core::value::Value;
use palm_core::Analysis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    #[serde(serialize_with = "millis")]
    pub elapsed: Duration,
}

fn millis<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_u128(d.as_millis())
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        format!("{mark} {:<24} {:>8.2}s  {}", self.name, self.elapsed.as_secs_f64(), self.detail)
    }
}

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn timed(name: &'static str, limit: Option<Duration>, f: impl FnOnce() -> Check) -> CriterionResult {
    let start = Instant::now();
    let result = f();
    let elapsed = start.elapsed();
    let (passed, detail) = match (result, limit) {
        (Ok(d), Some(l)) if elapsed > l => (false, format!("{d}; took longer than {l:?}")),
        (Ok(d), _) => (true, d),
        (Err(e), _) => (false, e),
    };
    CriterionResult { name, passed, detail, elapsed }
}

pub const NAMES: [&str; 8] = [
    "enumeration-goldens",
    "palindrome-fidelity",
    "tutorial-fidelity",
    "differential-semantics",
    "driver-contract",
    "oracle-completeness",
    "pruning",
    "arg-parse-bug",
];

pub fn run_all() -> Vec<CriterionResult> {
    vec![
        enumeration_goldens(),
        palindrome_fidelity(),
        tutorial_fidelity(),
        differential_semantics(500, 0x5eed),
        driver_contract(),
        oracle_completeness(),
        pruning(),
        arg_parse_bug(),
    ]
}

fn corpus(name: &str) -> Result<(&'static Example, Analysis), String> {
    let ex = example(name).ok_or_else(|| format!("missing example {name}"))?;
    let a = Analysis::from_source(ex.source, ex.config()).map_err(|e| format!("{name}: {e}"))?;
    Ok((ex, a))
}

fn outcomes(p: &PathVariant) -> Vec<bool> {
    p.decisions().into_iter().map(|(_, o)| o).collect()
}

fn assert_texts(p: &PathVariant) -> Vec<String> {
    p.asserts().map(|s| s.text().trim_end_matches(';').to_string()).collect()
}

fn find(a: &Analysis, seq: &[bool]) -> Result<u32, String> {
    a.paths()
        .iter()
        .find(|p| !p.bound_exceeded && outcomes(p) == seq)
        .map(|p| p.id)
        .ok_or_else(|| format!("no path with outcomes {seq:?}"))
}

fn test(a: &Analysis, text: &str) -> Result<TestCase, String> {
    a.parse_test(text).map_err(|e| format!("{text}: {e}"))
}

pub fn enumeration_goldens() -> CriterionResult {
    timed("enumeration-goldens", Some(Duration::from_secs(1)), || {
        let analyse = |src: &str| {
            Analysis::from_source(src, ExtractionConfig::for_entry("f")).map_err(|e| e.to_string())
        };
        let line = analyse("int f(int x){ int y = x + 1; y = y * 2; return y; }")?;
        ensure!(line.paths().len() == 1, "straight-line code gave {} paths", line.paths().len());

        let ifs = analyse("int f(int a, int b){ int r = 0; if (a > 0) { r = 1; } if (b > 0) { r = r + 2; } return r; }")?;
        let seqs: Vec<Vec<bool>> = ifs.paths().iter().map(outcomes).collect();
        let want = vec![vec![true, true], vec![true, false], vec![false, true], vec![false, false]];
        ensure!(seqs == want, "two ifs gave {seqs:?}");

        let lp = analyse("int f(int n){ int s = 0; while (s < n) { s = s + 1; } return s; }")?;
        let exits: Vec<Vec<bool>> = lp.paths().iter().filter(|p| !p.bound_exceeded).map(outcomes).collect();
        let bound = lp.paths().iter().filter(|p| p.bound_exceeded).count();
        let want = vec![vec![false], vec![true, false], vec![true, true, false]];
        ensure!(exits == want && bound == 1, "loop with K=2 gave exits {exits:?} and {bound} bound-exceeded paths");
        Ok("1 / 4 / 3+1 paths".into())
    })
}

pub fn palindrome_fidelity() -> CriterionResult {
    timed("palindrome-fidelity", None, || {
        let (_, a) = corpus("palindrome")?;
        let early = find(&a, &[true, true])?;
        let texts = assert_texts(a.path(early).unwrap());
        let want = ["assertTrue(0 < len)", "assertTrue(text.charAt(0) != text.charAt(len - 0 - 1))"];
        ensure!(texts == want, "early-return path asserts {texts:?}");

        let second = find(&a, &[true, false, true, true])?;
        let texts = assert_texts(a.path(second).unwrap());
        ensure!(texts.len() == 4, "second-iteration path has {} assertions", texts.len());
        let ab = a.run_path(second, &test(&a, "is_palindrome(\"ab\")")?).unwrap();
        match &ab.outcome {
            Outcome::AssertionViolated { text, .. } if *text == texts[1] => {}
            other => return Err(format!("\"ab\" should diverge at {}, got {other:?}", texts[1])),
        }
        let abca = a.run_path(second, &test(&a, "is_palindrome(\"abca\")")?).unwrap();
        ensure!(matches!(abca.outcome, Outcome::Returned { .. }), "\"abca\" did not pass: {:?}", abca.outcome);
        Ok(format!("\"ab\" diverges at {}", texts[1]))
    })
}

pub fn tutorial_fidelity() -> CriterionResult {
    timed("tutorial-fidelity", None, || {
        let (_, a) = corpus("tutorial")?;
        let feasible = a.paths().iter().filter(|p| p.is_feasible()).count();
        ensure!(feasible == 4, "{feasible} feasible paths");
        let tt = find(&a, &[true, true])?;

        let mut tree = a.tree.clone();
        let ok = verify(&a, &mut tree, tt, "tutorial(1,6,0)", 0).map_err(|e| e.to_string())?;
        ensure!(ok.verdict == Verdict::Covered, "tutorial(1,6,0) gave {:?}", ok.verdict);
        ensure!(tree.status(tt) == Some(Status::Covered), "leaf not marked covered");

        let bad = verify(&a, &mut a.tree.clone(), tt, "tutorial(1,1,0)", 0).map_err(|e| e.to_string())?;
        let compact = |s: &str| s.split_whitespace().collect::<String>();
        match &bad.verdict {
            Verdict::Diverged { assert, .. } if compact(assert) == "assertTrue(y+z>0)" => {}
            other => return Err(format!("tutorial(1,1,0) gave {other:?}")),
        }
        let located = a.locate(&test(&a, "tutorial(1,6,0)")?);
        ensure!(located.path_id == Some(tt), "locate gave {:?}, expected {tt}", located.path_id);
        Ok(format!("(T,T) leaf is path {tt}"))
    })
}

/// A random value of `ty` drawn from the same finite domains the
/// brute-force search enumerates.
fn sample(rng: &mut ChaCha8Rng, ty: &Type, d: &Domains) -> Value {
    let pick = |rng: &mut ChaCha8Rng, xs: &[char]| xs[rng.gen_range(0..xs.len())];
    match ty {
        Type::Int => Value::Int(rng.gen_range(-d.int_bound..=d.int_bound)),
        Type::Double => Value::Double(d.doubles[rng.gen_range(0..d.doubles.len())]),
        Type::Boolean => Value::Bool(rng.gen()),
        Type::Char => Value::Char(pick(rng, &d.chars)),
        Type::Str => {
            let len = rng.gen_range(0..=d.max_string_len);
            Value::Str((0..len).map(|_| pick(rng, &d.string_alphabet)).collect())
        }
        Type::Array(elem) => {
            let len = rng.gen_range(0..=d.max_array_len);
            Value::Array((0..len).map(|_| sample(rng, elem, d)).collect())
        }
    }
}

/// For random inputs that stay within the bounds, exactly one variant must
/// accept, it must be the located one, and it must return what the original
/// program returns.
pub fn differential_semantics(per_program: usize, seed: u64) -> CriterionResult {
    timed("differential-semantics", Some(Duration::from_secs(30)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut skipped = 0usize;
        for ex in EXAMPLES {
            let (_, a) = corpus(ex.name)?;
            let d = ex.domains();
            let func = a.program.function(a.entry()).expect("entry exists");
            let types: Vec<Type> = func.params.iter().map(|p| p.ty.clone()).collect();
            let mut checked = 0;
            let mut attempts = 0;
            while checked < per_program {
                attempts += 1;
                ensure!(attempts <= per_program * 50, "{}: too few in-bounds inputs", ex.name);
                let args = types.iter().map(|t| sample(&mut rng, t, &d)).collect();
                let t = TestCase::new(a.entry(), args);
                let located = a.locate(&t);
                let original = run_program(&a.program, &t, ExecOptions::default());
                let Outcome::Returned { value: expected } = &original.outcome else {
                    skipped += 1;
                    continue;
                };
                if located.bound_exceeded {
                    skipped += 1;
                    continue;
                }
                let accepting: Vec<(u32, Option<Value>)> = a
                    .paths()
                    .iter()
                    .filter(|v| !v.bound_exceeded)
                    .filter_map(|v| match run_variant(&a.program, v, &t, ExecOptions::default()).outcome {
                        Outcome::Returned { value } => Some((v.id, value)),
                        _ => None,
                    })
                    .collect();
                ensure!(accepting.len() == 1, "{}: {t} accepted by {} variants", ex.name, accepting.len());
                let (id, got) = &accepting[0];
                ensure!(located.path_id == Some(*id), "{}: {t} located at {:?}, accepted by {id}", ex.name, located.path_id);
                ensure!(got == expected, "{}: {t} returns {expected:?} but variant {id} returns {got:?}", ex.name);
                checked += 1;
            }
        }
        Ok(format!("{} programs x {per_program} inputs, {skipped} out-of-bounds draws skipped", EXAMPLES.len()))
    })
}

pub fn driver_contract() -> CriterionResult {
    timed("driver-contract", None, || {
        let (_, a) = corpus("tutorial")?;
        let tt = find(&a, &[true, true])?;
        let wrong = ["tutorial(1,1,0)", "tutorial(0,6,0)", "tutorial(2,0,0)", "tutorial(1,-3,0)", "tutorial(-1,6,0)"];
        let mut state = RunState::new(&a, a.tree.clone(), "scripted".into(), DEFAULT_TRIAL_LIMIT);
        // Only the (T,T) leaf is left as a target.
        for p in a.tree.target_paths() {
            if p != tt {
                state.tree.mark_status(p, Status::Covered).map_err(|e| e.to_string())?;
            }
        }
        generate_all(&a, &mut state, &mut Scripted::tests(wrong), &mut NoHooks);
        ensure!(state.trials.len() == 5, "{} trial records", state.trials.len());
        ensure!(state.tree.status(tt) == Some(Status::Uncovered), "leaf is {:?}", state.tree.status(tt));
        for (k, pair) in state.trials.windows(2).enumerate() {
            let Verdict::Diverged { assert, .. } = &pair[0].verdict else {
                return Err(format!("trial {} did not diverge: {:?}", k + 1, pair[0].verdict));
            };
            let expected = format!("- `{}` failed at `{assert}`", pair[0].test.as_deref().unwrap_or(""));
            ensure!(pair[1].prompt.contains(&expected), "trial {} prompt lacks feedback {expected:?}", k + 2);
            ensure!(pair[0].verdict.feedback() == *assert, "feedback differs from the diverged assertion");
        }
        Ok("5 records, leaf uncovered, feedback chained".into())
    })
}

/// Every input in the product of `domains` over the entry's parameters,
/// passed to `visit` in odometer order.
fn for_each_input(a: &Analysis, domains: &Domains, mut visit: impl FnMut(TestCase)) {
    let func = a.program.function(a.entry()).expect("entry exists");
    let columns: Vec<Vec<Value>> = func.params.iter().map(|p| domains.values(&p.ty)).collect();
    if columns.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; columns.len()];
    loop {
        visit(TestCase::new(a.entry(), idx.iter().zip(&columns).map(|(&i, c)| c[i].clone()).collect()));
        let mut k = idx.len();
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < columns[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// The brute-force run must cover exactly the leaves that some input in the
/// declared domains reaches when the original program is executed, and
/// must mark every other target leaf infeasible.
pub fn oracle_completeness() -> CriterionResult {
    timed("oracle-completeness", Some(Duration::from_secs(300)), || {
        let mut summary = Vec::new();
        for ex in EXAMPLES {
            let (_, a) = corpus(ex.name)?;
            let domains = ex.domains();
            let mut reachable = BTreeSet::new();
            for_each_input(&a, &domains, |t| {
                if let Some(p) = a.locate(&t).path_id {
                    reachable.insert(p);
                }
            });

            let mut state = RunState::new(&a, a.tree.clone(), "brute-force".into(), 1);
            generate_all(&a, &mut state, &mut BruteForce::new(domains), &mut NoHooks);
            ensure!(state.status == RunStatus::Done, "{}: run ended {:?}", ex.name, state.status);
            let targets = a.tree.target_paths();
            let covered: BTreeSet<u32> =
                targets.iter().copied().filter(|&p| state.tree.status(p) == Some(Status::Covered)).collect();
            ensure!(
                covered == reachable,
                "{}: covered {covered:?} but the domains reach {reachable:?}",
                ex.name
            );
            let stray: Vec<u32> = targets
                .iter()
                .copied()
                .filter(|p| !covered.contains(p) && state.tree.status(*p) != Some(Status::Infeasible))
                .collect();
            ensure!(stray.is_empty(), "{}: leaves {stray:?} neither covered nor marked infeasible", ex.name);

            let suite: Vec<TestCase> = state
                .trials
                .iter()
                .filter(|t| t.verdict.is_covered())
                .filter_map(|t| t.test.as_deref().and_then(|s| a.parse_test(s).ok()))
                .collect();
            let report = measure(&a, &state.tree, &suite);
            ensure!(report.path_coverage.ratio == 1.0, "{}: path coverage {:?}", ex.name, report.path_coverage);
            ensure!(report.branch_coverage.ratio == 1.0, "{}: branch coverage {:?}", ex.name, report.branch_coverage);
            summary.push(format!("{} {}/{}", ex.name, report.path_coverage.covered, report.path_coverage.total));
        }
        Ok(summary.join(", "))
    })
}

pub fn pruning() -> CriterionResult {
    timed("pruning", None, || {
        let (_, a) = corpus("pruned")?;
        let pruned: Vec<u32> = a.tree.leaves().keys().copied().filter(|&p| a.tree.status(p) == Some(Status::Infeasible)).collect();
        ensure!(pruned.len() == 1, "{} pruned leaves", pruned.len());
        let leaf = a.tree.leaves()[&pruned[0]];
        let dot = a.tree.to_dot();
        let gray = format!("  n{leaf} [shape=box, style=filled, fillcolor=lightgray");
        ensure!(dot.lines().any(|l| l.starts_with(&gray)), "pruned leaf n{leaf} is not gray in the DOT output");
        ensure!(!a.tree.target_paths().contains(&pruned[0]), "pruned leaf is a generation target");
        let all: Vec<TestCase> = (-3..=3).map(|i| TestCase::new(a.entry(), vec![Value::Int(i)])).collect();
        let report = measure(&a, &a.tree, &all);
        let feasible = a.paths().iter().filter(|p| p.is_feasible()).count();
        ensure!(report.path_coverage.total == feasible, "denominator {} for {feasible} feasible paths", report.path_coverage.total);
        ensure!(report.path_coverage.total == a.paths().len() - 1, "pruned leaf counted in the denominator");
        Ok(format!("path {} pruned, denominator {}", pruned[0], report.path_coverage.total))
    })
}

pub fn arg_parse_bug() -> CriterionResult {
    timed("arg-parse-bug", None, || {
        let (ex, a) = corpus("arg_parse")?;
        // After taking the value of -f, the loop examines that same value
        // again and it matches a flag.
        let flag_value = find(&a, &[true, true, true, true, false, true, false])?;
        let variant = a.path(flag_value).unwrap();
        let found = match brute_force_search(&a, variant, &ex.domains()).map_err(|e| e.to_string())? {
            Search::Found { test, .. } => test,
            Search::Exhausted { .. } => return Err("no input follows the flag-as-value path".into()),
        };
        let located = a.locate(&found);
        ensure!(located.path_id == Some(flag_value), "{found} located at {:?}", located.path_id);
        let Value::Array(args) = &found.args[0] else { return Err("unexpected argument shape".into()) };
        let strs: Vec<&str> = args.iter().filter_map(|v| v.as_str()).collect();
        let flag_after_f = strs.windows(2).any(|w| w[0] == "-f" && w[1].starts_with('-'));
        ensure!(flag_after_f, "{found} does not pass a flag-like value after -f");
        let ret = run_program(&a.program, &found, ExecOptions::default());
        Ok(format!("{found} returns {}", ret.outcome.returned().and_then(|v| v.as_ref()).map_or("?".into(), |v| v.to_string())))
    })
}
