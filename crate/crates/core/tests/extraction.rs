use palm_core::ast::StmtKind;
use palm_core::corpus::example;
use palm_core::extract::{extract, fold_constants, ExtractionConfig, PathVariant};
use palm_core::{parse, Analysis};

fn analysis(src: &str, entry: &str) -> Analysis {
    Analysis::from_source(src, ExtractionConfig::for_entry(entry)).unwrap()
}

fn outcomes(p: &PathVariant) -> Vec<bool> {
    p.decisions().into_iter().map(|(_, o)| o).collect()
}

fn assert_texts(p: &PathVariant) -> Vec<String> {
    p.asserts().map(|s| s.text().trim_end_matches(';').to_string()).collect()
}

#[test]
fn straight_line_has_one_path() {
    let a = analysis("int f(int x){ int y = x * 2; y = y + 1; return y; }", "f");
    assert_eq!(a.paths().len(), 1);
    assert_eq!(a.paths()[0].asserts().count(), 0);
    for k in 0..4 {
        let cfg = ExtractionConfig { loop_bound: k, ..ExtractionConfig::for_entry("f") };
        assert_eq!(extract(&a.program, &cfg).unwrap().paths.len(), 1);
    }
}

#[test]
fn two_ifs_give_four_paths_true_first() {
    let a = analysis("int f(int x, int y){ int r = 0; if (x > 0) { r = 1; } if (y > 0) { r = r + 2; } return r; }", "f");
    let seqs: Vec<Vec<bool>> = a.paths().iter().map(outcomes).collect();
    assert_eq!(seqs, vec![vec![true, true], vec![true, false], vec![false, true], vec![false, false]]);
}

#[test]
fn single_loop_bound_two() {
    let a = analysis("int f(int n){ int s = 0; while (s < n) { s = s + 1; } return s; }", "f");
    let paths = a.paths();
    assert_eq!(paths.len(), 4);
    let exits: Vec<_> = paths.iter().filter(|p| !p.bound_exceeded).collect();
    assert_eq!(exits.len(), 3);
    for (j, p) in exits.iter().enumerate() {
        let mut expected = vec![true; j];
        expected.push(false);
        assert_eq!(outcomes(p), expected);
    }
    let bound: Vec<_> = paths.iter().filter(|p| p.bound_exceeded).collect();
    assert_eq!(bound.len(), 1);
    assert!(outcomes(bound[0]).iter().all(|&o| o));
}

#[test]
fn for_and_do_while_unroll_like_while() {
    let a = analysis("int f(int n){ int s = 0; for (int i = 0; i < n; i = i + 1) { s = s + i; } return s; }", "f");
    assert_eq!(a.paths().len(), 4);
    assert_eq!(a.paths().iter().filter(|p| p.bound_exceeded).count(), 1);
    let d = analysis("int f(int n){ int s = 0; do { s = s + 1; } while (s < n); return s; }", "f");
    assert_eq!(d.paths().len(), 4);
    assert_eq!(outcomes(&d.paths()[0]), vec![false]);
}

#[test]
fn loop_bound_zero() {
    let p = parse("int f(int n){ while (n > 0) { n = n - 1; } return n; }").unwrap();
    let cfg = ExtractionConfig { loop_bound: 0, ..ExtractionConfig::for_entry("f") };
    let e = extract(&p, &cfg).unwrap();
    assert_eq!(e.paths.len(), 2);
    assert!(e.paths[1].bound_exceeded);
}

#[test]
fn variants_are_linear_and_asserts_point_at_conditions() {
    let ex = example("arg_parse").unwrap();
    let a = Analysis::from_source(ex.source, ex.config()).unwrap();
    let mut conditions = std::collections::BTreeSet::new();
    for f in &a.program.functions {
        f.body.walk(&mut |s| {
            if let Some(id) = palm_core::interp::condition_id(s) {
                conditions.insert(id);
            }
        });
    }
    for p in a.paths() {
        for s in &p.steps {
            assert!(!s.stmt.is_branch());
            if s.is_assert() {
                assert!(conditions.contains(&s.provenance));
            }
        }
    }
}

#[test]
fn max_paths_counts_every_path() {
    let src = "int f(int a, int b, int c){ if (a > 0) { a = 1; } if (b > 0) { b = 1; } if (c > 0) { c = 1; } return a + b + c; }";
    let p = parse(src).unwrap();
    let cfg = ExtractionConfig { max_paths: 5, ..ExtractionConfig::for_entry("f") };
    let e = extract(&p, &cfg).unwrap();
    assert_eq!(e.paths.len(), 5);
    assert!(e.truncated);
    let all = extract(&p, &ExtractionConfig::for_entry("f")).unwrap();
    assert_eq!(all.paths.len(), 8);
    assert!(!all.truncated);
}

#[test]
fn config_errors() {
    let p = parse("int f(){ return 1; }").unwrap();
    assert!(extract(&p, &ExtractionConfig::for_entry("g")).is_err());
    let cfg = ExtractionConfig { max_paths: 0, ..ExtractionConfig::for_entry("f") };
    assert!(extract(&p, &cfg).is_err());
    let mut cfg = ExtractionConfig::for_entry("f");
    cfg.symbolic_functions.insert("missing".into());
    assert!(extract(&p, &cfg).is_err());
}

const TWO_CALLS: &str = "
int b(int v) {
    if (v > 0) {
        return 1;
    }
    return 0;
}
int a(int x, int y) {
    int r = b(x) + b(y);
    return r;
}";

#[test]
fn symbolic_callee_called_twice_fans_out() {
    let mut cfg = ExtractionConfig::for_entry("a");
    cfg.symbolic_functions.insert("b".into());
    let an = Analysis::from_source(TWO_CALLS, cfg).unwrap();
    assert_eq!(an.paths().len(), 4);
    let text = an.paths()[0].pretty(&an.program);
    assert!(text.contains("int v_0 = x;"), "{text}");
    assert!(text.contains("int v_1 = y;"), "{text}");
    assert!(text.contains("int b_ret_0 = 1;") && text.contains("int b_ret_1 = 1;"), "{text}");
    // Both results are constants here, so the sum folds.
    assert!(text.contains("int r = 2;"), "{text}");
}

#[test]
fn non_symbolic_callee_stays_opaque() {
    let an = analysis(TWO_CALLS, "a");
    assert_eq!(an.paths().len(), 1);
    assert!(an.paths()[0].pretty(&an.program).contains("b(x) + b(y)"));
    assert!(an.extraction.inlined_sites.is_empty());
}

#[test]
fn recursion_is_inlined_up_to_the_bound() {
    let src = "int f(int n){ if (n <= 0) { return 0; } return 1 + f(n - 1); }";
    for bound in 0..4u32 {
        let cfg = ExtractionConfig { recursion_bound: bound, ..ExtractionConfig::for_entry("f") };
        let an = Analysis::from_source(src, cfg).unwrap();
        let deepest = an.paths().iter().find(|p| p.bound_exceeded).expect("a bound-exceeded path");
        let copies = deepest.steps.iter().filter(|s| matches!(&s.stmt.kind, StmtKind::Decl { name, .. } if name.starts_with("n_"))).count();
        assert_eq!(copies as u32, bound);
        assert_eq!(an.paths().iter().filter(|p| !p.bound_exceeded).count() as u32, bound + 1);
    }
}

#[test]
fn loop_locals_get_numbered_names() {
    let a = analysis("int f(int n){ int s = 0; while (s < n) { int i = s * 2; s = s + 1 + i; } return s; }", "f");
    let text = a.paths()[2].pretty(&a.program);
    assert!(text.contains("int i_0 = "), "{text}");
    assert!(text.contains("int i_1 = "), "{text}");
    let single = a.paths()[0].pretty(&a.program);
    assert!(!single.contains("i_0"));
}

#[test]
fn callee_parameter_colliding_with_caller_local() {
    let src = "int g(int x){ return x + 1; } int f(int a){ int x = a * 2; int y = g(x); return x + y; }";
    let mut cfg = ExtractionConfig::for_entry("f");
    cfg.symbolic_functions.insert("g".into());
    let an = Analysis::from_source(src, cfg).unwrap();
    let text = an.paths()[0].pretty(&an.program);
    assert!(text.contains("int x_0 = a * 2;"), "{text}");
    assert!(text.contains("int x_1 = x_0;"), "{text}");
    // The renamed variant is still a well-formed program body.
    assert!(parse(&text).is_ok(), "{text}");
}

#[test]
fn no_duplication_means_no_renaming() {
    let a = analysis("int f(int x){ int y = x + 1; if (y > 3) { return y; } return 0; }", "f");
    for p in a.paths() {
        assert!(!p.pretty(&a.program).contains("y_0"));
    }
}

#[test]
fn folding_prunes_constant_conditions() {
    let ex = example("pruned").unwrap();
    let a = Analysis::from_source(ex.source, ex.config()).unwrap();
    let pruned: Vec<_> = a.paths().iter().filter(|p| p.pruned_infeasible).collect();
    assert_eq!(pruned.len(), 1);
    assert_eq!(assert_texts(pruned[0]), vec!["assertTrue(x < y)"]);
    assert_eq!(a.paths().iter().filter(|p| p.is_feasible()).count(), 2);
    // The always-true assertion is hidden but kept.
    let live = &a.paths()[1];
    assert!(live.steps.iter().any(|s| s.is_assert() && !s.visible));
    assert!(live.pretty(&a.program).contains("assertTrue(a > 1);"));
}

#[test]
fn folding_can_be_disabled() {
    let ex = example("pruned").unwrap();
    let mut cfg = ex.config();
    cfg.fold = false;
    let a = Analysis::from_source(ex.source, cfg).unwrap();
    assert!(a.paths().iter().all(|p| !p.pruned_infeasible));
    assert_eq!(a.paths().len(), 3);
    let folded = fold_constants(&a.paths()[0]);
    assert!(folded.pruned_infeasible);
}

#[test]
fn variant_json_document() {
    let a = analysis(example("tutorial").unwrap().source, "tutorial");
    let doc = a.paths()[0].to_json();
    assert_eq!(doc["id"], 0);
    assert_eq!(doc["boundExceeded"], false);
    assert_eq!(doc["prunedInfeasible"], false);
    let steps = doc["steps"].as_array().unwrap();
    assert_eq!(steps[0]["kind"], "assert");
    assert_eq!(steps[0]["text"], "assertTrue(x > 0);");
    assert_eq!(steps[0]["assertExpected"], true);
    assert!(steps[0]["provenanceNodeId"].is_u64());
    assert_eq!(steps[1]["kind"], "assign");
    assert!(steps[1].get("assertExpected").is_none());
}
