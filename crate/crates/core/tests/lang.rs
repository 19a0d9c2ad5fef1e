mod common;

use common::{parsed, random_program, read_fixture, rng, self_consistent_scenario, Shape};
use regwatch_core::lang::{
    call_graph, diff_programs, execute, parse_program, run_suite, Outcome, ParseErrorKind, RuntimeErrorCode,
    Scenario,
};
use regwatch_core::trace::{check_well_formed, encode_traces, EventKind, MonitorPlan, TestVerdict, Trace, Version};

fn render(events: &[regwatch_core::trace::TraceEvent]) -> Vec<String> {
    events
        .iter()
        .map(|e| {
            let kind = match e.kind {
                EventKind::Enter => "Enter".to_string(),
                EventKind::Exit => "Exit".to_string(),
                EventKind::Error(code) => return format!("Error {} {code}", e.func),
            };
            let vars: Vec<String> = e.bindings.iter().map(|(n, v)| format!("{n}={v}")).collect();
            format!("{kind} {} {}", e.func, vars.join(" ")).trim_end().to_string()
        })
        .collect()
}

#[test]
fn identity_program() {
    let p = parse_program("fn main(x) { return x; }").unwrap();
    assert_eq!(p.entry().name(), "main");
    assert_eq!(p.functions().len(), 1);
}

#[test]
fn unbound_variable() {
    let err = parse_program("fn main(x) { return y; }").unwrap_err();
    assert_eq!(err.kind, ParseErrorKind::Semantic);
    assert!(err.message.contains('y'), "{err}");
}

#[test]
fn fixture_programs() {
    let base = parse_program(&read_fixture("base.mp")).unwrap();
    assert_eq!(base.names().collect::<Vec<_>>(), ["clamp", "main"]);
    assert_eq!(base.entry().name(), "main");

    let upgraded = parse_program(&read_fixture("upgraded.mp")).unwrap();
    let d = diff_programs(&base, &upgraded);
    assert_eq!(d.changed.iter().collect::<Vec<_>>(), ["clamp"]);
    assert!(d.added.is_empty() && d.deleted.is_empty());
    assert!(diff_programs(&base, &base).is_empty());

    let cg = call_graph(&base);
    assert!(cg.calls("main", "clamp"));
    assert!(cg.edges["clamp"].is_empty());
}

#[test]
fn formatting_is_not_a_change() {
    let a = parsed("fn main(x) { let y = x + 1; return y; }");
    let b = parsed("fn main(x) {\n  // comment\n  let y = x   +   1;\n  return y;\n}\n");
    assert!(diff_programs(&a, &b).is_empty());
}

#[test]
fn added_function() {
    let a = parsed("fn main(x) { return x; }");
    let b = parsed("fn main(x) { return x; } fn g() { return 1; }");
    let d = diff_programs(&a, &b);
    assert_eq!(d.added.iter().collect::<Vec<_>>(), ["g"]);
}

#[test]
fn recursive_self_edge() {
    let p = parsed("fn f(n) { if n < 1 { return 0; } return f(n - 1); }");
    assert!(p.function("f").is_some());
    assert!(call_graph(&p).calls("f", "f"));
}

#[test]
fn execute_fixture_with_full_monitoring() {
    let p = parsed(&read_fixture("base.mp"));
    let (outcome, events) = execute(&p, &[3], 10_000, &MonitorPlan::monitoring(["main", "clamp"])).unwrap();
    assert_eq!(outcome, Outcome::Returned(3));
    assert_eq!(
        render(&events),
        ["Enter main cmd=3", "Enter clamp x=3", "Exit clamp x=3 ret=3", "Exit main cmd=3 ret=3"]
    );
}

#[test]
fn division_by_zero() {
    let p = parsed("fn main(x){ return x / 0; }");
    let (outcome, events) = execute(&p, &[1], 100, &MonitorPlan::monitoring(["main"])).unwrap();
    assert_eq!(outcome, Outcome::RuntimeError(RuntimeErrorCode::DivByZero));
    assert_eq!(render(&events), ["Enter main x=1", "Error main div_by_zero"]);
}

#[test]
fn budget_exhaustion() {
    let p = parsed("fn main(x){ while 1 { } }");
    let (outcome, events) = execute(&p, &[0], 50, &MonitorPlan::monitoring(["main"])).unwrap();
    assert_eq!(outcome, Outcome::BudgetExhausted);
    assert_eq!(render(&events), ["Enter main x=0"]);
}

#[test]
fn suites() {
    let p = parsed(&read_fixture("base.mp"));
    let empty = Scenario::parse("#scenario\ndomain cmd 0 1\n#end\n").unwrap();
    assert!(run_suite(&p, &empty, &MonitorPlan::default(), Version::Base, 100).unwrap().is_empty());

    let s = Scenario::parse("#scenario\ndomain cmd -5 15\ntest t1 args=3 expect=3\n#end\n").unwrap();
    let t = run_suite(&p, &s, &MonitorPlan::default(), Version::Base, 100).unwrap();
    assert_eq!((t.len(), t[0].verdict), (1, TestVerdict::Pass));

    let buggy = parsed(&read_fixture("buggy.mp"));
    let s = Scenario::parse(&read_fixture("upgraded.scenario")).unwrap();
    let t = run_suite(&buggy, &s, &MonitorPlan::default(), Version::Upgraded, 100).unwrap();
    let verdicts: Vec<(&str, TestVerdict)> = t.iter().map(|t| (t.test_id.as_str(), t.verdict)).collect();
    assert_eq!(
        verdicts,
        [("t4", TestVerdict::Pass), ("t5", TestVerdict::Pass), ("t9", TestVerdict::Fail)]
    );
    let (outcome, _) = execute(&buggy, &[12], 100, &MonitorPlan::default()).unwrap();
    assert_eq!(outcome, Outcome::Returned(20));
}

/// Determinism, monitoring transparency, well-formed events and budget
/// monotonicity on generated programs.
#[test]
fn execution_laws_on_generated_programs() {
    for seed in 0..150 {
        let mut r = rng(1000 + seed);
        let shape = Shape {
            functions: 1 + seed as usize % 4,
            entry_params: 1 + seed as usize % 2,
            division: true,
        };
        let p = parsed(&random_program(&mut r, shape));
        let s = self_consistent_scenario(&mut r, &p, 3, 4);
        let all: Vec<String> = p.names().map(str::to_string).collect();
        let full = MonitorPlan::monitoring(all);
        for test in s.tests() {
            let (o1, e1) = execute(&p, &test.args, 100_000, &full).unwrap();
            let (o2, e2) = execute(&p, &test.args, 100_000, &full).unwrap();
            assert_eq!((o1, &e1), (o2, &e2));
            let (quiet, none) = execute(&p, &test.args, 100_000, &MonitorPlan::default()).unwrap();
            assert_eq!(o1, quiet, "seed {seed}");
            assert!(none.is_empty());
            check_well_formed(&e1).unwrap_or_else(|e| panic!("seed {seed}: {e}"));

            // the smallest budget that completes, found by doubling, keeps working above it
            let mut b = 1;
            while execute(&p, &test.args, b, &MonitorPlan::default()).unwrap().0 == Outcome::BudgetExhausted {
                b *= 2;
            }
            for extra in [b, b + 1, b * 3] {
                assert_eq!(execute(&p, &test.args, extra, &MonitorPlan::default()).unwrap().0, o1);
            }
        }
        let traces: Vec<Trace> = run_suite(&p, &s, &full, Version::Base, 100_000).unwrap();
        assert_eq!(
            encode_traces(&traces),
            encode_traces(&run_suite(&p, &s, &full, Version::Base, 100_000).unwrap())
        );
    }
}
