use std::collections::BTreeMap;

use super::{require_base, MineError};
use crate::property::{CmpOp, Invariant, Operand, Point, Property};
use crate::trace::{Bindings, EventKind, MonitorPlan, Trace};

/// Template-based value invariants for every monitored (function, point)
/// with at least `min_support` samples.
///
/// Unary templates: `x == c` when constant, otherwise `x >= min`, `x <= max`
/// and `x != 0` when zero was never seen. Pair templates, for variables in
/// binding order: `x == y` alone when always equal, otherwise each of
/// `x <= y`, `x >= y`, `x != y` that held on every sample.
pub fn mine_invariants(
    traces: &[Trace],
    plan: &MonitorPlan,
    min_support: usize,
) -> Result<Vec<Property>, MineError> {
    require_base(traces)?;
    let mut samples: BTreeMap<(&str, Point), Vec<&Bindings>> = BTreeMap::new();
    for trace in traces {
        for ev in &trace.events {
            if !plan.monitored().contains(&ev.func) {
                continue;
            }
            let point = match ev.kind {
                EventKind::Enter => Point::Entry,
                EventKind::Exit => Point::Exit,
                EventKind::Error(_) => continue,
            };
            samples.entry((ev.func.as_str(), point)).or_default().push(&ev.bindings);
        }
    }

    let mut out = Vec::new();
    for ((func, point), rows) in samples {
        if rows.len() < min_support.max(1) {
            continue;
        }
        let vars: Vec<&str> = rows[0]
            .names()
            .filter(|v| rows.iter().all(|r| r.get(v).is_some()))
            .collect();
        let column = |v: &str| -> Vec<i64> { rows.iter().map(|r| r.get(v).unwrap()).collect() };
        let mut emit = |lhs: &str, op: CmpOp, rhs: Operand| {
            out.push(Property::invariant(
                func,
                Invariant {
                    point,
                    lhs: lhs.to_string(),
                    op,
                    rhs,
                },
            ));
        };

        for &x in &vars {
            let xs = column(x);
            let (lo, hi) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
            if lo == hi {
                emit(x, CmpOp::Eq, Operand::Const(lo));
                continue;
            }
            emit(x, CmpOp::Ge, Operand::Const(lo));
            emit(x, CmpOp::Le, Operand::Const(hi));
            if !xs.contains(&0) {
                emit(x, CmpOp::Ne, Operand::Const(0));
            }
        }

        for (i, &x) in vars.iter().enumerate() {
            let xs = column(x);
            for &y in &vars[i + 1..] {
                let ys = column(y);
                let all = |op: CmpOp| xs.iter().zip(&ys).all(|(a, b)| op.holds(*a, *b));
                let rhs = || Operand::Var(y.to_string());
                if all(CmpOp::Eq) {
                    emit(x, CmpOp::Eq, rhs());
                    continue;
                }
                for op in [CmpOp::Le, CmpOp::Ge, CmpOp::Ne] {
                    if all(op) {
                        emit(x, op, rhs());
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, run_suite, Scenario};
    use crate::trace::Version;

    const BASE: &str = "fn main(cmd){ let s = clamp(cmd); return s; }\n\
                        fn clamp(x){ if x < 0 { return 0; } if x > 10 { return 10; } return x; }\n";

    fn run(src: &str, param: &str, args: &[i64], plan: &MonitorPlan) -> Vec<Trace> {
        let p = parse_program(src).unwrap();
        let mut text = format!("#scenario\ndomain {param} -1000 1000\n");
        for (i, a) in args.iter().enumerate() {
            text.push_str(&format!("test t{i} args={a} expect=error\n"));
        }
        text.push_str("#end\n");
        run_suite(&p, &Scenario::parse(&text).unwrap(), plan, Version::Base, 100_000).unwrap()
    }

    fn ids(props: &[Property]) -> Vec<&str> {
        props.iter().map(|p| p.id.as_str()).collect()
    }

    #[test]
    fn no_traces() {
        assert!(mine_invariants(&[], &MonitorPlan::monitoring(["main"]), 3).unwrap().is_empty());
    }

    #[test]
    fn speed_fixture() {
        let plan = MonitorPlan::monitoring(["main"]);
        let props = mine_invariants(&run(BASE, "cmd", &[0, 3, 10], &plan), &plan, 3).unwrap();
        assert_eq!(
            ids(&props),
            [
                "main@entry:cmd<=10",
                "main@entry:cmd>=0",
                "main@exit:cmd<=10",
                "main@exit:cmd==ret",
                "main@exit:cmd>=0",
                "main@exit:ret<=10",
                "main@exit:ret>=0",
            ]
        );
    }

    #[test]
    fn support_threshold() {
        let plan = MonitorPlan::monitoring(["main"]);
        let traces = run("fn main(x){ return x; }", "x", &[5], &plan);
        assert!(mine_invariants(&traces, &plan, 2).unwrap().is_empty());
        assert_eq!(
            ids(&mine_invariants(&traces, &plan, 1).unwrap()),
            ["main@entry:x==5", "main@exit:ret==5", "main@exit:x==5", "main@exit:x==ret"]
        );
    }

    #[test]
    fn pair_templates() {
        let plan = MonitorPlan::monitoring(["f"]);
        let src = "fn main(a){ return f(a, a + 1) + f(a, a + 5); } fn f(x, y){ return y - x; }";
        let traces = run(src, "a", &[-4, 2, 9], &plan);
        let props = mine_invariants(&traces, &plan, 3).unwrap();
        let entry: Vec<&str> = ids(&props).into_iter().filter(|i| i.starts_with("f@entry")).collect();
        assert_eq!(
            entry,
            [
                "f@entry:x!=0",
                "f@entry:x!=y",
                "f@entry:x<=9",
                "f@entry:x<=y",
                "f@entry:x>=-4",
                "f@entry:y!=0",
                "f@entry:y<=14",
                "f@entry:y>=-3",
            ]
        );
        // y - x is 1 or 5: ret is never zero and never equal to x or y
        assert!(ids(&props).contains(&"f@exit:ret>=1"));
        assert!(ids(&props).contains(&"f@exit:ret<=5"));
    }

    #[test]
    fn error_events_are_not_samples() {
        let plan = MonitorPlan::monitoring(["main"]);
        let traces = run("fn main(x){ return 10 / x; }", "x", &[0, 0, 0], &plan);
        let props = mine_invariants(&traces, &plan, 3).unwrap();
        assert_eq!(ids(&props), ["main@entry:x==0"]);
    }
}
