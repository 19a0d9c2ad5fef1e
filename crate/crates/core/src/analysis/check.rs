use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::miner::Rejection;
use crate::property::{Point, Property, PropertyKind};
use crate::trace::{invocations, is_name, parse_int, Bindings, EventKind, Trace, TraceEvent};

/// What a violating event showed.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Observation {
    /// The event's values of the variables the invariant reads.
    Bindings(Bindings),
    /// A direct call the automaton has no transition for.
    Call(String),
    /// The invocation returned in a non-accepting state.
    End,
}

impl Observation {
    pub fn var_names(&self) -> Vec<&str> {
        match self {
            Observation::Bindings(b) => b.names().collect(),
            _ => Vec::new(),
        }
    }
}

/// `cmd=12,ret=20`, `call:clamp` or `end`.
impl fmt::Display for Observation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Observation::Bindings(b) => {
                let parts: Vec<String> = b.iter().map(|(n, v)| format!("{n}={v}")).collect();
                f.write_str(&parts.join(","))
            }
            Observation::Call(sym) => write!(f, "call:{sym}"),
            Observation::End => f.write_str("end"),
        }
    }
}

impl FromStr for Observation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "end" {
            return Ok(Observation::End);
        }
        if let Some(sym) = s.strip_prefix("call:") {
            if !is_name(sym) {
                return Err(format!("invalid call symbol {sym:?}"));
            }
            return Ok(Observation::Call(sym.to_string()));
        }
        let mut b = Bindings::new();
        for part in s.split(',') {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| format!("invalid observation {s:?}"))?;
            if !is_name(name) {
                return Err(format!("invalid variable name {name:?}"));
            }
            let value = parse_int(0, value).map_err(|e| e.reason)?;
            b.push(name, value);
        }
        Ok(Observation::Bindings(b))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Violation {
    pub property_id: String,
    pub test_id: String,
    /// Function the violated property is about.
    pub func: String,
    pub event_seq: u64,
    pub observed: Observation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("property {property}: event {seq} has no binding for {var}")]
pub struct CheckError {
    pub property: String,
    pub seq: u64,
    pub var: String,
}

/// Every violation of `prop` in `trace`, ordered by event seq.
pub fn check_trace(prop: &Property, trace: &Trace) -> Result<Vec<Violation>, CheckError> {
    check_events(prop, &trace.test_id, &trace.events)
}

pub(crate) fn check_events(
    prop: &Property,
    test_id: &str,
    events: &[TraceEvent],
) -> Result<Vec<Violation>, CheckError> {
    let violation = |ev: &TraceEvent, observed| Violation {
        property_id: prop.id.clone(),
        test_id: test_id.to_string(),
        func: prop.func.clone(),
        event_seq: ev.seq,
        observed,
    };
    let mut out = Vec::new();
    match &prop.kind {
        PropertyKind::Invariant(inv) => {
            let kind = match inv.point {
                Point::Entry => EventKind::Enter,
                Point::Exit => EventKind::Exit,
            };
            for ev in events.iter().filter(|e| e.kind == kind && e.func == prop.func) {
                let holds = inv.holds(&ev.bindings).map_err(|var| CheckError {
                    property: prop.id.clone(),
                    seq: ev.seq,
                    var,
                })?;
                if !holds {
                    let vars = inv.vars();
                    let seen = ev.bindings.iter().filter(|(n, _)| vars.contains(n)).collect();
                    out.push(violation(ev, Observation::Bindings(seen)));
                }
            }
        }
        PropertyKind::Automaton { automaton, .. } => {
            for inv in invocations(events, &prop.func) {
                let Some(exit) = inv.exit else { continue };
                let symbols: Vec<&str> = inv.calls.iter().map(|e| e.func.as_str()).collect();
                match automaton.run(&symbols) {
                    Ok(_) => {}
                    Err(Rejection::Symbol(i)) => {
                        out.push(violation(inv.calls[i], Observation::Call(symbols[i].to_string())))
                    }
                    Err(Rejection::End) => out.push(violation(exit, Observation::End)),
                }
            }
        }
    }
    out.sort_by_key(|v| v.event_seq);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{execute, parse_program};
    use crate::miner::build_pta;
    use crate::property::{CmpOp, Invariant, Operand};
    use crate::trace::{MonitorPlan, TestVerdict, Version};

    fn ret_ge_0() -> Property {
        Property::invariant(
            "main",
            Invariant {
                point: Point::Exit,
                lhs: "ret".into(),
                op: CmpOp::Ge,
                rhs: Operand::Const(0),
            },
        )
    }

    fn trace_of(src: &str, args: &[i64], funcs: &[&str]) -> Trace {
        let p = parse_program(src).unwrap();
        let (_, events) = execute(&p, args, 10_000, &MonitorPlan::monitoring(funcs.iter().copied())).unwrap();
        Trace {
            version: Version::Upgraded,
            test_id: "t".into(),
            verdict: TestVerdict::Pass,
            events,
        }
    }

    const UPG: &str = "fn main(cmd){ let s = clamp(cmd); return s; }\n\
                       fn clamp(x){ if x < -10 { return -10; } if x > 10 { return 10; } return x; }\n";

    #[test]
    fn satisfied_invariant() {
        assert!(check_trace(&ret_ge_0(), &trace_of(UPG, &[3], &["main"])).unwrap().is_empty());
    }

    #[test]
    fn negative_speed_violates_ret_ge_0() {
        let t = trace_of(UPG, &[-3], &["main", "clamp"]);
        let v = check_trace(&ret_ge_0(), &t).unwrap();
        assert_eq!(v.len(), 1);
        // ENTER main, ENTER clamp, EXIT clamp, EXIT main
        assert_eq!(v[0].event_seq, 3);
        assert_eq!(v[0].func, "main");
        assert_eq!(v[0].observed.to_string(), "ret=-3");
    }

    #[test]
    fn missing_variable_is_an_error() {
        let mut p = ret_ge_0();
        p.kind = PropertyKind::Invariant(Invariant {
            point: Point::Entry,
            lhs: "speed".into(),
            op: CmpOp::Ge,
            rhs: Operand::Const(0),
        });
        let err = check_trace(&p, &trace_of(UPG, &[1], &["main"])).unwrap_err();
        assert_eq!(err.var, "speed");
        assert_eq!(err.seq, 0);
    }

    #[test]
    fn automaton_rejects_second_call() {
        let prop = Property::automaton("main", 2, build_pta(&[vec!["clamp"]]));
        let src = "fn main(c){ let a = clamp(c); let b = clamp(a); return b; } fn clamp(x){ return x; }";
        let t = trace_of(src, &[1], &["main", "clamp"]);
        let v = check_trace(&prop, &t).unwrap();
        assert_eq!(v.len(), 1);
        // ENTER main 0, ENTER clamp 1, EXIT clamp 2, ENTER clamp 3
        assert_eq!(v[0].event_seq, 3);
        assert_eq!(v[0].observed, Observation::Call("clamp".into()));
    }

    #[test]
    fn automaton_rejects_early_end() {
        let prop = Property::automaton("main", 2, build_pta(&[vec!["clamp", "clamp"]]));
        let src = "fn main(c){ return clamp(c); } fn clamp(x){ return x; }";
        let v = check_trace(&prop, &trace_of(src, &[1], &["main", "clamp"])).unwrap();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].event_seq, 3);
        assert_eq!(v[0].observed, Observation::End);
    }

    #[test]
    fn unfinished_invocations_are_skipped() {
        let prop = Property::automaton("main", 2, build_pta(&[vec!["clamp"]]));
        let src = "fn main(c){ let a = clamp(c); let b = clamp(a); return 1 / 0; } fn clamp(x){ return x; }";
        assert!(check_trace(&prop, &trace_of(src, &[1], &["main", "clamp"])).unwrap().is_empty());
    }

    #[test]
    fn observation_text_round_trip() {
        for s in ["end", "call:clamp", "ret=-3", "cmd=12,ret=20"] {
            assert_eq!(s.parse::<Observation>().unwrap().to_string(), s);
        }
        for bad in ["", "call:", "x", "x=", "=1", "x=1,"] {
            assert!(bad.parse::<Observation>().is_err(), "{bad:?}");
        }
    }
}
