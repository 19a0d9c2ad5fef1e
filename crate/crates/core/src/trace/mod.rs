//! Trace and monitor-plan files.
//!
//! Both formats are line based and canonical: equal values encode to equal
//! bytes, and every decode error names the offending line.

mod plan;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::lang::RuntimeErrorCode;

pub use plan::{decode_plan, encode_plan, MonitorPlan, PlanError, TraceMode};

/// Malformed input in one of the line-based formats.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {reason}")]
pub struct FormatError {
    pub line: usize,
    pub reason: String,
}

impl FormatError {
    pub fn new(line: usize, reason: impl Into<String>) -> Self {
        Self {
            line,
            reason: reason.into(),
        }
    }
}

/// Ordered variable bindings of one event.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Bindings(Vec<(String, i64)>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, name: impl Into<String>, value: i64) {
        self.0.push((name.into(), value));
    }

    pub fn get(&self, name: &str) -> Option<i64> {
        self.0.iter().find(|(n, _)| n == name).map(|&(_, v)| v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, i64)> {
        self.0.iter().map(|(n, v)| (n.as_str(), *v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: Into<String>> FromIterator<(S, i64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (S, i64)>>(iter: I) -> Self {
        Bindings(iter.into_iter().map(|(n, v)| (n.into(), v)).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Enter,
    /// Bindings hold the final parameter values followed by `ret`.
    Exit,
    Error(RuntimeErrorCode),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub func: String,
    pub bindings: Bindings,
}

impl TraceEvent {
    pub fn ret(&self) -> Option<i64> {
        match self.kind {
            EventKind::Exit => self.bindings.get("ret"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Version {
    Base,
    Upgraded,
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Version::Base => "base",
            Version::Upgraded => "upgraded",
        })
    }
}

impl FromStr for Version {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "base" => Ok(Version::Base),
            "upgraded" => Ok(Version::Upgraded),
            other => Err(format!("unknown version {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum TestVerdict {
    Pass,
    Fail,
}

impl fmt::Display for TestVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestVerdict::Pass => "pass",
            TestVerdict::Fail => "fail",
        })
    }
}

impl FromStr for TestVerdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pass" => Ok(TestVerdict::Pass),
            "fail" => Ok(TestVerdict::Fail),
            other => Err(format!("unknown verdict {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trace {
    pub version: Version,
    pub test_id: String,
    pub verdict: TestVerdict,
    pub events: Vec<TraceEvent>,
}

/// Identifiers used for test ids: no whitespace, no `=`, non-empty.
pub fn is_valid_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(|c| c.is_whitespace() || c == '=' || c == ',')
}

/// Checks the per-trace invariants: strictly increasing `seq`, stack-shaped
/// nesting of traced calls, `ret` on every exit, and an error event (if any)
/// that names the innermost open call and ends the trace.
pub fn check_well_formed(events: &[TraceEvent]) -> Result<(), String> {
    let mut stack: Vec<&str> = Vec::new();
    let mut last_seq: Option<u64> = None;
    let mut errored = false;
    for ev in events {
        if errored {
            return Err(format!("event {} follows an error event", ev.seq));
        }
        if let Some(prev) = last_seq {
            if ev.seq <= prev {
                return Err(format!("non-monotone seq {} after {}", ev.seq, prev));
            }
        }
        last_seq = Some(ev.seq);
        match ev.kind {
            EventKind::Enter => stack.push(&ev.func),
            EventKind::Exit => {
                if ev.bindings.get("ret").is_none() {
                    return Err(format!("exit event {} lacks ret", ev.seq));
                }
                match stack.pop() {
                    Some(top) if top == ev.func => {}
                    Some(top) => {
                        return Err(format!(
                            "nesting violation: exit of {} while {} is innermost",
                            ev.func, top
                        ))
                    }
                    None => {
                        return Err(format!("nesting violation: exit of {} without enter", ev.func))
                    }
                }
            }
            EventKind::Error(_) => {
                if stack.last() != Some(&ev.func.as_str()) {
                    return Err(format!(
                        "nesting violation: error in {} which is not the innermost call",
                        ev.func
                    ));
                }
                errored = true;
            }
        }
    }
    Ok(())
}

/// One call of a traced function, reconstructed from a trace.
#[derive(Debug, Clone)]
pub struct Invocation<'t> {
    pub enter: &'t TraceEvent,
    /// `None` when the call never returned (runtime error or budget).
    pub exit: Option<&'t TraceEvent>,
    /// Enter events of the traced calls made directly by this invocation,
    /// that is, with no traced call in between.
    pub calls: Vec<&'t TraceEvent>,
}

/// Every invocation of `func` in `events`, in order of entry.
pub fn invocations<'t>(events: &'t [TraceEvent], func: &str) -> Vec<Invocation<'t>> {
    let mut out: Vec<Invocation<'t>> = Vec::new();
    // per open traced call: index into `out` when it is a call of `func`
    let mut stack: Vec<Option<usize>> = Vec::new();
    for ev in events {
        match ev.kind {
            EventKind::Enter => {
                if let Some(Some(parent)) = stack.last() {
                    out[*parent].calls.push(ev);
                }
                if ev.func == func {
                    out.push(Invocation {
                        enter: ev,
                        exit: None,
                        calls: Vec::new(),
                    });
                    stack.push(Some(out.len() - 1));
                } else {
                    stack.push(None);
                }
            }
            EventKind::Exit => {
                if let Some(Some(idx)) = stack.pop() {
                    out[idx].exit = Some(ev);
                }
            }
            EventKind::Error(_) => break,
        }
    }
    out
}

pub fn encode_traces(traces: &[Trace]) -> String {
    let mut out = String::from("#traces\n");
    for t in traces {
        out.push_str(&format!(
            "#trace version={} test={} verdict={}\n",
            t.version, t.test_id, t.verdict
        ));
        for ev in &t.events {
            out.push_str(&encode_event(ev));
            out.push('\n');
        }
        out.push_str("#endtrace\n");
    }
    out.push_str("#end\n");
    out
}

fn encode_event(ev: &TraceEvent) -> String {
    let mut line = format!("E {} ", ev.seq);
    match ev.kind {
        EventKind::Enter => {
            line.push_str("ENTER ");
            line.push_str(&ev.func);
            for (n, v) in ev.bindings.iter() {
                line.push_str(&format!(" {n}={v}"));
            }
        }
        EventKind::Exit => {
            line.push_str("EXIT ");
            line.push_str(&ev.func);
            if let Some(ret) = ev.bindings.get("ret") {
                line.push_str(&format!(" ret={ret}"));
            }
            for (n, v) in ev.bindings.iter().filter(|(n, _)| *n != "ret") {
                line.push_str(&format!(" {n}={v}"));
            }
        }
        EventKind::Error(code) => {
            line.push_str(&format!("ERROR {} {}", ev.func, code));
        }
    }
    line
}

pub fn decode_traces(text: &str) -> Result<Vec<Trace>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "#traces")) => {}
        Some((n, other)) => return Err(FormatError::new(n, format!("expected '#traces', found {other:?}"))),
        None => return Err(FormatError::new(1, "empty input")),
    }

    let mut traces = Vec::new();
    let mut current: Option<(usize, Trace)> = None;
    let mut ended = false;
    for (n, line) in lines.by_ref() {
        if line == "#end" {
            if current.is_some() {
                return Err(FormatError::new(n, "'#end' inside an open trace"));
            }
            ended = true;
            break;
        }
        if let Some(header) = line.strip_prefix("#trace ") {
            if current.is_some() {
                return Err(FormatError::new(n, "nested '#trace'"));
            }
            current = Some((n, parse_trace_header(n, header)?));
        } else if line == "#endtrace" {
            let Some((start, trace)) = current.take() else {
                return Err(FormatError::new(n, "'#endtrace' without '#trace'"));
            };
            check_well_formed(&trace.events).map_err(|e| FormatError::new(start, e))?;
            traces.push(trace);
        } else if let Some(rest) = line.strip_prefix("E ") {
            let Some((_, trace)) = current.as_mut() else {
                return Err(FormatError::new(n, "event outside a trace"));
            };
            trace.events.push(parse_event(n, rest)?);
        } else {
            return Err(FormatError::new(n, format!("unrecognized line {line:?}")));
        }
    }
    if !ended {
        return Err(FormatError::new(text.lines().count(), "missing '#end'"));
    }
    if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(FormatError::new(n, "content after '#end'"));
    }
    Ok(traces)
}

fn parse_trace_header(n: usize, header: &str) -> Result<Trace, FormatError> {
    let fields: Vec<&str> = header.split(' ').collect();
    let [v, t, r] = fields.as_slice() else {
        return Err(FormatError::new(n, "trace header needs version, test and verdict"));
    };
    let value = |field: &str, key: &str| -> Result<String, FormatError> {
        field
            .strip_prefix(key)
            .and_then(|s| s.strip_prefix('='))
            .map(str::to_string)
            .ok_or_else(|| FormatError::new(n, format!("expected {key}=..., found {field:?}")))
    };
    let version = value(v, "version")?
        .parse()
        .map_err(|e: String| FormatError::new(n, e))?;
    let test_id = value(t, "test")?;
    if !is_valid_token(&test_id) {
        return Err(FormatError::new(n, format!("invalid test id {test_id:?}")));
    }
    let verdict = value(r, "verdict")?
        .parse()
        .map_err(|e: String| FormatError::new(n, e))?;
    Ok(Trace {
        version,
        test_id,
        verdict,
        events: Vec::new(),
    })
}

pub(crate) fn parse_int(n: usize, s: &str) -> Result<i64, FormatError> {
    let digits = s.strip_prefix('-').unwrap_or(s);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(FormatError::new(n, format!("invalid integer {s:?}")));
    }
    s.parse()
        .map_err(|_| FormatError::new(n, format!("integer {s:?} out of range")))
}

pub(crate) fn is_name(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn parse_event(n: usize, rest: &str) -> Result<TraceEvent, FormatError> {
    let fields: Vec<&str> = rest.split(' ').collect();
    if fields.len() < 3 {
        return Err(FormatError::new(n, "event needs seq, kind and function"));
    }
    let seq: u64 = fields[0]
        .parse()
        .map_err(|_| FormatError::new(n, format!("invalid seq {:?}", fields[0])))?;
    let func = fields[2];
    if !is_name(func) {
        return Err(FormatError::new(n, format!("invalid function name {func:?}")));
    }
    let parse_bindings = |items: &[&str]| -> Result<Vec<(String, i64)>, FormatError> {
        let mut out: Vec<(String, i64)> = Vec::new();
        for item in items {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| FormatError::new(n, format!("expected name=value, found {item:?}")))?;
            if !is_name(k) {
                return Err(FormatError::new(n, format!("invalid variable name {k:?}")));
            }
            if out.iter().any(|(existing, _)| existing == k) {
                return Err(FormatError::new(n, format!("duplicate binding {k}")));
            }
            out.push((k.to_string(), parse_int(n, v)?));
        }
        Ok(out)
    };

    let (kind, bindings) = match fields[1] {
        "ENTER" => {
            let b = parse_bindings(&fields[3..])?;
            if b.iter().any(|(k, _)| k == "ret") {
                return Err(FormatError::new(n, "enter event cannot bind ret"));
            }
            (EventKind::Enter, b.into_iter().collect())
        }
        "EXIT" => {
            let mut b = parse_bindings(&fields[3..])?;
            match b.first() {
                Some((k, _)) if k == "ret" => {}
                _ => return Err(FormatError::new(n, "exit event must start with ret=")),
            }
            let ret = b.remove(0);
            b.push(ret);
            (EventKind::Exit, b.into_iter().collect())
        }
        "ERROR" => {
            let [code] = &fields[3..] else {
                return Err(FormatError::new(n, "error event needs exactly one error code"));
            };
            let code = code.parse().map_err(|e: String| FormatError::new(n, e))?;
            (EventKind::Error(code), Bindings::new())
        }
        other => return Err(FormatError::new(n, format!("unknown event kind {other:?}"))),
    };
    Ok(TraceEvent {
        seq,
        kind,
        func: func.to_string(),
        bindings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn enter(seq: u64, func: &str, b: &[(&str, i64)]) -> TraceEvent {
        TraceEvent {
            seq,
            kind: EventKind::Enter,
            func: func.into(),
            bindings: b.iter().map(|&(k, v)| (k, v)).collect(),
        }
    }

    fn exit(seq: u64, func: &str, b: &[(&str, i64)]) -> TraceEvent {
        TraceEvent {
            kind: EventKind::Exit,
            ..enter(seq, func, b)
        }
    }

    #[test]
    fn empty_round_trip() {
        assert_eq!(encode_traces(&[]), "#traces\n#end\n");
        assert_eq!(decode_traces("#traces\n#end\n").unwrap(), vec![]);
    }

    #[test]
    fn base_fixture_trace_encoding() {
        let trace = Trace {
            version: Version::Base,
            test_id: "t1".into(),
            verdict: TestVerdict::Pass,
            events: vec![
                enter(0, "main", &[("cmd", 3)]),
                enter(1, "clamp", &[("x", 3)]),
                exit(2, "clamp", &[("x", 3), ("ret", 3)]),
                exit(3, "main", &[("cmd", 3), ("ret", 3)]),
            ],
        };
        let text = encode_traces(std::slice::from_ref(&trace));
        assert_eq!(
            text,
            "#traces\n\
             #trace version=base test=t1 verdict=pass\n\
             E 0 ENTER main cmd=3\n\
             E 1 ENTER clamp x=3\n\
             E 2 EXIT clamp ret=3 x=3\n\
             E 3 EXIT main ret=3 cmd=3\n\
             #endtrace\n\
             #end\n"
        );
        assert_eq!(decode_traces(&text).unwrap(), vec![trace]);
    }

    #[test]
    fn decode_errors_carry_line_numbers() {
        let cases = [
            ("#traces\n#trace version=base test=t verdict=pass\nE 0 ENTER f x=1\nE 0 ENTER g\n#endtrace\n#end\n", 2, "non-monotone"),
            ("#traces\n#trace version=base test=t verdict=pass\nE 0 ENTER f\nE 1 EXIT g ret=0\n#endtrace\n#end\n", 2, "nesting"),
            ("#traces\n#trace version=base test=t verdict=pass\nE 0 EXIT f x=1 ret=0\n#endtrace\n#end\n", 3, "start with ret"),
            ("#traces\n#trace version=sideways test=t verdict=pass\n#endtrace\n#end\n", 2, "unknown version"),
            ("#traces\nE 0 ENTER f\n#end\n", 2, "outside a trace"),
            ("#traces\n#trace version=base test=t verdict=pass\nE 0 ENTER f x=abc\n#endtrace\n#end\n", 3, "invalid integer"),
            ("#traces\n", 1, "missing '#end'"),
            ("#traces\n#trace version=base test=t verdict=pass\nE 0 ENTER f\nE 1 ERROR f div_by_zero\nE 2 EXIT f ret=0\n#endtrace\n#end\n", 2, "follows an error"),
        ];
        for (text, line, needle) in cases {
            let err = decode_traces(text).unwrap_err();
            assert_eq!(err.line, line, "{text:?}: {err}");
            assert!(err.reason.contains(needle), "{text:?}: {err}");
        }
    }

    fn arb_trace() -> impl Strategy<Value = Trace> {
        // A well-formed trace: a random walk over an enter/exit stack.
        (
            prop::bool::ANY,
            "[a-z][a-z0-9_]{0,6}",
            prop::bool::ANY,
            prop::collection::vec((0u8..3, 0usize..3, any::<i64>()), 0..24),
        )
            .prop_map(|(upgraded, test_id, pass, steps)| {
                let funcs = ["f", "g", "h_1"];
                let mut events = Vec::new();
                let mut stack: Vec<&str> = Vec::new();
                for (seq, (action, f, v)) in steps.into_iter().enumerate() {
                    let seq = seq as u64;
                    if action == 0 || stack.is_empty() {
                        events.push(enter(seq, funcs[f], &[("a", v), ("b", v / 2)]));
                        stack.push(funcs[f]);
                    } else {
                        let func = stack.pop().unwrap();
                        events.push(exit(seq, func, &[("a", v), ("ret", v.wrapping_neg())]));
                    }
                }
                Trace {
                    version: if upgraded { Version::Upgraded } else { Version::Base },
                    test_id,
                    verdict: if pass { TestVerdict::Pass } else { TestVerdict::Fail },
                    events,
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip(traces in prop::collection::vec(arb_trace(), 0..4)) {
            let text = encode_traces(&traces);
            let decoded = decode_traces(&text).unwrap();
            prop_assert_eq!(&decoded, &traces);
            prop_assert_eq!(encode_traces(&decoded), text);
        }
    }
}
