//! Line-oriented analysis file:
//!
//! ```text
//! #analysis
//! anomaly <prop-id> test=<id> seq=<n> origin=<proved|unknown> func=<f> observed=<obs>
//! edge <i> <j> reason=<shared_variable|call_relation>
//! fault <prop-id> args=<ints> outcome=<returned:v|error:code|budget_exhausted>
//! #end
//! ```
//!
//! Edge indices count anomaly lines from zero.

use super::{Analysis, Anomaly, Edge, RegressionFaultReport, Violation};
use crate::trace::{is_name, is_valid_token, parse_int, FormatError};

pub fn encode_analysis(a: &Analysis) -> String {
    let mut out = String::from("#analysis\n");
    for x in &a.anomalies {
        let v = &x.violation;
        out.push_str(&format!(
            "anomaly {} test={} seq={} origin={} func={} observed={}\n",
            v.property_id, v.test_id, v.event_seq, x.origin, v.func, v.observed
        ));
    }
    for e in &a.edges {
        out.push_str(&format!("edge {} {} reason={}\n", e.from, e.to, e.reason));
    }
    for f in &a.faults {
        let args: Vec<String> = f.args.iter().map(i64::to_string).collect();
        out.push_str(&format!(
            "fault {} args={} outcome={}\n",
            f.property_id,
            args.join(","),
            f.outcome
        ));
    }
    out.push_str("#end\n");
    out
}

fn field<'a>(n: usize, fields: &[&'a str], i: usize, key: &str) -> Result<&'a str, FormatError> {
    fields
        .get(i)
        .and_then(|f| f.strip_prefix(key))
        .and_then(|f| f.strip_prefix('='))
        .ok_or_else(|| FormatError::new(n, format!("expected {key}=... as field {}", i + 1)))
}

fn arity(n: usize, fields: &[&str], want: usize) -> Result<(), FormatError> {
    if fields.len() == want {
        Ok(())
    } else {
        Err(FormatError::new(n, format!("expected {want} fields, found {}", fields.len())))
    }
}

fn prop_id(n: usize, s: &str) -> Result<String, FormatError> {
    if s.contains('@') {
        Ok(s.to_string())
    } else {
        Err(FormatError::new(n, format!("invalid property id {s:?}")))
    }
}

fn index(n: usize, s: &str) -> Result<usize, FormatError> {
    s.parse()
        .map_err(|_| FormatError::new(n, format!("invalid index {s:?}")))
}

pub fn decode_analysis(text: &str) -> Result<Analysis, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "#analysis")) => {}
        Some((n, other)) => return Err(FormatError::new(n, format!("expected '#analysis', found {other:?}"))),
        None => return Err(FormatError::new(1, "empty input")),
    }

    let mut a = Analysis::default();
    let mut edge_lines = Vec::new();
    let mut ended = false;
    for (n, line) in lines.by_ref() {
        if line == "#end" {
            ended = true;
            break;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        match fields[0] {
            "anomaly" => {
                arity(n, &fields, 7)?;
                let test_id = field(n, &fields, 2, "test")?;
                if !is_valid_token(test_id) {
                    return Err(FormatError::new(n, format!("invalid test id {test_id:?}")));
                }
                let func = field(n, &fields, 5, "func")?;
                if !is_name(func) {
                    return Err(FormatError::new(n, format!("invalid function name {func:?}")));
                }
                let seq = field(n, &fields, 3, "seq")?;
                a.anomalies.push(Anomaly {
                    violation: Violation {
                        property_id: prop_id(n, fields[1])?,
                        test_id: test_id.to_string(),
                        func: func.to_string(),
                        event_seq: seq
                            .parse()
                            .map_err(|_| FormatError::new(n, format!("invalid seq {seq:?}")))?,
                        observed: field(n, &fields, 6, "observed")?
                            .parse()
                            .map_err(|e: String| FormatError::new(n, e))?,
                    },
                    origin: field(n, &fields, 4, "origin")?
                        .parse()
                        .map_err(|e: String| FormatError::new(n, e))?,
                });
            }
            "edge" => {
                arity(n, &fields, 4)?;
                let e = Edge {
                    from: index(n, fields[1])?,
                    to: index(n, fields[2])?,
                    reason: field(n, &fields, 3, "reason")?
                        .parse()
                        .map_err(|e: String| FormatError::new(n, e))?,
                };
                edge_lines.push(n);
                a.edges.push(e);
            }
            "fault" => {
                arity(n, &fields, 4)?;
                let args = field(n, &fields, 2, "args")?;
                let args = if args.is_empty() {
                    Vec::new()
                } else {
                    args.split(',').map(|x| parse_int(n, x)).collect::<Result<_, _>>()?
                };
                a.faults.push(RegressionFaultReport {
                    property_id: prop_id(n, fields[1])?,
                    args,
                    outcome: field(n, &fields, 3, "outcome")?
                        .parse()
                        .map_err(|e: String| FormatError::new(n, e))?,
                });
            }
            _ => return Err(FormatError::new(n, format!("unrecognized line {line:?}"))),
        }
    }
    if !ended {
        return Err(FormatError::new(text.lines().count(), "missing '#end'"));
    }
    if let Some((n, _)) = lines.next() {
        return Err(FormatError::new(n, "content after '#end'"));
    }

    for (e, n) in a.edges.iter().zip(edge_lines) {
        let (Some(from), Some(to)) = (a.anomalies.get(e.from), a.anomalies.get(e.to)) else {
            return Err(FormatError::new(n, "edge index out of range"));
        };
        let (from, to) = (&from.violation, &to.violation);
        if from.test_id != to.test_id {
            return Err(FormatError::new(n, "edge joins anomalies of different tests"));
        }
        if from.event_seq >= to.event_seq {
            return Err(FormatError::new(n, "edge does not go forward in the trace"));
        }
    }
    Ok(a)
}
