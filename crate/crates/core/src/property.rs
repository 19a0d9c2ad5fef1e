//! Mined properties, their lifecycle, and the property file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use crate::miner::Automaton;
use crate::trace::{is_name, parse_int, Bindings, FormatError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Point {
    Entry,
    Exit,
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Point::Entry => "entry",
            Point::Exit => "exit",
        })
    }
}

impl FromStr for Point {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "entry" => Ok(Point::Entry),
            "exit" => Ok(Point::Exit),
            other => Err(format!("unknown program point {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Le,
    Ge,
}

impl CmpOp {
    pub fn holds(self, a: i64, b: i64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Le => a <= b,
            CmpOp::Ge => a >= b,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Le => "<=",
            CmpOp::Ge => ">=",
        })
    }
}

impl FromStr for CmpOp {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "==" => Ok(CmpOp::Eq),
            "!=" => Ok(CmpOp::Ne),
            "<=" => Ok(CmpOp::Le),
            ">=" => Ok(CmpOp::Ge),
            other => Err(format!("unknown comparison {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Operand {
    Var(String),
    Const(i64),
}

impl fmt::Display for Operand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Operand::Var(v) => f.write_str(v),
            Operand::Const(c) => write!(f, "{c}"),
        }
    }
}

/// `lhs op rhs` evaluated on the bindings of every event at one program point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Invariant {
    pub point: Point,
    pub lhs: String,
    pub op: CmpOp,
    pub rhs: Operand,
}

impl Invariant {
    /// `Err` names the first variable missing from `b`.
    pub fn holds(&self, b: &Bindings) -> Result<bool, String> {
        let lhs = b.get(&self.lhs).ok_or_else(|| self.lhs.clone())?;
        let rhs = match &self.rhs {
            Operand::Const(c) => *c,
            Operand::Var(v) => b.get(v).ok_or_else(|| v.clone())?,
        };
        Ok(self.op.holds(lhs, rhs))
    }

    /// The variables the invariant reads, lhs first.
    pub fn vars(&self) -> Vec<&str> {
        let mut out = vec![self.lhs.as_str()];
        if let Operand::Var(v) = &self.rhs {
            out.push(v);
        }
        out
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.lhs, self.op, self.rhs)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PropertyKind {
    Invariant(Invariant),
    /// Accepted sequences of direct calls made by one invocation.
    Automaton { k: usize, automaton: Automaton },
}

/// Verification result a surviving property carries into classification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Origin {
    Proved,
    Unknown,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Origin::Proved => "proved",
            Origin::Unknown => "unknown",
        })
    }
}

impl FromStr for Origin {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proved" => Ok(Origin::Proved),
            "unknown" => Ok(Origin::Unknown),
            other => Err(format!("unknown origin {other:?}")),
        }
    }
}

/// Mined → Proved | Refuted | Unknown → Obsolete | UpToDate. The last stage
/// remembers which verification verdict the property came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PropertyStatus {
    Mined,
    Proved,
    Refuted,
    Unknown,
    Obsolete(Origin),
    UpToDate(Origin),
}

impl PropertyStatus {
    pub fn origin(self) -> Option<Origin> {
        match self {
            PropertyStatus::Proved => Some(Origin::Proved),
            PropertyStatus::Unknown => Some(Origin::Unknown),
            PropertyStatus::Obsolete(o) | PropertyStatus::UpToDate(o) => Some(o),
            PropertyStatus::Mined | PropertyStatus::Refuted => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyStatus::Mined => "mined",
            PropertyStatus::Proved => "proved",
            PropertyStatus::Refuted => "refuted",
            PropertyStatus::Unknown => "unknown",
            PropertyStatus::Obsolete(_) => "obsolete",
            PropertyStatus::UpToDate(_) => "uptodate",
        }
    }

    pub const NAMES: [&'static str; 6] = ["mined", "proved", "refuted", "unknown", "obsolete", "uptodate"];
}

impl fmt::Display for PropertyStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyStatus::Obsolete(o) | PropertyStatus::UpToDate(o) => {
                write!(f, "status={} origin={o}", self.name())
            }
            _ => write!(f, "status={}", self.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Property {
    pub id: String,
    pub func: String,
    pub kind: PropertyKind,
    pub status: PropertyStatus,
    /// Entry arguments of a refuting execution.
    pub counterexample: Option<Vec<i64>>,
}

impl Property {
    pub fn invariant(func: &str, inv: Invariant) -> Property {
        Property {
            id: invariant_id(func, &inv),
            func: func.to_string(),
            kind: PropertyKind::Invariant(inv),
            status: PropertyStatus::Mined,
            counterexample: None,
        }
    }

    pub fn automaton(func: &str, k: usize, automaton: Automaton) -> Property {
        Property {
            id: automaton_id(func),
            func: func.to_string(),
            kind: PropertyKind::Automaton { k, automaton },
            status: PropertyStatus::Mined,
            counterexample: None,
        }
    }

    /// Functions a verification run must trace to observe this property.
    pub fn observed_functions(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::from([self.func.clone()]);
        if let PropertyKind::Automaton { automaton, .. } = &self.kind {
            out.extend(automaton.alphabet().into_iter().map(str::to_string));
        }
        out
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            PropertyKind::Invariant(inv) => format!("{inv} at {} of {}", inv.point, self.func),
            PropertyKind::Automaton { k, automaton } => format!(
                "call automaton of {} (k={k}, {} states)",
                self.func,
                automaton.num_states()
            ),
        }
    }
}

pub fn invariant_id(func: &str, inv: &Invariant) -> String {
    format!("{func}@{}:{inv}", inv.point)
}

pub fn automaton_id(func: &str) -> String {
    format!("{func}@calls")
}

/// Canonical property file: properties sorted by id, then counterexamples.
pub fn encode_properties(props: &[Property]) -> String {
    let mut sorted: Vec<&Property> = props.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));

    let mut out = String::from("#properties\n");
    for p in &sorted {
        match &p.kind {
            PropertyKind::Invariant(inv) => out.push_str(&format!(
                "inv {} {} {} {} {} {} {}\n",
                p.id, p.func, inv.point, inv.lhs, inv.op, inv.rhs, p.status
            )),
            PropertyKind::Automaton { k, automaton } => {
                let accept: Vec<String> = automaton.accepting().iter().map(|s| s.to_string()).collect();
                out.push_str(&format!(
                    "fsm {} {} k={k} init={} accept={} {}\n",
                    p.id,
                    p.func,
                    automaton.init(),
                    accept.join(","),
                    p.status
                ));
                for ((s, sym), t) in automaton.transitions() {
                    out.push_str(&format!("trans {s} {sym} {t}\n"));
                }
                out.push_str("endfsm\n");
            }
        }
    }
    for p in &sorted {
        if let Some(args) = &p.counterexample {
            let args: Vec<String> = args.iter().map(i64::to_string).collect();
            out.push_str(&format!("cex {} args={}\n", p.id, args.join(",")));
        }
    }
    out.push_str("#end\n");
    out
}

fn parse_status(n: usize, fields: &[&str]) -> Result<PropertyStatus, FormatError> {
    let status = fields
        .first()
        .and_then(|f| f.strip_prefix("status="))
        .ok_or_else(|| FormatError::new(n, "expected status=<status>"))?;
    let origin = || -> Result<Origin, FormatError> {
        let o = fields
            .get(1)
            .and_then(|f| f.strip_prefix("origin="))
            .ok_or_else(|| FormatError::new(n, format!("status {status} requires origin=<proved|unknown>")))?;
        o.parse().map_err(|e: String| FormatError::new(n, e))
    };
    let (st, used) = match status {
        "mined" => (PropertyStatus::Mined, 1),
        "proved" => (PropertyStatus::Proved, 1),
        "refuted" => (PropertyStatus::Refuted, 1),
        "unknown" => (PropertyStatus::Unknown, 1),
        "obsolete" => (PropertyStatus::Obsolete(origin()?), 2),
        "uptodate" => (PropertyStatus::UpToDate(origin()?), 2),
        other => return Err(FormatError::new(n, format!("unknown status {other:?}"))),
    };
    if fields.len() != used {
        return Err(FormatError::new(n, "unexpected trailing fields"));
    }
    Ok(st)
}

fn parse_state(n: usize, s: &str) -> Result<usize, FormatError> {
    s.parse()
        .map_err(|_| FormatError::new(n, format!("invalid state {s:?}")))
}

fn keyed<'a>(n: usize, field: Option<&&'a str>, key: &str) -> Result<&'a str, FormatError> {
    field
        .and_then(|f| f.strip_prefix(key))
        .and_then(|f| f.strip_prefix('='))
        .ok_or_else(|| FormatError::new(n, format!("expected {key}=...")))
}

pub fn decode_properties(text: &str) -> Result<Vec<Property>, FormatError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, "#properties")) => {}
        Some((n, other)) => return Err(FormatError::new(n, format!("expected '#properties', found {other:?}"))),
        None => return Err(FormatError::new(1, "empty input")),
    }

    let mut props: BTreeMap<String, Property> = BTreeMap::new();
    let mut insert = |n: usize, p: Property| -> Result<(), FormatError> {
        if p.id.is_empty() || p.id.contains(char::is_whitespace) {
            return Err(FormatError::new(n, format!("invalid property id {:?}", p.id)));
        }
        if !is_name(&p.func) {
            return Err(FormatError::new(n, format!("invalid function name {:?}", p.func)));
        }
        if props.contains_key(&p.id) {
            return Err(FormatError::new(n, format!("duplicate property id {}", p.id)));
        }
        props.insert(p.id.clone(), p);
        Ok(())
    };
    let mut cex: Vec<(usize, String, Vec<i64>)> = Vec::new();
    let mut ended = false;

    while let Some((n, line)) = lines.next() {
        if line == "#end" {
            ended = true;
            break;
        }
        let fields: Vec<&str> = line.split(' ').collect();
        match fields[0] {
            "inv" => {
                if fields.len() < 8 {
                    return Err(FormatError::new(n, "inv line needs id, function, point, lhs, op, rhs and status"));
                }
                let point = fields[3].parse().map_err(|e: String| FormatError::new(n, e))?;
                let lhs = fields[4];
                let op = fields[5].parse().map_err(|e: String| FormatError::new(n, e))?;
                let rhs = if is_name(fields[6]) {
                    Operand::Var(fields[6].to_string())
                } else {
                    Operand::Const(parse_int(n, fields[6])?)
                };
                if !is_name(lhs) {
                    return Err(FormatError::new(n, format!("invalid variable {lhs:?}")));
                }
                if rhs == Operand::Var(lhs.to_string()) {
                    return Err(FormatError::new(n, "invariant relates a variable to itself"));
                }
                let status = parse_status(n, &fields[7..])?;
                insert(
                    n,
                    Property {
                        id: fields[1].to_string(),
                        func: fields[2].to_string(),
                        kind: PropertyKind::Invariant(Invariant {
                            point,
                            lhs: lhs.to_string(),
                            op,
                            rhs,
                        }),
                        status,
                        counterexample: None,
                    },
                )?;
            }
            "fsm" => {
                if fields.len() < 7 {
                    return Err(FormatError::new(n, "fsm line needs id, function, k, init, accept and status"));
                }
                let k: usize = keyed(n, fields.get(3), "k")?
                    .parse()
                    .map_err(|_| FormatError::new(n, "invalid k"))?;
                if k == 0 {
                    return Err(FormatError::new(n, "k must be positive"));
                }
                let init = parse_state(n, keyed(n, fields.get(4), "init")?)?;
                let accept_text = keyed(n, fields.get(5), "accept")?;
                let accepting: BTreeSet<usize> = if accept_text.is_empty() {
                    BTreeSet::new()
                } else {
                    accept_text
                        .split(',')
                        .map(|s| parse_state(n, s))
                        .collect::<Result<_, _>>()?
                };
                let status = parse_status(n, &fields[6..])?;

                let mut transitions = BTreeMap::new();
                let mut max_state = accepting.iter().copied().chain([init]).max().unwrap_or(0);
                let mut closed = false;
                for (m, tline) in lines.by_ref() {
                    if tline == "endfsm" {
                        closed = true;
                        break;
                    }
                    let t: Vec<&str> = tline.split(' ').collect();
                    let ["trans", from, sym, to] = t.as_slice() else {
                        return Err(FormatError::new(m, format!("expected 'trans <s> <symbol> <s'>' or 'endfsm', found {tline:?}")));
                    };
                    if !is_name(sym) {
                        return Err(FormatError::new(m, format!("invalid symbol {sym:?}")));
                    }
                    let (from, to) = (parse_state(m, from)?, parse_state(m, to)?);
                    max_state = max_state.max(from).max(to);
                    if transitions.insert((from, sym.to_string()), to).is_some() {
                        return Err(FormatError::new(m, format!("nondeterministic transition from {from} on {sym}")));
                    }
                }
                if !closed {
                    return Err(FormatError::new(n, "fsm block without 'endfsm'"));
                }
                let automaton = Automaton::from_parts(max_state + 1, init, accepting, transitions)
                    .map_err(|e| FormatError::new(n, e))?;
                insert(
                    n,
                    Property {
                        id: fields[1].to_string(),
                        func: fields[2].to_string(),
                        kind: PropertyKind::Automaton { k, automaton },
                        status,
                        counterexample: None,
                    },
                )?;
            }
            "cex" => {
                let [_, id, args] = fields.as_slice() else {
                    return Err(FormatError::new(n, "cex line needs an id and args"));
                };
                let args = args
                    .strip_prefix("args=")
                    .ok_or_else(|| FormatError::new(n, "expected args=<int,...>"))?;
                let args = if args.is_empty() {
                    Vec::new()
                } else {
                    args.split(',').map(|a| parse_int(n, a)).collect::<Result<_, _>>()?
                };
                cex.push((n, id.to_string(), args));
            }
            _ => return Err(FormatError::new(n, format!("unrecognized line {line:?}"))),
        }
    }
    if !ended {
        return Err(FormatError::new(text.lines().count(), "missing '#end'"));
    }
    if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(FormatError::new(n, "content after '#end'"));
    }
    for (n, id, args) in cex {
        let p = props
            .get_mut(&id)
            .ok_or_else(|| FormatError::new(n, format!("counterexample for unknown property {id}")))?;
        if p.counterexample.replace(args).is_some() {
            return Err(FormatError::new(n, format!("duplicate counterexample for {id}")));
        }
    }
    Ok(props.into_values().collect())
}
