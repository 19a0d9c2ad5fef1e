//! Runtime checking of properties on upgraded traces: obsolete/up-to-date
//! classification, anomalies in failing runs, cause-effect chains between
//! them, and static search for faults no test reveals.

mod check;
mod format;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::lang::{CallGraph, Outcome, Program, Scenario};
use crate::property::{Origin, Property, PropertyStatus};
use crate::report::prioritize;
use crate::trace::{TestVerdict, Trace, Version};
use crate::verify::{verify_property, Limits, Verdict, VerifyError};

pub use check::{check_trace, CheckError, Observation, Violation};
pub(crate) use check::check_events;
pub use format::{decode_analysis, encode_analysis};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Check(#[from] CheckError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
}

/// A violation of an up-to-date property in a failing upgraded run.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Anomaly {
    pub violation: Violation,
    pub origin: Origin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeReason {
    SharedVariable,
    CallRelation,
}

impl fmt::Display for EdgeReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeReason::SharedVariable => "shared_variable",
            EdgeReason::CallRelation => "call_relation",
        })
    }
}

impl FromStr for EdgeReason {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "shared_variable" => Ok(EdgeReason::SharedVariable),
            "call_relation" => Ok(EdgeReason::CallRelation),
            other => Err(format!("unknown edge reason {other:?}")),
        }
    }
}

/// `from` and `to` index the anomaly list the edge belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub reason: EdgeReason,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauseEffectGraph {
    pub test_id: String,
    pub nodes: Vec<Anomaly>,
    pub edges: Vec<Edge>,
}

impl CauseEffectGraph {
    /// Nodes without an incoming edge.
    pub fn roots(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|i| !self.edges.iter().any(|e| e.to == *i))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RegressionFaultReport {
    pub property_id: String,
    pub args: Vec<i64>,
    /// Outcome of the counterexample run on the upgraded program.
    pub outcome: Outcome,
}

/// Everything the analysis file holds. Edges index `anomalies`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Analysis {
    pub anomalies: Vec<Anomaly>,
    pub edges: Vec<Edge>,
    pub faults: Vec<RegressionFaultReport>,
}

impl Analysis {
    pub fn is_clean(&self) -> bool {
        self.anomalies.is_empty() && self.faults.is_empty()
    }

    pub fn is_root(&self, i: usize) -> bool {
        !self.edges.iter().any(|e| e.to == i)
    }

    /// Concatenates two analyses, shifting the second one's edge indices.
    pub fn merge(mut self, other: Analysis) -> Analysis {
        let shift = self.anomalies.len();
        self.anomalies.extend(other.anomalies);
        self.edges.extend(other.edges.into_iter().map(|e| Edge {
            from: e.from + shift,
            to: e.to + shift,
            reason: e.reason,
        }));
        self.faults.extend(other.faults);
        self
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Classification {
    pub obsolete: Vec<Property>,
    pub uptodate: Vec<Property>,
}

fn require_runs(runs: &[Trace], verdict: TestVerdict) -> Result<(), AnalysisError> {
    match runs.iter().find(|t| t.version != Version::Upgraded || t.verdict != verdict) {
        Some(t) => Err(AnalysisError::Usage(format!(
            "trace {} is a {} run with verdict {}, expected upgraded runs with verdict {verdict}",
            t.test_id, t.version, t.verdict
        ))),
        None => Ok(()),
    }
}

fn require_status(
    props: &[Property],
    expected: &str,
    ok: impl Fn(PropertyStatus) -> bool,
) -> Result<(), AnalysisError> {
    match props.iter().find(|p| !ok(p.status)) {
        Some(p) => Err(AnalysisError::Usage(format!(
            "property {} has status {}, expected {expected}",
            p.id,
            p.status.name()
        ))),
        None => Ok(()),
    }
}

/// Splits verified properties by whether any passing upgraded run violates
/// them. Both halves are sorted by id and carry their verification origin.
pub fn classify_obsolete(props: &[Property], passing_runs: &[Trace]) -> Result<Classification, AnalysisError> {
    require_status(props, "proved or unknown", |s| {
        matches!(s, PropertyStatus::Proved | PropertyStatus::Unknown)
    })?;
    require_runs(passing_runs, TestVerdict::Pass)?;
    let flags = props
        .par_iter()
        .map(|p| {
            for run in passing_runs {
                if !check_trace(p, run)?.is_empty() {
                    return Ok(true);
                }
            }
            Ok(false)
        })
        .collect::<Result<Vec<bool>, CheckError>>()?;

    let mut out = Classification::default();
    for (p, violated) in props.iter().zip(flags) {
        let origin = p.status.origin().expect("status checked above");
        let mut p = p.clone();
        if violated {
            p.status = PropertyStatus::Obsolete(origin);
            out.obsolete.push(p);
        } else {
            p.status = PropertyStatus::UpToDate(origin);
            out.uptodate.push(p);
        }
    }
    out.obsolete.sort_by(|a, b| a.id.cmp(&b.id));
    out.uptodate.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// Violations of up-to-date properties in failing runs, in priority order.
pub fn detect_anomalies(uptodate: &[Property], failing_runs: &[Trace]) -> Result<Vec<Anomaly>, AnalysisError> {
    require_status(uptodate, "uptodate", |s| matches!(s, PropertyStatus::UpToDate(_)))?;
    require_runs(failing_runs, TestVerdict::Fail)?;
    let found = uptodate
        .par_iter()
        .map(|p| {
            let origin = p.status.origin().expect("status checked above");
            let mut out = Vec::new();
            for run in failing_runs {
                out.extend(check_trace(p, run)?.into_iter().map(|violation| Anomaly { violation, origin }));
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>, CheckError>>()?;
    Ok(prioritize(found.into_iter().flatten().collect()))
}

/// Links anomalies of one failing run. An edge a→b needs a earlier than b
/// and either a call edge between their functions (either direction) or a
/// variable both observed. A call relation takes precedence as the reason.
pub fn build_chains(anomalies: &[Anomaly], trace: &Trace, cg: &CallGraph) -> Result<CauseEffectGraph, AnalysisError> {
    if let Some(a) = anomalies.iter().find(|a| a.violation.test_id != trace.test_id) {
        return Err(AnalysisError::Usage(format!(
            "anomaly of {} on test {} does not belong to test {}",
            a.violation.property_id, a.violation.test_id, trace.test_id
        )));
    }
    let mut edges = Vec::new();
    for (i, a) in anomalies.iter().enumerate() {
        for (j, b) in anomalies.iter().enumerate() {
            let (a, b) = (&a.violation, &b.violation);
            if a.event_seq >= b.event_seq {
                continue;
            }
            let reason = if cg.related(&a.func, &b.func) {
                EdgeReason::CallRelation
            } else {
                let theirs = b.observed.var_names();
                if !a.observed.var_names().iter().any(|v| theirs.contains(v)) {
                    continue;
                }
                EdgeReason::SharedVariable
            };
            edges.push(Edge { from: i, to: j, reason });
        }
    }
    Ok(CauseEffectGraph {
        test_id: trace.test_id.clone(),
        nodes: anomalies.to_vec(),
        edges,
    })
}

/// Anomalies of all failing runs plus their chains, indexed globally in
/// priority order.
pub fn analyze(uptodate: &[Property], failing_runs: &[Trace], cg: &CallGraph) -> Result<Analysis, AnalysisError> {
    let anomalies = detect_anomalies(uptodate, failing_runs)?;
    let mut by_test: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, a) in anomalies.iter().enumerate() {
        by_test.entry(a.violation.test_id.as_str()).or_default().push(i);
    }
    let mut edges = Vec::new();
    for run in failing_runs {
        let Some(members) = by_test.get(run.test_id.as_str()) else { continue };
        let nodes: Vec<Anomaly> = members.iter().map(|i| anomalies[*i].clone()).collect();
        let graph = build_chains(&nodes, run, cg)?;
        edges.extend(graph.edges.into_iter().map(|e| Edge {
            from: members[e.from],
            to: members[e.to],
            reason: e.reason,
        }));
    }
    edges.sort();
    edges.dedup();
    Ok(Analysis {
        anomalies,
        edges,
        faults: Vec::new(),
    })
}

/// Verifies up-to-date properties against the upgraded program. Every
/// refutation is a fault that no failing test needed to reveal.
pub fn static_check(
    uptodate: &[Property],
    upgraded: &Program,
    scenario: &Scenario,
    limits: Limits,
) -> Result<Vec<RegressionFaultReport>, AnalysisError> {
    require_status(uptodate, "uptodate", |s| matches!(s, PropertyStatus::UpToDate(_)))?;
    let verdicts = uptodate
        .par_iter()
        .map(|p| verify_property(upgraded, scenario, p, limits).map(|v| (p, v)))
        .collect::<Result<Vec<_>, VerifyError>>()?;
    let mut out: Vec<RegressionFaultReport> = verdicts
        .into_iter()
        .filter_map(|(p, v)| match v {
            Verdict::Refuted { args, outcome, .. } => Some(RegressionFaultReport {
                property_id: p.id.clone(),
                args,
                outcome,
            }),
            _ => None,
        })
        .collect();
    out.sort_by(|a, b| a.property_id.cmp(&b.property_id));
    Ok(out)
}
