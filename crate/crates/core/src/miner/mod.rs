//! Likely-property mining from base-version traces: value invariants at
//! function entry/exit and call-sequence automata per function.

mod invariants;
mod ktail;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::property::Property;
use crate::trace::{invocations, MonitorPlan, Trace, Version};

pub use invariants::mine_invariants;
pub use ktail::{build_pta, ktail_merge, Automaton, Rejection, State};

pub const DEFAULT_MIN_SUPPORT: usize = 3;
pub const DEFAULT_K: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MineError {
    #[error("trace {0} is not a base-version trace")]
    NotBase(String),
}

pub(crate) fn require_base(traces: &[Trace]) -> Result<(), MineError> {
    match traces.iter().find(|t| t.version != Version::Base) {
        Some(t) => Err(MineError::NotBase(t.test_id.clone())),
        None => Ok(()),
    }
}

/// One automaton per monitored function that was invoked at least once.
///
/// A training sequence is the list of traced functions an invocation calls
/// directly, in call order. Only invocations that returned are used.
pub fn mine_automata(
    traces: &[Trace],
    plan: &MonitorPlan,
    k: usize,
) -> Result<Vec<Property>, MineError> {
    require_base(traces)?;
    let mut sequences: BTreeMap<&str, Vec<Vec<&str>>> = BTreeMap::new();
    for func in plan.monitored() {
        for trace in traces {
            for inv in invocations(&trace.events, func) {
                if inv.exit.is_some() {
                    let seq = inv.calls.iter().map(|e| e.func.as_str()).collect();
                    sequences.entry(func.as_str()).or_default().push(seq);
                }
            }
        }
    }
    Ok(sequences
        .into_iter()
        .map(|(func, seqs)| Property::automaton(func, k, ktail_merge(&build_pta(&seqs), k)))
        .collect())
}

/// Invariants and automata together, sorted by id.
pub fn mine(
    traces: &[Trace],
    plan: &MonitorPlan,
    min_support: usize,
    k: usize,
) -> Result<Vec<Property>, MineError> {
    let mut props = mine_invariants(traces, plan, min_support)?;
    props.extend(mine_automata(traces, plan, k)?);
    props.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(props)
}
