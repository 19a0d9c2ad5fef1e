//! Goal-driven monitor plans: watch the neighbourhood of a change, never the
//! changed code itself.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::lang::{call_graph, diff_programs, Program};
use crate::trace::MonitorPlan;

pub const DEFAULT_DISTANCE: u32 = 1;

/// Builds the plan for analysing the upgrade `base -> upgraded`.
///
/// Distances are hop counts in the union of both call graphs taken as
/// undirected. Changed and added functions are the sources. A function is
/// monitored when it exists in both versions, lies within `distance` of a
/// source, and is not itself changed.
pub fn build_plan(base: &Program, upgraded: &Program, distance: u32) -> MonitorPlan {
    let changes = diff_programs(base, upgraded);

    let mut adjacent: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for graph in [call_graph(base), call_graph(upgraded)] {
        for (caller, callees) in graph.edges {
            for callee in callees {
                let (a, b) = (intern(base, upgraded, &caller), intern(base, upgraded, &callee));
                adjacent.entry(a).or_default().insert(b);
                adjacent.entry(b).or_default().insert(a);
            }
        }
    }

    let mut hops: BTreeMap<&str, u32> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for src in changes.changed.iter().chain(&changes.added) {
        hops.insert(src.as_str(), 0);
        queue.push_back(src.as_str());
    }
    while let Some(f) = queue.pop_front() {
        let d = hops[f];
        if d >= distance {
            continue;
        }
        for &g in adjacent.get(f).into_iter().flatten() {
            if !hops.contains_key(g) {
                hops.insert(g, d + 1);
                queue.push_back(g);
            }
        }
    }

    let monitored = hops
        .into_iter()
        .filter(|&(f, d)| {
            d <= distance
                && !changes.changed.contains(f)
                && base.function(f).is_some()
                && upgraded.function(f).is_some()
        })
        .map(|(f, _)| f.to_string())
        .collect();
    MonitorPlan::new(distance, changes.changed, monitored)
        .expect("changed functions are filtered out of the monitored set")
}

/// Borrows the name from whichever program defines it, so the graph can use
/// `&str` keys without tying lifetimes to the temporary call graphs.
fn intern<'a>(base: &'a Program, upgraded: &'a Program, name: &str) -> &'a str {
    base.function(name)
        .or_else(|| upgraded.function(name))
        .map(|f| f.name())
        .expect("call graph names a function of one of the programs")
}
