use std::collections::BTreeSet;

use thiserror::Error;

use super::{is_name, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlanError {
    #[error("function {0} is both changed and monitored")]
    Overlap(String),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// The goal-driven monitoring configuration handed to the execution harness.
///
/// Monitored functions are traced with full bindings. Changed functions are
/// never monitored; the harness records only their call boundary (an enter
/// without bindings and an exit carrying `ret`) so that calls into them stay
/// visible to the caller's call-sequence automaton.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct MonitorPlan {
    distance: u32,
    changed: BTreeSet<String>,
    monitored: BTreeSet<String>,
}

/// How the harness traces one function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceMode {
    Off,
    Boundary,
    Full,
}

impl MonitorPlan {
    pub fn new(
        distance: u32,
        changed: BTreeSet<String>,
        monitored: BTreeSet<String>,
    ) -> Result<Self, PlanError> {
        if let Some(both) = changed.intersection(&monitored).next() {
            return Err(PlanError::Overlap(both.clone()));
        }
        Ok(Self {
            distance,
            changed,
            monitored,
        })
    }

    /// A plan that monitors exactly `funcs` and treats nothing as changed.
    pub fn monitoring<I, S>(funcs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            distance: 0,
            changed: BTreeSet::new(),
            monitored: funcs.into_iter().map(Into::into).collect(),
        }
    }

    pub fn distance(&self) -> u32 {
        self.distance
    }

    pub fn changed(&self) -> &BTreeSet<String> {
        &self.changed
    }

    pub fn monitored(&self) -> &BTreeSet<String> {
        &self.monitored
    }

    pub fn mode(&self, func: &str) -> TraceMode {
        if self.monitored.contains(func) {
            TraceMode::Full
        } else if self.changed.contains(func) {
            TraceMode::Boundary
        } else {
            TraceMode::Off
        }
    }
}

pub fn encode_plan(plan: &MonitorPlan) -> String {
    let mut out = format!("#plan distance={}\n", plan.distance);
    for name in &plan.changed {
        out.push_str(&format!("changed {name}\n"));
    }
    for name in &plan.monitored {
        out.push_str(&format!("monitor {name}\n"));
    }
    out.push_str("#end\n");
    out
}

pub fn decode_plan(text: &str) -> Result<MonitorPlan, PlanError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let distance = match lines.next() {
        Some((n, line)) => {
            let d = line
                .strip_prefix("#plan distance=")
                .ok_or_else(|| FormatError::new(n, format!("expected '#plan distance=<d>', found {line:?}")))?;
            d.parse::<u32>()
                .map_err(|_| FormatError::new(n, format!("invalid distance {d:?}")))?
        }
        None => return Err(FormatError::new(1, "empty input").into()),
    };

    let mut changed = BTreeSet::new();
    let mut monitored = BTreeSet::new();
    let mut ended = false;
    for (n, line) in lines.by_ref() {
        if line == "#end" {
            ended = true;
            break;
        }
        let (set, name) = if let Some(name) = line.strip_prefix("changed ") {
            (&mut changed, name)
        } else if let Some(name) = line.strip_prefix("monitor ") {
            (&mut monitored, name)
        } else {
            return Err(FormatError::new(n, format!("unrecognized line {line:?}")).into());
        };
        if !is_name(name) {
            return Err(FormatError::new(n, format!("invalid function name {name:?}")).into());
        }
        if !set.insert(name.to_string()) {
            return Err(FormatError::new(n, format!("duplicate entry {name}")).into());
        }
    }
    if !ended {
        return Err(FormatError::new(text.lines().count(), "missing '#end'").into());
    }
    if let Some((n, _)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(FormatError::new(n, "content after '#end'").into());
    }
    MonitorPlan::new(distance, changed, monitored)
}
