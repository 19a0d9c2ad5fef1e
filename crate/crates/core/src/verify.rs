//! Scope-restricted verification: exhaustive execution over the declared
//! input domains under a per-run step budget.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::{check_events, CheckError, Violation};
use crate::lang::{execute, ExecError, Outcome, Program, Scenario, ScenarioError};
use crate::property::{Property, PropertyStatus};
use crate::trace::MonitorPlan;

pub const DEFAULT_STEP_BUDGET: u64 = 100_000;
pub const DEFAULT_ENUM_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Limits {
    pub step_budget: u64,
    /// Largest domain product that is enumerated.
    pub enum_cap: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            step_budget: DEFAULT_STEP_BUDGET,
            enum_cap: DEFAULT_ENUM_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    BudgetExhausted,
}

impl fmt::Display for UnknownReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("budget_exhausted")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Proved,
    Refuted {
        args: Vec<i64>,
        violation: Violation,
        outcome: Outcome,
    },
    Unknown(UnknownReason),
}

impl Verdict {
    pub fn status(&self) -> PropertyStatus {
        match self {
            Verdict::Proved => PropertyStatus::Proved,
            Verdict::Refuted { .. } => PropertyStatus::Refuted,
            Verdict::Unknown(_) => PropertyStatus::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("property {0} names a function the program does not define")]
    UnknownFunction(String),
    #[error("property {id} has status {status}, expected {expected}")]
    Status {
        id: String,
        status: &'static str,
        expected: &'static str,
    },
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// Which verdicts survive pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    /// Proved only.
    #[default]
    Strict,
    /// Proved and Unknown.
    Lenient,
}

impl Mode {
    pub fn survives(self, status: PropertyStatus) -> bool {
        match status {
            PropertyStatus::Proved => true,
            PropertyStatus::Unknown => self == Mode::Lenient,
            _ => false,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Strict => "strict",
            Mode::Lenient => "lenient",
        })
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(Mode::Strict),
            "lenient" => Ok(Mode::Lenient),
            other => Err(format!("unknown mode {other:?}")),
        }
    }
}

/// Runs `p` on every tuple of the entry domains, first parameter most
/// significant, and checks `prop` on each trace.
///
/// The first violating tuple refutes. A run that exhausts the budget before
/// any refutation makes the verdict Unknown. A violation already visible in
/// a partial trace still refutes.
pub fn verify_property(
    p: &Program,
    scenario: &Scenario,
    prop: &Property,
    limits: Limits,
) -> Result<Verdict, VerifyError> {
    if p.function(&prop.func).is_none() {
        return Err(VerifyError::UnknownFunction(prop.id.clone()));
    }
    let domains = scenario.ordered_domains(p)?;
    let product = domains.iter().try_fold(1u64, |acc, (lo, hi)| {
        let width = u64::try_from(*hi as i128 - *lo as i128 + 1).ok()?;
        acc.checked_mul(width)
    });
    match product {
        Some(n) if n <= limits.enum_cap => {}
        _ => return Ok(Verdict::Unknown(UnknownReason::BudgetExhausted)),
    }

    let plan = MonitorPlan::monitoring(prop.observed_functions());
    let mut args: Vec<i64> = domains.iter().map(|(lo, _)| *lo).collect();
    loop {
        let (outcome, events) = execute(p, &args, limits.step_budget, &plan)?;
        if let Some(violation) = check_events(prop, "verify", &events)?.into_iter().next() {
            return Ok(Verdict::Refuted {
                args,
                violation,
                outcome,
            });
        }
        if outcome == Outcome::BudgetExhausted {
            return Ok(Verdict::Unknown(UnknownReason::BudgetExhausted));
        }
        if !advance(&mut args, &domains) {
            return Ok(Verdict::Proved);
        }
    }
}

/// Odometer step, last position fastest. False after the last tuple.
fn advance(args: &mut [i64], domains: &[(i64, i64)]) -> bool {
    for i in (0..args.len()).rev() {
        if args[i] < domains[i].1 {
            args[i] += 1;
            return true;
        }
        args[i] = domains[i].0;
    }
    false
}

/// Verifies every mined property against the base program. Refuted
/// properties keep their counterexample. The result is sorted by id and
/// still contains every input property.
pub fn prune(
    props: &[Property],
    base: &Program,
    scenario: &Scenario,
    limits: Limits,
) -> Result<Vec<Property>, VerifyError> {
    if let Some(p) = props.iter().find(|p| p.status != PropertyStatus::Mined) {
        return Err(VerifyError::Status {
            id: p.id.clone(),
            status: p.status.name(),
            expected: "mined",
        });
    }
    let mut out = props
        .par_iter()
        .map(|prop| {
            let verdict = verify_property(base, scenario, prop, limits)?;
            let mut prop = prop.clone();
            prop.status = verdict.status();
            if let Verdict::Refuted { args, .. } = verdict {
                prop.counterexample = Some(args);
            }
            Ok(prop)
        })
        .collect::<Result<Vec<_>, VerifyError>>()?;
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

/// The properties a pruning mode lets through.
pub fn survivors(props: &[Property], mode: Mode) -> Vec<Property> {
    props.iter().filter(|p| mode.survives(p.status)).cloned().collect()
}
