use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::{BinOp, Expr, FuncId, Program, Scenario, Stmt};
use crate::trace::{Bindings, EventKind, MonitorPlan, TestVerdict, Trace, TraceEvent, TraceMode, Version};

/// Calls nested deeper than this end the run as [`Outcome::BudgetExhausted`].
pub const MAX_CALL_DEPTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RuntimeErrorCode {
    DivByZero,
    ModByZero,
}

impl fmt::Display for RuntimeErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeErrorCode::DivByZero => "div_by_zero",
            RuntimeErrorCode::ModByZero => "mod_by_zero",
        })
    }
}

impl FromStr for RuntimeErrorCode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "div_by_zero" => Ok(RuntimeErrorCode::DivByZero),
            "mod_by_zero" => Ok(RuntimeErrorCode::ModByZero),
            other => Err(format!("unknown error code {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Returned(i64),
    RuntimeError(RuntimeErrorCode),
    BudgetExhausted,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Returned(v) => write!(f, "returned:{v}"),
            Outcome::RuntimeError(code) => write!(f, "error:{code}"),
            Outcome::BudgetExhausted => f.write_str("budget_exhausted"),
        }
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "budget_exhausted" {
            return Ok(Outcome::BudgetExhausted);
        }
        if let Some(v) = s.strip_prefix("returned:") {
            return v
                .parse()
                .map(Outcome::Returned)
                .map_err(|_| format!("invalid return value {v:?}"));
        }
        if let Some(code) = s.strip_prefix("error:") {
            return code.parse().map(Outcome::RuntimeError);
        }
        Err(format!("unknown outcome {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExecError {
    #[error("{func} expects {expected} argument(s), got {got}")]
    Arity {
        func: String,
        expected: usize,
        got: usize,
    },
}

/// Runs `p`'s entry function on `args`.
///
/// Every statement and every expression node costs one step; once more
/// than `step_budget` steps are spent the run ends as `BudgetExhausted`.
/// Events are emitted only for functions the plan traces, so the outcome
/// never depends on the plan.
pub fn execute(
    p: &Program,
    args: &[i64],
    step_budget: u64,
    plan: &MonitorPlan,
) -> Result<(Outcome, Vec<TraceEvent>), ExecError> {
    let entry = p.entry();
    if args.len() != entry.params().len() {
        return Err(ExecError::Arity {
            func: entry.name().to_string(),
            expected: entry.params().len(),
            got: args.len(),
        });
    }
    let mut m = Machine {
        prog: p,
        modes: p.functions().iter().map(|f| plan.mode(f.name())).collect(),
        budget: step_budget,
        steps: 0,
        events: Vec::new(),
        open: Vec::new(),
        depth: 0,
    };
    let outcome = match m.call(p.entry_id(), args.to_vec()) {
        Ok(v) => Outcome::Returned(v),
        Err(Halt::Error(code)) => Outcome::RuntimeError(code),
        Err(Halt::Budget) => Outcome::BudgetExhausted,
    };
    Ok((outcome, m.events))
}

/// Runs every test of `scenario` in order, one trace per test.
pub fn run_suite(
    p: &Program,
    scenario: &Scenario,
    plan: &MonitorPlan,
    version: Version,
    step_budget: u64,
) -> Result<Vec<Trace>, ExecError> {
    scenario
        .tests()
        .iter()
        .map(|test| {
            let (outcome, events) = execute(p, &test.args, step_budget, plan)?;
            let verdict = if test.expect.matches(&outcome) {
                TestVerdict::Pass
            } else {
                TestVerdict::Fail
            };
            Ok(Trace {
                version,
                test_id: test.id.clone(),
                verdict,
                events,
            })
        })
        .collect()
}

enum Halt {
    Error(super::RuntimeErrorCode),
    Budget,
}

enum Flow {
    Next,
    Return(i64),
}

struct Machine<'p> {
    prog: &'p Program,
    modes: Vec<TraceMode>,
    budget: u64,
    steps: u64,
    events: Vec<TraceEvent>,
    /// Traced calls that have entered but not yet exited, innermost last.
    open: Vec<FuncId>,
    depth: usize,
}

impl Machine<'_> {
    fn tick(&mut self) -> Result<(), Halt> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Halt::Budget)
        } else {
            Ok(())
        }
    }

    fn emit(&mut self, kind: EventKind, func: FuncId, bindings: Bindings) {
        self.events.push(TraceEvent {
            seq: self.events.len() as u64,
            kind,
            func: self.prog.by_id(func).name().to_string(),
            bindings,
        });
    }

    fn fail(&mut self, code: RuntimeErrorCode) -> Halt {
        if let Some(&innermost) = self.open.last() {
            self.emit(EventKind::Error(code), innermost, Bindings::new());
        }
        Halt::Error(code)
    }

    fn call(&mut self, id: FuncId, args: Vec<i64>) -> Result<i64, Halt> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::Budget);
        }
        let func = self.prog.by_id(id);
        let mode = self.modes[id];
        let params = func.params();
        match mode {
            TraceMode::Off => {}
            TraceMode::Boundary => self.emit(EventKind::Enter, id, Bindings::new()),
            TraceMode::Full => {
                let b = params.iter().cloned().zip(args.iter().copied()).collect();
                self.emit(EventKind::Enter, id, b);
            }
        }
        if mode != TraceMode::Off {
            self.open.push(id);
        }

        let mut frame = args;
        frame.resize(func.slots().len(), 0);
        self.depth += 1;
        let flow = self.block(func.body(), &mut frame);
        self.depth -= 1;
        let ret = match flow? {
            Flow::Return(v) => v,
            Flow::Next => 0,
        };

        if mode != TraceMode::Off {
            let mut b = Bindings::new();
            if mode == TraceMode::Full {
                for (name, value) in params.iter().zip(&frame) {
                    b.push(name.clone(), *value);
                }
            }
            b.push("ret", ret);
            self.emit(EventKind::Exit, id, b);
            self.open.pop();
        }
        Ok(ret)
    }

    fn block(&mut self, stmts: &[Stmt], frame: &mut [i64]) -> Result<Flow, Halt> {
        for s in stmts {
            if let Flow::Return(v) = self.stmt(s, frame)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Next)
    }

    fn stmt(&mut self, s: &Stmt, frame: &mut [i64]) -> Result<Flow, Halt> {
        self.tick()?;
        match s {
            Stmt::Let(slot, e) | Stmt::Assign(slot, e) => {
                frame[*slot] = self.eval(e, frame)?;
                Ok(Flow::Next)
            }
            Stmt::If(cond, then_block, else_block) => {
                if self.eval(cond, frame)? != 0 {
                    self.block(then_block, frame)
                } else {
                    self.block(else_block, frame)
                }
            }
            Stmt::While(cond, body) => {
                while self.eval(cond, frame)? != 0 {
                    if let Flow::Return(v) = self.block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Ok(Flow::Next)
            }
            Stmt::Return(e) => Ok(Flow::Return(self.eval(e, frame)?)),
            Stmt::Expr(e) => {
                self.eval(e, frame)?;
                Ok(Flow::Next)
            }
        }
    }

    fn eval(&mut self, e: &Expr, frame: &[i64]) -> Result<i64, Halt> {
        self.tick()?;
        match e {
            Expr::Lit(v) => Ok(*v),
            Expr::Var(slot) => Ok(frame[*slot]),
            Expr::Call { callee, args } => {
                let mut values = Vec::with_capacity(args.len());
                for a in args {
                    values.push(self.eval(a, frame)?);
                }
                self.call(*callee, values)
            }
            Expr::Bin(BinOp::And, l, r) => {
                if self.eval(l, frame)? == 0 {
                    return Ok(0);
                }
                Ok((self.eval(r, frame)? != 0) as i64)
            }
            Expr::Bin(BinOp::Or, l, r) => {
                if self.eval(l, frame)? != 0 {
                    return Ok(1);
                }
                Ok((self.eval(r, frame)? != 0) as i64)
            }
            Expr::Bin(op, l, r) => {
                let a = self.eval(l, frame)?;
                let b = self.eval(r, frame)?;
                Ok(match op {
                    BinOp::Add => a.wrapping_add(b),
                    BinOp::Sub => a.wrapping_sub(b),
                    BinOp::Mul => a.wrapping_mul(b),
                    BinOp::Div if b == 0 => return Err(self.fail(RuntimeErrorCode::DivByZero)),
                    BinOp::Div => a.wrapping_div(b),
                    BinOp::Mod if b == 0 => return Err(self.fail(RuntimeErrorCode::ModByZero)),
                    BinOp::Mod => a.wrapping_rem(b),
                    BinOp::Lt => (a < b) as i64,
                    BinOp::Le => (a <= b) as i64,
                    BinOp::Eq => (a == b) as i64,
                    BinOp::Ne => (a != b) as i64,
                    BinOp::Ge => (a >= b) as i64,
                    BinOp::Gt => (a > b) as i64,
                    BinOp::And | BinOp::Or => unreachable!("short-circuit operators handled above"),
                })
            }
        }
    }
}
