//! Shared test support: fixture paths and a seeded random MiniProc
//! generator. Generated programs always terminate: functions only call
//! functions defined after them and every loop has a constant bound.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regwatch_core::lang::{execute, parse_program, Expectation, Outcome, Program, Scenario, TestCase};
use regwatch_core::trace::MonitorPlan;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Knobs for [`random_program`].
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub functions: usize,
    pub entry_params: usize,
    /// Allow `/` and `%`, which can fail at runtime.
    pub division: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Self {
            functions: 3,
            entry_params: 1,
            division: true,
        }
    }
}

struct Writer<'r> {
    rng: &'r mut ChaCha8Rng,
    shape: Shape,
    arity: Vec<usize>,
    out: String,
}

impl Writer<'_> {
    fn lit(&mut self) -> String {
        self.rng.gen_range(-6i64..=6).to_string()
    }

    fn expr(&mut self, vars: &[String], caller: usize, depth: u32) -> String {
        let pick = if depth == 0 { self.rng.gen_range(0..3) } else { self.rng.gen_range(0..7) };
        match pick {
            0 => self.lit(),
            1 | 5 if !vars.is_empty() => vars.choose(self.rng).unwrap().clone(),
            1 | 5 => self.lit(),
            2..=4 if depth > 0 => {
                let mut ops = vec!["+", "-", "*", "<", "<=", "==", "!=", ">", ">=", "and", "or"];
                if self.shape.division {
                    ops.extend(["/", "%"]);
                }
                let op = *ops.choose(self.rng).unwrap();
                let a = self.expr(vars, caller, depth - 1);
                let b = self.expr(vars, caller, depth - 1);
                format!("({a} {op} {b})")
            }
            2..=4 => vars.choose(self.rng).cloned().unwrap_or_else(|| self.lit()),
            _ => self.call(vars, caller, depth - 1).unwrap_or_else(|| self.lit()),
        }
    }

    fn call(&mut self, vars: &[String], caller: usize, depth: u32) -> Option<String> {
        if caller + 1 >= self.arity.len() {
            return None;
        }
        let callee = self.rng.gen_range(caller + 1..self.arity.len());
        let args: Vec<String> = (0..self.arity[callee]).map(|_| self.expr(vars, caller, depth)).collect();
        Some(format!("f{callee}({})", args.join(", ")))
    }

    fn function(&mut self, index: usize) {
        let params: Vec<String> = (0..self.arity[index]).map(|i| format!("p{i}")).collect();
        let name = if index == 0 { "main".to_string() } else { format!("f{index}") };
        self.out.push_str(&format!("fn {name}({}) {{\n", params.join(", ")));
        let mut vars = params.clone();
        let statements = self.rng.gen_range(1..=4);
        for s in 0..statements {
            match self.rng.gen_range(0..6) {
                0 | 1 => {
                    let e = match self.call(&vars, index, 1) {
                        Some(c) if self.rng.gen_bool(0.5) => c,
                        _ => self.expr(&vars, index, 2),
                    };
                    let v = format!("v{s}");
                    self.out.push_str(&format!("    let {v} = {e};\n"));
                    vars.push(v);
                }
                2 => {
                    let c = self.expr(&vars, index, 1);
                    let r = self.expr(&vars, index, 1);
                    self.out.push_str(&format!("    if {c} {{ return {r}; }}\n"));
                }
                3 if !vars.is_empty() => {
                    let c = self.expr(&vars, index, 1);
                    let x = vars.choose(self.rng).unwrap().clone();
                    let a = self.expr(&vars, index, 1);
                    let b = self.expr(&vars, index, 1);
                    self.out
                        .push_str(&format!("    if {c} {{ {x} = {a}; }} else {{ {x} = {b}; }}\n"));
                }
                4 if !vars.is_empty() => {
                    let i = format!("i{s}");
                    let bound = self.rng.gen_range(1..=4);
                    let x = vars.choose(self.rng).unwrap().clone();
                    let body = match self.call(&vars, index, 0) {
                        Some(c) if self.rng.gen_bool(0.5) => c,
                        _ => self.expr(&vars, index, 1),
                    };
                    self.out.push_str(&format!(
                        "    let {i} = 0;\n    while {i} < {bound} {{ {x} = {x} + {body}; {i} = {i} + 1; }}\n"
                    ));
                    vars.push(i);
                }
                _ => {
                    if let Some(c) = self.call(&vars, index, 1) {
                        self.out.push_str(&format!("    {c};\n"));
                    }
                }
            }
        }
        // fold a callee's result into most returns so changes propagate upward
        let mut r = self.expr(&vars, index, 2);
        if self.rng.gen_bool(0.6) {
            if let Some(c) = self.call(&vars, index, 1) {
                r = format!("{r} + {c}");
            }
        }
        self.out.push_str(&format!("    return {r};\n}}\n"));
    }
}

/// Source text of a random terminating program. `main` comes first and
/// takes `shape.entry_params` parameters.
pub fn random_program(rng: &mut ChaCha8Rng, shape: Shape) -> String {
    let mut arity = vec![shape.entry_params];
    for _ in 1..shape.functions {
        arity.push(if rng.gen_bool(0.2) { 0 } else { rng.gen_range(1..=2) });
    }
    let mut w = Writer {
        rng,
        shape,
        arity,
        out: String::new(),
    };
    for i in 0..shape.functions {
        w.function(i);
    }
    w.out
}

/// Changes the body of a random non-entry function, either by rewriting
/// one integer literal or by offsetting its last return value.
pub fn mutate(rng: &mut ChaCha8Rng, source: &str) -> String {
    let starts: Vec<usize> = source.match_indices("\nfn f").map(|(i, _)| i + 1).collect();
    if starts.is_empty() {
        return source.to_string();
    }
    let start = *starts.choose(rng).unwrap();
    let end = source[start..].find("\n}\n").map_or(source.len(), |e| start + e);
    let body_start = start + source[start..].find('{').unwrap();
    let bytes = source.as_bytes();
    // first digit of each number token; digits inside names like `p0` or `f2` stay
    let digits: Vec<usize> = (body_start..end)
        .filter(|&i| bytes[i].is_ascii_digit() && !(bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_'))
        .collect();
    let mut out = source.to_string();
    // offsetting the last return always changes what the function returns
    if rng.gen_bool(0.5) {
        if let Some(r) = source[body_start..end].rfind("return ") {
            let at = body_start + r + "return ".len();
            let semi = at + source[at..].find(';').unwrap();
            let offset = rng.gen_range(1..=3);
            out.replace_range(at..semi, &format!("({}) + {offset}", &source[at..semi]));
            return out;
        }
    }
    match digits.choose(rng) {
        Some(&at) => {
            let d = out.as_bytes()[at] - b'0';
            let replacement = ((d + rng.gen_range(1..=8)) % 10).to_string();
            out.replace_range(at..at + 1, &replacement);
        }
        None => out.insert_str(end, "\n    return 7;"),
    }
    out
}

/// Domains `[-r, r]` for every entry parameter plus `tests` random tests
/// whose expectations are the program's own outcomes, so they all pass.
pub fn self_consistent_scenario(rng: &mut ChaCha8Rng, p: &Program, radius: i64, tests: usize) -> Scenario {
    let domains: BTreeMap<String, (i64, i64)> =
        p.entry().params().iter().map(|n| (n.clone(), (-radius, radius))).collect();
    let mut cases = Vec::new();
    for t in 0..tests {
        let args: Vec<i64> = p.entry().params().iter().map(|_| rng.gen_range(-radius..=radius)).collect();
        let (outcome, _) = execute(p, &args, 1_000_000, &MonitorPlan::default()).unwrap();
        let expect = match outcome {
            Outcome::Returned(v) => Expectation::Returned(v),
            _ => Expectation::Error,
        };
        cases.push(TestCase {
            id: format!("t{t}"),
            args,
            expect,
        });
    }
    Scenario::new(domains, cases)
}

/// Seeds whose generated program parses; generation is syntax-directed so
/// this is a sanity guard rather than a filter.
pub fn parsed(source: &str) -> Program {
    parse_program(source).unwrap_or_else(|e| panic!("{e}\n{source}"))
}

use regwatch_core::analysis::check_trace;
use regwatch_core::property::{CmpOp, Invariant, Operand, Point, Property};
use regwatch_core::trace::{TestVerdict, Trace, Version};

/// What exhaustive replay says about a property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleView {
    /// Every tuple whose run violates the property, in enumeration order.
    pub violating: Vec<Vec<i64>>,
    /// Every tuple whose run exhausted the budget.
    pub exhausted: Vec<Vec<i64>>,
    /// All tuples in lexicographic order.
    pub tuples: Vec<Vec<i64>>,
}

/// Cartesian product of the domains, first parameter most significant.
pub fn tuples(domains: &[(i64, i64)]) -> Vec<Vec<i64>> {
    match domains.split_first() {
        None => vec![vec![]],
        Some((&(lo, hi), rest)) => {
            let tails = tuples(rest);
            (lo..=hi)
                .flat_map(|v| {
                    tails.iter().map(move |t| {
                        let mut x = vec![v];
                        x.extend(t);
                        x
                    })
                })
                .collect()
        }
    }
}

/// Runs every tuple, tracing what the property can see, and checks each trace.
pub fn oracle(p: &Program, s: &Scenario, prop: &Property, budget: u64) -> OracleView {
    let all = MonitorPlan::monitoring(prop.observed_functions());
    let tuples = tuples(&s.ordered_domains(p).unwrap());
    let mut view = OracleView {
        violating: vec![],
        exhausted: vec![],
        tuples: tuples.clone(),
    };
    for args in tuples {
        let (outcome, events) = execute(p, &args, budget, &all).unwrap();
        let trace = Trace {
            version: Version::Base,
            test_id: "oracle".into(),
            verdict: TestVerdict::Pass,
            events,
        };
        if !check_trace(prop, &trace).unwrap().is_empty() {
            view.violating.push(args.clone());
        }
        if outcome == Outcome::BudgetExhausted {
            view.exhausted.push(args);
        }
    }
    view
}

/// Random bounds and comparisons on parameters and return values.
pub fn random_invariants(rng: &mut ChaCha8Rng, p: &Program, count: usize) -> Vec<Property> {
    let mut out: Vec<Property> = Vec::new();
    for _ in 0..count {
        let f = p.functions().choose(rng).unwrap();
        let point = if rng.gen_bool(0.5) { Point::Entry } else { Point::Exit };
        let mut vars: Vec<String> = f.params().to_vec();
        if point == Point::Exit {
            vars.push("ret".into());
        }
        let Some(lhs) = vars.choose(rng).cloned() else { continue };
        let op = *[CmpOp::Eq, CmpOp::Ne, CmpOp::Le, CmpOp::Ge].choose(rng).unwrap();
        let rhs = match vars.iter().filter(|v| **v != lhs).collect::<Vec<_>>().choose(rng) {
            Some(v) if rng.gen_bool(0.3) => Operand::Var((*v).clone()),
            _ => Operand::Const(rng.gen_range(-8..=8)),
        };
        let prop = Property::invariant(f.name(), Invariant { point, lhs, op, rhs });
        if !out.iter().any(|q| q.id == prop.id) {
            out.push(prop);
        }
    }
    out
}

/// A generated base program, a mutated upgrade, and test suites for both.
/// Half the upgrades are pure regressions whose tests all expect the base
/// outcome. In the rest each test expects either outcome, so some behavior
/// changes are intended.
pub struct Upgrade {
    pub base_src: String,
    pub upgraded_src: String,
    pub base: Program,
    pub upgraded: Program,
    pub base_scenario: Scenario,
    pub upgraded_scenario: Scenario,
}

fn expectation(p: &Program, args: &[i64]) -> Expectation {
    match execute(p, args, 1_000_000, &MonitorPlan::default()).unwrap().0 {
        Outcome::Returned(v) => Expectation::Returned(v),
        _ => Expectation::Error,
    }
}

pub fn random_upgrade(rng: &mut ChaCha8Rng, shape: Shape, radius: i64) -> Upgrade {
    let base_src = random_program(rng, shape);
    let upgraded_src = mutate(rng, &base_src);
    let base = parsed(&base_src);
    let upgraded = parsed(&upgraded_src);
    let base_scenario = self_consistent_scenario(rng, &base, radius, 6);
    let intended = if rng.gen_bool(0.5) { 0.0 } else { 0.5 };
    let tests = (0..6)
        .map(|t| {
            let args: Vec<i64> = base.entry().params().iter().map(|_| rng.gen_range(-radius..=radius)).collect();
            let from = if !rng.gen_bool(intended) { &base } else { &upgraded };
            TestCase {
                id: format!("u{t}"),
                expect: expectation(from, &args),
                args,
            }
        })
        .collect();
    let upgraded_scenario = Scenario::new(base_scenario.domains().clone(), tests);
    Upgrade {
        base_src,
        upgraded_src,
        base,
        upgraded,
        base_scenario,
        upgraded_scenario,
    }
}

/// Every intermediate result of the library pipeline.
pub struct Artifacts {
    pub plan: MonitorPlan,
    pub base_traces: Vec<Trace>,
    pub mined: Vec<Property>,
    pub pruned: Vec<Property>,
    pub survivors: Vec<Property>,
    pub upgraded_traces: Vec<Trace>,
    pub classification: regwatch_core::analysis::Classification,
    pub analysis: regwatch_core::analysis::Analysis,
}

pub fn run_pipeline(u: &Upgrade, mode: regwatch_core::verify::Mode, limits: regwatch_core::verify::Limits) -> Artifacts {
    use regwatch_core::{analysis, lang, miner, scope, verify};
    let plan = scope::build_plan(&u.base, &u.upgraded, 1);
    let base_traces = lang::run_suite(&u.base, &u.base_scenario, &plan, Version::Base, limits.step_budget).unwrap();
    let mined = miner::mine(&base_traces, &plan, 2, 2).unwrap();
    let pruned = verify::prune(&mined, &u.base, &u.base_scenario, limits).unwrap();
    let survivors = verify::survivors(&pruned, mode);
    let upgraded_traces =
        lang::run_suite(&u.upgraded, &u.upgraded_scenario, &plan, Version::Upgraded, limits.step_budget).unwrap();
    let (passing, failing): (Vec<Trace>, Vec<Trace>) =
        upgraded_traces.iter().cloned().partition(|t| t.verdict == TestVerdict::Pass);
    let classification = analysis::classify_obsolete(&survivors, &passing).unwrap();
    let mut a = analysis::analyze(&classification.uptodate, &failing, &lang::call_graph(&u.upgraded)).unwrap();
    let without_tests = u.upgraded_scenario.without_tests();
    a.faults = analysis::static_check(&classification.uptodate, &u.upgraded, &without_tests, limits).unwrap();
    Artifacts {
        plan,
        base_traces,
        mined,
        pruned,
        survivors,
        upgraded_traces,
        classification,
        analysis: a,
    }
}
