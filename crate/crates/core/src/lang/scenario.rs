use std::collections::BTreeMap;

use thiserror::Error;

use super::{Outcome, Program};
use crate::trace::{is_valid_token, parse_int, FormatError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("scenario does not fit the program: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Returned(i64),
    /// Any runtime error.
    Error,
}

impl Expectation {
    pub fn matches(&self, outcome: &Outcome) -> bool {
        match (self, outcome) {
            (Expectation::Returned(want), Outcome::Returned(got)) => want == got,
            (Expectation::Error, Outcome::RuntimeError(_)) => true,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestCase {
    pub id: String,
    pub args: Vec<i64>,
    pub expect: Expectation,
}

/// Input domains of the entry function plus the test suite.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    domains: BTreeMap<String, (i64, i64)>,
    tests: Vec<TestCase>,
}

impl Scenario {
    pub fn new(domains: BTreeMap<String, (i64, i64)>, tests: Vec<TestCase>) -> Self {
        Self { domains, tests }
    }

    pub fn domains(&self) -> &BTreeMap<String, (i64, i64)> {
        &self.domains
    }

    pub fn tests(&self) -> &[TestCase] {
        &self.tests
    }

    /// Same domains, no tests.
    pub fn without_tests(&self) -> Scenario {
        Scenario {
            domains: self.domains.clone(),
            tests: Vec::new(),
        }
    }

    /// Domains in the entry function's parameter order.
    pub fn ordered_domains(&self, p: &Program) -> Result<Vec<(i64, i64)>, ScenarioError> {
        let entry = p.entry();
        entry
            .params()
            .iter()
            .map(|param| {
                self.domains.get(param).copied().ok_or_else(|| {
                    ScenarioError::Invalid(format!("no domain for parameter {param}"))
                })
            })
            .collect()
    }

    pub fn validate(&self, p: &Program) -> Result<(), ScenarioError> {
        let entry = p.entry();
        if let Some(extra) = self.domains.keys().find(|k| !entry.params().contains(k)) {
            return Err(ScenarioError::Invalid(format!(
                "domain for {extra}, which is not a parameter of {}",
                entry.name()
            )));
        }
        let domains = self.ordered_domains(p)?;
        for test in &self.tests {
            if test.args.len() != domains.len() {
                return Err(ScenarioError::Invalid(format!(
                    "test {} has {} argument(s), {} expects {}",
                    test.id,
                    test.args.len(),
                    entry.name(),
                    domains.len()
                )));
            }
            for ((arg, (lo, hi)), param) in test.args.iter().zip(&domains).zip(entry.params()) {
                if arg < lo || arg > hi {
                    return Err(ScenarioError::Invalid(format!(
                        "test {}: {param}={arg} outside [{lo}, {hi}]",
                        test.id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        match lines.next() {
            Some((_, "#scenario")) => {}
            Some((n, other)) => {
                return Err(FormatError::new(n, format!("expected '#scenario', found {other:?}")).into())
            }
            None => return Err(FormatError::new(1, "empty input").into()),
        }

        let mut scenario = Scenario::default();
        let mut ended = false;
        for (n, line) in lines.by_ref() {
            if line == "#end" {
                ended = true;
                break;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            match fields.as_slice() {
                ["domain", param, lo, hi] => {
                    let (lo, hi) = (parse_int(n, lo)?, parse_int(n, hi)?);
                    if lo > hi {
                        return Err(FormatError::new(n, format!("empty domain [{lo}, {hi}]")).into());
                    }
                    if scenario.domains.insert(param.to_string(), (lo, hi)).is_some() {
                        return Err(FormatError::new(n, format!("duplicate domain for {param}")).into());
                    }
                }
                ["test", id, args, expect] => {
                    if !is_valid_token(id) {
                        return Err(FormatError::new(n, format!("invalid test id {id:?}")).into());
                    }
                    if scenario.tests.iter().any(|t| t.id == *id) {
                        return Err(FormatError::new(n, format!("duplicate test id {id}")).into());
                    }
                    let args = args
                        .strip_prefix("args=")
                        .ok_or_else(|| FormatError::new(n, "expected args=<int>[,<int>...]"))?;
                    let args = if args.is_empty() {
                        Vec::new()
                    } else {
                        args.split(',')
                            .map(|a| parse_int(n, a))
                            .collect::<Result<Vec<_>, _>>()?
                    };
                    let expect = match expect.strip_prefix("expect=") {
                        Some("error") => Expectation::Error,
                        Some(v) => Expectation::Returned(parse_int(n, v)?),
                        None => return Err(FormatError::new(n, "expected expect=<int>|error").into()),
                    };
                    scenario.tests.push(TestCase {
                        id: id.to_string(),
                        args,
                        expect,
                    });
                }
                _ => return Err(FormatError::new(n, format!("unrecognized line {line:?}")).into()),
            }
        }
        if !ended {
            return Err(FormatError::new(text.lines().count(), "missing '#end'").into());
        }
        if let Some((n, _)) = lines.next() {
            return Err(FormatError::new(n, "content after '#end'").into());
        }
        Ok(scenario)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("#scenario\n");
        for (param, (lo, hi)) in &self.domains {
            out.push_str(&format!("domain {param} {lo} {hi}\n"));
        }
        for t in &self.tests {
            let args: Vec<String> = t.args.iter().map(i64::to_string).collect();
            let expect = match t.expect {
                Expectation::Returned(v) => v.to_string(),
                Expectation::Error => "error".to_string(),
            };
            out.push_str(&format!("test {} args={} expect={}\n", t.id, args.join(","), expect));
        }
        out.push_str("#end\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse_program, run_suite};
    use crate::trace::{MonitorPlan, TestVerdict, Version};

    const BASE: &str = "fn main(cmd){ let s = clamp(cmd); return s; }\n\
                        fn clamp(x){ if x < 0 { return 0; } if x > 10 { return 10; } return x; }\n";
    const BUGGY: &str = "fn main(cmd){ let s = clamp(cmd); return s; }\n\
                         fn clamp(x){ if x < -10 { return -10; } if x > 10 { return 20; } return x; }\n";

    #[test]
    fn parse_and_validate() {
        let s = Scenario::parse(
            "#scenario\ndomain cmd -5 15\ntest t1 args=3 expect=3\ntest t2 args=-5 expect=error\n#end\n",
        )
        .unwrap();
        assert_eq!(s.domains()["cmd"], (-5, 15));
        assert_eq!(s.tests()[1].expect, Expectation::Error);
        let p = parse_program(BASE).unwrap();
        s.validate(&p).unwrap();
        assert_eq!(Scenario::parse(&s.to_text()).unwrap(), s);
    }

    #[test]
    fn invalid_scenarios() {
        let p = parse_program(BASE).unwrap();
        let cases = [
            "#scenario\ntest t1 args=3 expect=3\n#end\n",
            "#scenario\ndomain cmd 0 5\ntest t1 args=6 expect=3\n#end\n",
            "#scenario\ndomain cmd 0 5\ntest t1 args=1,2 expect=3\n#end\n",
            "#scenario\ndomain cmd 0 5\ndomain speed 0 1\n#end\n",
        ];
        for text in cases {
            let s = Scenario::parse(text).unwrap();
            assert!(matches!(s.validate(&p), Err(ScenarioError::Invalid(_))), "{text}");
        }
        let err = Scenario::parse("#scenario\ndomain cmd 5 0\n#end\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Format(FormatError { line: 2, .. })));
        let err = Scenario::parse("#scenario\ntest t1 args=1 expect=x\n#end\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Format(FormatError { line: 2, .. })));
    }

    #[test]
    fn verdicts() {
        let suite = Scenario::parse("#scenario\ndomain cmd -5 15\ntest t1 args=3 expect=3\n#end\n").unwrap();
        let p = parse_program(BASE).unwrap();
        let plan = MonitorPlan::monitoring(["main"]);
        let traces = run_suite(&p, &suite, &plan, Version::Base, 10_000).unwrap();
        assert_eq!(traces.len(), 1);
        assert_eq!(traces[0].verdict, TestVerdict::Pass);
        assert_eq!(traces[0].test_id, "t1");

        let empty = suite.without_tests();
        assert!(run_suite(&p, &empty, &plan, Version::Base, 10_000).unwrap().is_empty());

        let buggy = parse_program(BUGGY).unwrap();
        let t9 = Scenario::parse("#scenario\ndomain cmd -5 15\ntest t9 args=12 expect=10\n#end\n").unwrap();
        let traces = run_suite(&buggy, &t9, &plan, Version::Upgraded, 10_000).unwrap();
        assert_eq!(traces[0].verdict, TestVerdict::Fail);
        assert_eq!(traces[0].events.last().unwrap().ret(), Some(20));
    }
}
