//! Hierarchical, prioritized views of an analysis.

mod render;

use crate::analysis::{Analysis, Anomaly, Edge, RegressionFaultReport};
use crate::property::{Origin, Property, PropertyStatus};
use crate::trace::{TestVerdict, Trace, Version};

pub use render::{render_html, render_text};

/// Proved-origin anomalies first, then by event seq, property id and test.
pub fn prioritize(mut anomalies: Vec<Anomaly>) -> Vec<Anomaly> {
    anomalies.sort_by(|a, b| priority_key(a).cmp(&priority_key(b)));
    anomalies
}

fn priority_key(a: &Anomaly) -> (Origin, u64, &str, &str) {
    let v = &a.violation;
    (a.origin, v.event_seq, &v.property_id, &v.test_id)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Summary {
    /// Indexed like [`PropertyStatus::NAMES`].
    pub properties: [usize; 6],
    /// base/pass, base/fail, upgraded/pass, upgraded/fail.
    pub tests: [usize; 4],
}

impl Summary {
    pub const TEST_LABELS: [&'static str; 4] = ["base/pass", "base/fail", "upgraded/pass", "upgraded/fail"];
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionGroup {
    pub func: String,
    /// Indices into [`Report::anomalies`].
    pub anomalies: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestGroup {
    pub test_id: String,
    pub functions: Vec<FunctionGroup>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tier {
    pub origin: Origin,
    pub tests: Vec<TestGroup>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Report {
    pub summary: Summary,
    /// In priority order.
    pub anomalies: Vec<Anomaly>,
    /// Chain edges between `anomalies`.
    pub edges: Vec<Edge>,
    pub faults: Vec<RegressionFaultReport>,
    pub uptodate: Vec<Property>,
    pub obsolete: Vec<Property>,
}

impl Report {
    pub fn new(props: &[Property], traces: &[Trace], analysis: &Analysis) -> Report {
        let mut summary = Summary::default();
        for p in props {
            let i = PropertyStatus::NAMES.iter().position(|n| *n == p.status.name()).unwrap();
            summary.properties[i] += 1;
        }
        for t in traces {
            let i = match (t.version, t.verdict) {
                (Version::Base, TestVerdict::Pass) => 0,
                (Version::Base, TestVerdict::Fail) => 1,
                (Version::Upgraded, TestVerdict::Pass) => 2,
                (Version::Upgraded, TestVerdict::Fail) => 3,
            };
            summary.tests[i] += 1;
        }

        let mut order: Vec<usize> = (0..analysis.anomalies.len()).collect();
        order.sort_by(|a, b| {
            let (a, b) = (&analysis.anomalies[*a], &analysis.anomalies[*b]);
            priority_key(a).cmp(&priority_key(b))
        });
        let mut new_index = vec![0; order.len()];
        for (new, old) in order.iter().enumerate() {
            new_index[*old] = new;
        }
        let mut edges: Vec<Edge> = analysis
            .edges
            .iter()
            .map(|e| Edge {
                from: new_index[e.from],
                to: new_index[e.to],
                reason: e.reason,
            })
            .collect();
        edges.sort();

        let mut faults = analysis.faults.clone();
        faults.sort_by(|a, b| (&a.property_id, &a.args).cmp(&(&b.property_id, &b.args)));

        let pick = |want: fn(PropertyStatus) -> bool| -> Vec<Property> {
            let mut v: Vec<Property> = props.iter().filter(|p| want(p.status)).cloned().collect();
            v.sort_by(|a, b| a.id.cmp(&b.id));
            v
        };
        Report {
            summary,
            anomalies: order.into_iter().map(|i| analysis.anomalies[i].clone()).collect(),
            edges,
            faults,
            uptodate: pick(|s| matches!(s, PropertyStatus::UpToDate(_))),
            obsolete: pick(|s| matches!(s, PropertyStatus::Obsolete(_))),
        }
    }

    pub fn is_clean(&self) -> bool {
        self.anomalies.is_empty() && self.faults.is_empty()
    }

    pub fn is_root(&self, i: usize) -> bool {
        !self.edges.iter().any(|e| e.to == i)
    }

    /// Edges into anomaly `i`.
    pub fn causes(&self, i: usize) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == i)
    }

    /// Origin tier, then test, then function. Every level lists its groups
    /// in order of their first member in priority order, and members keep
    /// priority order, so no Unknown-origin anomaly precedes a Proved one.
    pub fn hierarchy(&self) -> Vec<Tier> {
        let mut tiers: Vec<Tier> = Vec::new();
        for (i, a) in self.anomalies.iter().enumerate() {
            let v = &a.violation;
            if tiers.last().is_none_or(|t| t.origin != a.origin) {
                tiers.push(Tier {
                    origin: a.origin,
                    tests: Vec::new(),
                });
            }
            let tests = &mut tiers.last_mut().unwrap().tests;
            let t = match tests.iter().position(|t| t.test_id == v.test_id) {
                Some(t) => t,
                None => {
                    tests.push(TestGroup {
                        test_id: v.test_id.clone(),
                        functions: Vec::new(),
                    });
                    tests.len() - 1
                }
            };
            let funcs = &mut tests[t].functions;
            match funcs.iter_mut().find(|f| f.func == v.func) {
                Some(f) => f.anomalies.push(i),
                None => funcs.push(FunctionGroup {
                    func: v.func.clone(),
                    anomalies: vec![i],
                }),
            }
        }
        tiers
    }

    /// Anomaly indices in the order the hierarchy renders them.
    pub fn rendered_order(&self) -> Vec<usize> {
        self.hierarchy()
            .into_iter()
            .flat_map(|t| t.tests)
            .flat_map(|t| t.functions)
            .flat_map(|f| f.anomalies)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{EdgeReason, Observation, Violation};

    fn anomaly(origin: Origin, seq: u64, id: &str, test: &str, func: &str) -> Anomaly {
        Anomaly {
            violation: Violation {
                property_id: id.into(),
                test_id: test.into(),
                func: func.into(),
                event_seq: seq,
                observed: Observation::End,
            },
            origin,
        }
    }

    fn key(a: &Anomaly) -> (Origin, u64) {
        (a.origin, a.violation.event_seq)
    }

    #[test]
    fn prioritize_rules() {
        assert!(prioritize(vec![]).is_empty());
        let out = prioritize(vec![
            anomaly(Origin::Unknown, 1, "a@calls", "t", "a"),
            anomaly(Origin::Proved, 9, "a@calls", "t", "a"),
        ]);
        assert_eq!(out.iter().map(key).collect::<Vec<_>>(), [(Origin::Proved, 9), (Origin::Unknown, 1)]);
        let out = prioritize(vec![
            anomaly(Origin::Proved, 7, "a@calls", "t", "a"),
            anomaly(Origin::Proved, 2, "a@calls", "t", "a"),
        ]);
        assert_eq!(out.iter().map(key).collect::<Vec<_>>(), [(Origin::Proved, 2), (Origin::Proved, 7)]);
        let out = prioritize(vec![
            anomaly(Origin::Proved, 2, "b@calls", "t", "b"),
            anomaly(Origin::Proved, 2, "a@calls", "u", "a"),
            anomaly(Origin::Proved, 2, "a@calls", "t", "a"),
        ]);
        let ids: Vec<(&str, &str)> = out
            .iter()
            .map(|a| (a.violation.property_id.as_str(), a.violation.test_id.as_str()))
            .collect();
        assert_eq!(ids, [("a@calls", "t"), ("a@calls", "u"), ("b@calls", "t")]);
    }

    #[test]
    fn edges_follow_reordering() {
        let analysis = Analysis {
            anomalies: vec![
                anomaly(Origin::Unknown, 1, "f@calls", "t", "f"),
                anomaly(Origin::Proved, 4, "g@calls", "t", "g"),
            ],
            edges: vec![Edge {
                from: 0,
                to: 1,
                reason: EdgeReason::CallRelation,
            }],
            faults: vec![],
        };
        let r = Report::new(&[], &[], &analysis);
        assert_eq!(r.anomalies[0].origin, Origin::Proved);
        assert_eq!((r.edges[0].from, r.edges[0].to), (1, 0));
        assert!(!r.is_root(0) && r.is_root(1));
    }

    #[test]
    fn hierarchy_groups_by_first_appearance() {
        let analysis = Analysis {
            anomalies: vec![
                anomaly(Origin::Proved, 2, "f@calls", "t1", "f"),
                anomaly(Origin::Proved, 3, "g@calls", "t2", "g"),
                anomaly(Origin::Proved, 5, "h@calls", "t1", "h"),
                anomaly(Origin::Proved, 6, "f@exit:x>=0", "t1", "f"),
                anomaly(Origin::Unknown, 1, "f@calls", "t2", "f"),
            ],
            ..Analysis::default()
        };
        let r = Report::new(&[], &[], &analysis);
        let h = r.hierarchy();
        assert_eq!(h.len(), 2);
        type Funcs<'a> = Vec<(&'a str, Vec<usize>)>;
        let shape: Vec<(&str, Funcs)> = h[0]
            .tests
            .iter()
            .map(|t| {
                (
                    t.test_id.as_str(),
                    t.functions.iter().map(|f| (f.func.as_str(), f.anomalies.clone())).collect(),
                )
            })
            .collect();
        assert_eq!(shape, [("t1", vec![("f", vec![0, 3]), ("h", vec![2])]), ("t2", vec![("g", vec![1])])]);
        assert_eq!(r.rendered_order(), [0, 3, 2, 1, 4]);
    }

    #[test]
    fn summary_counts() {
        let mut p = Property::automaton("f", 2, crate::miner::build_pta::<&str>(&[vec![]]));
        p.status = PropertyStatus::Obsolete(Origin::Unknown);
        let t = Trace {
            version: Version::Upgraded,
            test_id: "t".into(),
            verdict: TestVerdict::Fail,
            events: vec![],
        };
        let r = Report::new(&[p], &[t], &Analysis::default());
        assert_eq!(r.summary.properties, [0, 0, 0, 0, 1, 0]);
        assert_eq!(r.summary.tests, [0, 0, 0, 1]);
        assert_eq!(r.obsolete.len(), 1);
        assert!(r.uptodate.is_empty());
    }
}
