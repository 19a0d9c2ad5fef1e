use std::collections::BTreeMap;
use std::fmt::Write;

use super::{Report, Summary};
use crate::analysis::{Anomaly, RegressionFaultReport};
use crate::property::{Property, PropertyStatus};

const TITLE: &str = "Regression analysis report";

/// Anomalies are numbered by rendered position.
fn numbering(r: &Report) -> BTreeMap<usize, usize> {
    r.rendered_order().into_iter().enumerate().map(|(n, i)| (i, n + 1)).collect()
}

fn chain_role(r: &Report, i: usize, num: &BTreeMap<usize, usize>) -> String {
    if r.is_root(i) {
        return "root".to_string();
    }
    let causes: Vec<String> = r.causes(i).map(|e| format!("#{} ({})", num[&e.from], e.reason)).collect();
    format!("after {}", causes.join(", "))
}

fn anomaly_line(a: &Anomaly) -> String {
    let v = &a.violation;
    format!("{} at seq {}: observed {}", v.property_id, v.event_seq, v.observed)
}

fn fault_line(f: &RegressionFaultReport) -> String {
    let args: Vec<String> = f.args.iter().map(i64::to_string).collect();
    format!("{} args={} outcome={}", f.property_id, args.join(","), f.outcome)
}

fn property_line(p: &Property) -> String {
    let origin = p.status.origin().map(|o| o.to_string()).unwrap_or_default();
    format!("{} [{}]: {}", p.id, origin, p.describe())
}

type Rows = Vec<(&'static str, usize)>;

fn summary_rows(s: &Summary) -> (Rows, Rows) {
    (
        PropertyStatus::NAMES.iter().copied().zip(s.properties).collect(),
        Summary::TEST_LABELS.iter().copied().zip(s.tests).collect(),
    )
}

pub fn render_text(r: &Report) -> String {
    let mut out = String::new();
    let (props, tests) = summary_rows(&r.summary);
    let join = |rows: Vec<(&str, usize)>| rows.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
    writeln!(out, "{TITLE}").unwrap();
    writeln!(out, "summary").unwrap();
    writeln!(out, "  properties: {}", join(props)).unwrap();
    writeln!(out, "  tests: {}", join(tests)).unwrap();

    if !r.anomalies.is_empty() {
        let num = numbering(r);
        writeln!(out, "anomalies").unwrap();
        for tier in r.hierarchy() {
            writeln!(out, "  origin {}", tier.origin).unwrap();
            for test in &tier.tests {
                writeln!(out, "    test {}", test.test_id).unwrap();
                for f in &test.functions {
                    writeln!(out, "      function {}", f.func).unwrap();
                    for &i in &f.anomalies {
                        writeln!(out, "        #{} {}", num[&i], anomaly_line(&r.anomalies[i])).unwrap();
                        writeln!(out, "          chain: {}", chain_role(r, i, &num)).unwrap();
                    }
                }
            }
        }
    }
    if !r.faults.is_empty() {
        writeln!(out, "faults").unwrap();
        for f in &r.faults {
            writeln!(out, "  {}", fault_line(f)).unwrap();
        }
    }
    for (title, list) in [("up-to-date properties", &r.uptodate), ("obsolete properties", &r.obsolete)] {
        if !list.is_empty() {
            writeln!(out, "{title}").unwrap();
            for p in list {
                writeln!(out, "  {}", property_line(p)).unwrap();
            }
        }
    }
    out
}

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

const STYLE: &str = "body{font-family:sans-serif;margin:2em}\
table{border-collapse:collapse}td,th{border:1px solid #999;padding:2px 8px;text-align:left}\
ul{list-style:none}li.root>span.anomaly{font-weight:bold}\
.mark{background:#c00;color:#fff;padding:0 4px;margin-right:4px}\
.role{color:#555}";

pub fn render_html(r: &Report) -> String {
    let mut out = String::new();
    writeln!(out, "<!DOCTYPE html>").unwrap();
    writeln!(out, "<html lang=\"en\">").unwrap();
    writeln!(out, "<head><meta charset=\"utf-8\"><title>{TITLE}</title><style>{STYLE}</style></head>").unwrap();
    writeln!(out, "<body>").unwrap();
    writeln!(out, "<h1>{TITLE}</h1>").unwrap();

    let (props, tests) = summary_rows(&r.summary);
    writeln!(out, "<h2>Summary</h2>").unwrap();
    for (caption, rows) in [("Properties", props), ("Tests", tests)] {
        writeln!(out, "<table><caption>{caption}</caption>").unwrap();
        for (k, v) in rows {
            writeln!(out, "<tr><th>{}</th><td>{v}</td></tr>", esc(k)).unwrap();
        }
        writeln!(out, "</table>").unwrap();
    }

    if !r.anomalies.is_empty() {
        let num = numbering(r);
        writeln!(out, "<h2>Anomalies</h2>").unwrap();
        writeln!(out, "<ul>").unwrap();
        for tier in r.hierarchy() {
            writeln!(out, "<li>origin {}<ul>", tier.origin).unwrap();
            for test in &tier.tests {
                writeln!(out, "<li>test {}<ul>", esc(&test.test_id)).unwrap();
                for f in &test.functions {
                    writeln!(out, "<li>function {}<ul>", esc(&f.func)).unwrap();
                    for &i in &f.anomalies {
                        let (class, mark) = if r.is_root(i) {
                            (" class=\"root\"", "<span class=\"mark\">root</span>")
                        } else {
                            ("", "")
                        };
                        writeln!(
                            out,
                            "<li{class}>{mark}<span class=\"anomaly\">#{} {}</span> <span class=\"role\">chain: {}</span></li>",
                            num[&i],
                            esc(&anomaly_line(&r.anomalies[i])),
                            esc(&chain_role(r, i, &num))
                        )
                        .unwrap();
                    }
                    writeln!(out, "</ul></li>").unwrap();
                }
                writeln!(out, "</ul></li>").unwrap();
            }
            writeln!(out, "</ul></li>").unwrap();
        }
        writeln!(out, "</ul>").unwrap();
    }
    let lists: [(&str, Vec<String>); 3] = [
        ("Faults", r.faults.iter().map(fault_line).collect()),
        ("Up-to-date properties", r.uptodate.iter().map(property_line).collect()),
        ("Obsolete properties", r.obsolete.iter().map(property_line).collect()),
    ];
    for (title, lines) in lists {
        if !lines.is_empty() {
            writeln!(out, "<h2>{title}</h2>").unwrap();
            writeln!(out, "<ul>").unwrap();
            for l in lines {
                writeln!(out, "<li>{}</li>", esc(&l)).unwrap();
            }
            writeln!(out, "</ul>").unwrap();
        }
    }
    writeln!(out, "</body>").unwrap();
    writeln!(out, "</html>").unwrap();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{Analysis, Edge, EdgeReason, Observation, Violation};
    use crate::lang::Outcome;
    use crate::property::Origin;

    fn anomaly(origin: Origin, seq: u64, id: &str, func: &str) -> Anomaly {
        Anomaly {
            violation: Violation {
                property_id: id.into(),
                test_id: "t9".into(),
                func: func.into(),
                event_seq: seq,
                observed: Observation::End,
            },
            origin,
        }
    }

    #[test]
    fn empty_report() {
        let r = Report::default();
        assert_eq!(
            render_text(&r),
            "Regression analysis report\n\
             summary\n  \
             properties: mined=0 proved=0 refuted=0 unknown=0 obsolete=0 uptodate=0\n  \
             tests: base/pass=0 base/fail=0 upgraded/pass=0 upgraded/fail=0\n"
        );
        let html = render_html(&r);
        assert!(!html.contains("Anomalies"));
        assert!(!html.contains("<script"));
    }

    #[test]
    fn chain_roles_and_escaping() {
        let analysis = Analysis {
            anomalies: vec![
                anomaly(Origin::Proved, 2, "clamp@exit:ret<=10", "clamp"),
                anomaly(Origin::Proved, 3, "main@exit:ret<=10", "main"),
            ],
            edges: vec![Edge {
                from: 0,
                to: 1,
                reason: EdgeReason::CallRelation,
            }],
            faults: vec![RegressionFaultReport {
                property_id: "main@exit:ret<=10".into(),
                args: vec![11],
                outcome: Outcome::Returned(20),
            }],
        };
        let r = Report::new(&[], &[], &analysis);
        let text = render_text(&r);
        assert!(text.contains("        #1 clamp@exit:ret<=10 at seq 2: observed end\n          chain: root\n"));
        assert!(text.contains("        #2 main@exit:ret<=10 at seq 3: observed end\n          chain: after #1 (call_relation)\n"));
        assert!(text.contains("faults\n  main@exit:ret<=10 args=11 outcome=returned:20\n"));
        let html = render_html(&r);
        assert!(html.contains("ret&lt;=10"));
        assert!(!html.contains("ret<=10"));
        assert_eq!(html.matches("class=\"root\"").count(), 1);
        assert_eq!(render_html(&r), html);
    }
}
