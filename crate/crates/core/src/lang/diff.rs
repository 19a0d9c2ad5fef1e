use std::collections::{BTreeMap, BTreeSet};

use super::{Expr, Program, Stmt};

/// Function-level differences between two program versions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangeSet {
    /// In both versions with a different body hash or parameter list.
    pub changed: BTreeSet<String>,
    pub added: BTreeSet<String>,
    pub deleted: BTreeSet<String>,
}

impl ChangeSet {
    pub fn is_empty(&self) -> bool {
        self.changed.is_empty() && self.added.is_empty() && self.deleted.is_empty()
    }
}

pub fn diff_programs(base: &Program, upgraded: &Program) -> ChangeSet {
    let mut cs = ChangeSet::default();
    for f in base.functions() {
        match upgraded.function(f.name()) {
            None => {
                cs.deleted.insert(f.name().to_string());
            }
            Some(g) if g.body_hash() != f.body_hash() || g.params() != f.params() => {
                cs.changed.insert(f.name().to_string());
            }
            Some(_) => {}
        }
    }
    for g in upgraded.functions() {
        if base.function(g.name()).is_none() {
            cs.added.insert(g.name().to_string());
        }
    }
    cs
}

/// Static call edges. Every function of the program has an entry, possibly
/// with an empty callee set.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallGraph {
    pub edges: BTreeMap<String, BTreeSet<String>>,
}

impl CallGraph {
    pub fn calls(&self, caller: &str, callee: &str) -> bool {
        self.edges.get(caller).is_some_and(|s| s.contains(callee))
    }

    /// True when either function calls the other.
    pub fn related(&self, a: &str, b: &str) -> bool {
        self.calls(a, b) || self.calls(b, a)
    }
}

pub fn call_graph(p: &Program) -> CallGraph {
    let mut edges = BTreeMap::new();
    for f in p.functions() {
        let mut callees = BTreeSet::new();
        collect_stmts(f.body(), &mut |id| {
            callees.insert(p.by_id(id).name().to_string());
        });
        edges.insert(f.name().to_string(), callees);
    }
    CallGraph { edges }
}

fn collect_stmts(stmts: &[Stmt], sink: &mut impl FnMut(usize)) {
    for s in stmts {
        match s {
            Stmt::Let(_, e) | Stmt::Assign(_, e) | Stmt::Return(e) | Stmt::Expr(e) => {
                collect_expr(e, sink)
            }
            Stmt::If(c, a, b) => {
                collect_expr(c, sink);
                collect_stmts(a, sink);
                collect_stmts(b, sink);
            }
            Stmt::While(c, body) => {
                collect_expr(c, sink);
                collect_stmts(body, sink);
            }
        }
    }
}

fn collect_expr(e: &Expr, sink: &mut impl FnMut(usize)) {
    match e {
        Expr::Lit(_) | Expr::Var(_) => {}
        Expr::Bin(_, l, r) => {
            collect_expr(l, sink);
            collect_expr(r, sink);
        }
        Expr::Call { callee, args } => {
            sink(*callee);
            for a in args {
                collect_expr(a, sink);
            }
        }
    }
}
