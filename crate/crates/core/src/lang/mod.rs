//! MiniProc: the small deterministic imperative language whose programs play
//! the role of the analysed system. Parsing, execution under a monitor plan,
//! version diffing and call graphs live here.

mod diff;
mod interp;
mod lexer;
mod parser;
mod scenario;

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

pub use diff::{call_graph, diff_programs, CallGraph, ChangeSet};
pub use interp::{execute, run_suite, ExecError, Outcome, RuntimeErrorCode, MAX_CALL_DEPTH};
pub use parser::parse_program;
pub use scenario::{Expectation, Scenario, ScenarioError, TestCase};

/// Index of a variable inside its function's frame.
pub type Slot = usize;
/// Index of a function inside its program.
pub type FuncId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Lt,
    Le,
    Eq,
    Ne,
    Ge,
    Gt,
    And,
    Or,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(i64),
    Var(Slot),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call { callee: FuncId, args: Vec<Expr> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Let(Slot, Expr),
    Assign(Slot, Expr),
    If(Expr, Vec<Stmt>, Vec<Stmt>),
    While(Expr, Vec<Stmt>),
    Return(Expr),
    Expr(Expr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Function {
    name: String,
    params: Vec<String>,
    /// Frame layout: parameters first, then every distinct `let` name.
    slots: Vec<String>,
    body: Vec<Stmt>,
    body_hash: String,
}

impl Function {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn slots(&self) -> &[String] {
        &self.slots
    }

    pub fn body(&self) -> &[Stmt] {
        &self.body
    }

    /// SHA-256 over the body's token stream joined by single spaces, so
    /// comments and formatting never count as a change.
    pub fn body_hash(&self) -> &str {
        &self.body_hash
    }
}

/// A validated MiniProc program. Only [`parse_program`] constructs one, so
/// every call target exists and every variable read is bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    functions: Vec<Function>,
    index: BTreeMap<String, FuncId>,
    entry: FuncId,
}

impl Program {
    pub fn entry(&self) -> &Function {
        &self.functions[self.entry]
    }

    pub fn entry_id(&self) -> FuncId {
        self.entry
    }

    pub fn function(&self, name: &str) -> Option<&Function> {
        self.index.get(name).map(|&id| &self.functions[id])
    }

    pub fn function_id(&self, name: &str) -> Option<FuncId> {
        self.index.get(name).copied()
    }

    pub fn by_id(&self, id: FuncId) -> &Function {
        &self.functions[id]
    }

    /// Functions in definition order.
    pub fn functions(&self) -> &[Function] {
        &self.functions
    }

    /// Function names in lexicographic order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.index.keys().map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub col: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self {
            kind: ParseErrorKind::Syntax,
            line,
            col,
            message: message.into(),
        }
    }

    pub(crate) fn semantic(line: usize, col: usize, message: impl Into<String>) -> Self {
        Self {
            kind: ParseErrorKind::Semantic,
            line,
            col,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ParseErrorKind::Syntax => "syntax error",
            ParseErrorKind::Semantic => "semantic error",
        };
        write!(f, "{kind} at {}:{}: {}", self.line, self.col, self.message)
    }
}
