use std::collections::{BTreeMap, BTreeSet};

use sha2::{Digest, Sha256};

use super::lexer::{tokenize, Tok, Token};
use super::{BinOp, Expr, FuncId, Function, ParseError, Program, Slot, Stmt};

const MAX_NESTING: usize = 200;

/// Parses and validates a MiniProc program.
///
/// The entry point is `main` when defined, otherwise the first function.
pub fn parse_program(source: &str) -> Result<Program, ParseError> {
    let tokens = tokenize(source)?;
    let signatures = scan_signatures(&tokens)?;
    let index: BTreeMap<String, FuncId> = signatures
        .iter()
        .enumerate()
        .map(|(id, (name, _))| (name.clone(), id))
        .collect();

    let mut parser = Parser {
        tokens: &tokens,
        pos: 0,
        signatures: &signatures,
        index: &index,
        slots: Vec::new(),
        depth: 0,
    };
    let mut functions = Vec::with_capacity(signatures.len());
    while parser.peek() != &Tok::Eof {
        functions.push(parser.function()?);
    }

    let entry = index.get("main").copied().unwrap_or(0);
    Ok(Program {
        functions,
        index,
        entry,
    })
}

/// First pass: function names and arities, so calls may target functions
/// defined later in the file. Bodies are skipped by brace matching.
fn scan_signatures(tokens: &[Token]) -> Result<Vec<(String, usize)>, ParseError> {
    let mut sigs: Vec<(String, usize)> = Vec::new();
    let mut pos = 0;
    let expect = |pos: usize, want: &Tok| -> Result<(), ParseError> {
        let t = &tokens[pos];
        if &t.tok == want {
            Ok(())
        } else {
            Err(ParseError::syntax(
                t.line,
                t.col,
                format!("expected '{}', found '{}'", want.text(), t.tok.text()),
            ))
        }
    };

    if tokens[0].tok == Tok::Eof {
        return Err(ParseError::syntax(1, 1, "program defines no functions"));
    }
    while tokens[pos].tok != Tok::Eof {
        expect(pos, &Tok::Fn)?;
        pos += 1;
        let name_tok = &tokens[pos];
        let Tok::Ident(name) = &name_tok.tok else {
            return Err(ParseError::syntax(
                name_tok.line,
                name_tok.col,
                format!("expected function name, found '{}'", name_tok.tok.text()),
            ));
        };
        if sigs.iter().any(|(n, _)| n == name) {
            return Err(ParseError::semantic(
                name_tok.line,
                name_tok.col,
                format!("duplicate function {name}"),
            ));
        }
        pos += 1;
        expect(pos, &Tok::LParen)?;
        pos += 1;
        let mut arity = 0;
        if tokens[pos].tok != Tok::RParen {
            loop {
                let t = &tokens[pos];
                if !matches!(t.tok, Tok::Ident(_)) {
                    return Err(ParseError::syntax(
                        t.line,
                        t.col,
                        format!("expected parameter name, found '{}'", t.tok.text()),
                    ));
                }
                arity += 1;
                pos += 1;
                if tokens[pos].tok == Tok::Comma {
                    pos += 1;
                } else {
                    break;
                }
            }
        }
        expect(pos, &Tok::RParen)?;
        pos += 1;
        expect(pos, &Tok::LBrace)?;
        let mut depth = 0usize;
        loop {
            match tokens[pos].tok {
                Tok::LBrace => depth += 1,
                Tok::RBrace => {
                    depth -= 1;
                    if depth == 0 {
                        pos += 1;
                        break;
                    }
                }
                Tok::Eof => {
                    let t = &tokens[pos];
                    return Err(ParseError::syntax(t.line, t.col, "unterminated block"));
                }
                _ => {}
            }
            pos += 1;
        }
        sigs.push((name.clone(), arity));
    }
    Ok(sigs)
}

/// Definitely-bound slots on the current path; `diverges` marks paths that
/// have already returned.
#[derive(Clone)]
struct Bound {
    vars: BTreeSet<Slot>,
    diverges: bool,
}

impl Bound {
    fn join(a: Bound, b: Bound) -> Bound {
        match (a.diverges, b.diverges) {
            (true, true) => a,
            (true, false) => b,
            (false, true) => a,
            (false, false) => Bound {
                vars: a.vars.intersection(&b.vars).copied().collect(),
                diverges: false,
            },
        }
    }
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    signatures: &'a [(String, usize)],
    index: &'a BTreeMap<String, FuncId>,
    slots: Vec<String>,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn current(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn bump(&mut self) -> &'a Token {
        let t = &self.tokens[self.pos];
        if t.tok != Tok::Eof {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<&'a Token, ParseError> {
        let t = &self.tokens[self.pos];
        if t.tok == want {
            Ok(self.bump())
        } else {
            Err(ParseError::syntax(
                t.line,
                t.col,
                format!("expected '{}', found '{}'", want.text(), t.tok.text()),
            ))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, &'a Token), ParseError> {
        let t = &self.tokens[self.pos];
        match &t.tok {
            Tok::Ident(name) => {
                self.bump();
                Ok((name.clone(), t))
            }
            other => Err(ParseError::syntax(
                t.line,
                t.col,
                format!("expected {what}, found '{}'", other.text()),
            )),
        }
    }

    fn function(&mut self) -> Result<Function, ParseError> {
        self.expect(Tok::Fn)?;
        let (name, _) = self.ident("function name")?;
        self.expect(Tok::LParen)?;
        let mut params: Vec<String> = Vec::new();
        if self.peek() != &Tok::RParen {
            loop {
                let (param, tok) = self.ident("parameter name")?;
                if param == "ret" {
                    return Err(ParseError::semantic(
                        tok.line,
                        tok.col,
                        "parameter name 'ret' is reserved for return values",
                    ));
                }
                if params.contains(&param) {
                    return Err(ParseError::semantic(
                        tok.line,
                        tok.col,
                        format!("duplicate parameter {param} in {name}"),
                    ));
                }
                params.push(param);
                if self.peek() == &Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;

        self.slots = params.clone();
        let body_start = self.pos;
        let mut bound = Bound {
            vars: (0..params.len()).collect(),
            diverges: false,
        };
        let body = self.block(&mut bound)?;
        let body_hash = hash_tokens(&self.tokens[body_start..self.pos]);

        Ok(Function {
            name,
            params,
            slots: std::mem::take(&mut self.slots),
            body,
            body_hash,
        })
    }

    fn block(&mut self, bound: &mut Bound) -> Result<Vec<Stmt>, ParseError> {
        self.expect(Tok::LBrace)?;
        self.enter()?;
        let mut stmts = Vec::new();
        while self.peek() != &Tok::RBrace {
            if self.peek() == &Tok::Eof {
                let t = self.current();
                return Err(ParseError::syntax(t.line, t.col, "unterminated block"));
            }
            stmts.push(self.stmt(bound)?);
        }
        self.bump();
        self.depth -= 1;
        Ok(stmts)
    }

    fn stmt(&mut self, bound: &mut Bound) -> Result<Stmt, ParseError> {
        match self.peek().clone() {
            Tok::Let => {
                self.bump();
                let (name, _) = self.ident("variable name")?;
                self.expect(Tok::Assign)?;
                let value = self.expr(bound)?;
                self.expect(Tok::Semi)?;
                let slot = self.slot_for(&name);
                bound.vars.insert(slot);
                Ok(Stmt::Let(slot, value))
            }
            Tok::If => {
                self.bump();
                let cond = self.expr(bound)?;
                let mut then_bound = bound.clone();
                let then_block = self.block(&mut then_bound)?;
                let mut else_bound = bound.clone();
                let else_block = if self.peek() == &Tok::Else {
                    self.bump();
                    self.block(&mut else_bound)?
                } else {
                    Vec::new()
                };
                *bound = Bound::join(then_bound, else_bound);
                Ok(Stmt::If(cond, then_block, else_block))
            }
            Tok::While => {
                self.bump();
                let cond = self.expr(bound)?;
                let mut body_bound = bound.clone();
                let body = self.block(&mut body_bound)?;
                Ok(Stmt::While(cond, body))
            }
            Tok::Return => {
                self.bump();
                let value = self.expr(bound)?;
                self.expect(Tok::Semi)?;
                bound.diverges = true;
                Ok(Stmt::Return(value))
            }
            Tok::Ident(name) if self.tokens[self.pos + 1].tok == Tok::Assign => {
                let tok = self.bump();
                self.bump();
                let value = self.expr(bound)?;
                self.expect(Tok::Semi)?;
                match self.slots.iter().position(|s| *s == name) {
                    Some(slot) if bound.vars.contains(&slot) => Ok(Stmt::Assign(slot, value)),
                    _ => Err(ParseError::semantic(
                        tok.line,
                        tok.col,
                        format!("assignment to unbound variable {name}"),
                    )),
                }
            }
            _ => {
                let e = self.expr(bound)?;
                self.expect(Tok::Semi)?;
                Ok(Stmt::Expr(e))
            }
        }
    }

    fn slot_for(&mut self, name: &str) -> Slot {
        match self.slots.iter().position(|s| s == name) {
            Some(slot) => slot,
            None => {
                self.slots.push(name.to_string());
                self.slots.len() - 1
            }
        }
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.depth += 1;
        if self.depth > MAX_NESTING {
            let t = self.current();
            return Err(ParseError::syntax(t.line, t.col, "nesting too deep"));
        }
        Ok(())
    }

    fn expr(&mut self, bound: &Bound) -> Result<Expr, ParseError> {
        self.binary(bound, 0)
    }

    fn binary(&mut self, bound: &Bound, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.primary(bound)?;
        while let Some((op, prec)) = binop(self.peek()) {
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(bound, prec + 1)?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn primary(&mut self, bound: &Bound) -> Result<Expr, ParseError> {
        self.enter()?;
        let t = self.bump();
        let e = match &t.tok {
            Tok::Int(digits) => Expr::Lit(parse_int(digits, false, t)?),
            Tok::Minus => {
                let lit = self.bump();
                match &lit.tok {
                    Tok::Int(digits) => Expr::Lit(parse_int(digits, true, t)?),
                    other => {
                        return Err(ParseError::syntax(
                            lit.line,
                            lit.col,
                            format!("expected integer after '-', found '{}'", other.text()),
                        ))
                    }
                }
            }
            Tok::LParen => {
                let inner = self.expr(bound)?;
                self.expect(Tok::RParen)?;
                inner
            }
            Tok::Ident(name) if self.peek() == &Tok::LParen => {
                self.bump();
                let mut args = Vec::new();
                if self.peek() != &Tok::RParen {
                    loop {
                        args.push(self.expr(bound)?);
                        if self.peek() == &Tok::Comma {
                            self.bump();
                        } else {
                            break;
                        }
                    }
                }
                self.expect(Tok::RParen)?;
                let Some(&callee) = self.index.get(name) else {
                    return Err(ParseError::semantic(
                        t.line,
                        t.col,
                        format!("call to undefined function {name}"),
                    ));
                };
                let arity = self.signatures[callee].1;
                if args.len() != arity {
                    return Err(ParseError::semantic(
                        t.line,
                        t.col,
                        format!("{name} expects {arity} argument(s), got {}", args.len()),
                    ));
                }
                Expr::Call { callee, args }
            }
            Tok::Ident(name) => match self.slots.iter().position(|s| s == name) {
                Some(slot) if bound.vars.contains(&slot) => Expr::Var(slot),
                _ => {
                    return Err(ParseError::semantic(
                        t.line,
                        t.col,
                        format!("unbound variable {name}"),
                    ))
                }
            },
            other => {
                return Err(ParseError::syntax(
                    t.line,
                    t.col,
                    format!("expected expression, found '{}'", other.text()),
                ))
            }
        };
        self.depth -= 1;
        Ok(e)
    }
}

fn binop(tok: &Tok) -> Option<(BinOp, u8)> {
    Some(match tok {
        Tok::Or => (BinOp::Or, 1),
        Tok::And => (BinOp::And, 2),
        Tok::Lt => (BinOp::Lt, 3),
        Tok::Le => (BinOp::Le, 3),
        Tok::EqEq => (BinOp::Eq, 3),
        Tok::Ne => (BinOp::Ne, 3),
        Tok::Ge => (BinOp::Ge, 3),
        Tok::Gt => (BinOp::Gt, 3),
        Tok::Plus => (BinOp::Add, 4),
        Tok::Minus => (BinOp::Sub, 4),
        Tok::Star => (BinOp::Mul, 5),
        Tok::Slash => (BinOp::Div, 5),
        Tok::Percent => (BinOp::Mod, 5),
        _ => return None,
    })
}

fn parse_int(digits: &str, negative: bool, at: &Token) -> Result<i64, ParseError> {
    let text = if negative {
        format!("-{digits}")
    } else {
        digits.to_string()
    };
    text.parse::<i64>().map_err(|_| {
        ParseError::syntax(at.line, at.col, format!("integer literal {text} out of range"))
    })
}

fn hash_tokens(tokens: &[Token]) -> String {
    let normalized = tokens
        .iter()
        .map(|t| t.tok.text())
        .collect::<Vec<_>>()
        .join(" ");
    let digest = Sha256::digest(normalized.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
