//! State predicates used as reward measures.
//!
//! ```text
//! expr  := and ("or" and)*
//! and   := unary ("and" unary)*
//! unary := "not" unary | "(" expr ")" | "true" | "false"
//!        | "state" "(" path? ")" "in" "{" Name ("," Name)* "}"
//!        | "mode"  "(" path? ")" ("==" | "!=") Name
//! ```
//!
//! A path is a dotted instance path; an empty path or the root's type name
//! denotes the root. State names may be aliases.

use std::fmt;

use super::GlobalState;
use crate::binding::BoundModel;
use crate::error::{Error, Result};
use crate::lexer::{tokenize, Cursor, Origin, Tok};

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureExpr {
    Const(bool),
    State { path: String, names: Vec<String> },
    Mode { path: String, mode: String, equal: bool },
    Not(Box<MeasureExpr>),
    And(Box<MeasureExpr>, Box<MeasureExpr>),
    Or(Box<MeasureExpr>, Box<MeasureExpr>),
}

impl fmt::Display for MeasureExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureExpr::Const(b) => write!(f, "{b}"),
            MeasureExpr::State { path, names } => write!(f, "state({path}) in {{{}}}", names.join(", ")),
            MeasureExpr::Mode { path, mode, equal } => {
                write!(f, "mode({path}) {} {mode}", if *equal { "==" } else { "!=" })
            }
            MeasureExpr::Not(e) => write!(f, "not ({e})"),
            MeasureExpr::And(a, b) => write!(f, "({a}) and ({b})"),
            MeasureExpr::Or(a, b) => write!(f, "({a}) or ({b})"),
        }
    }
}

/// A parsed, not yet resolved, measure.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub expr: MeasureExpr,
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.fmt(f)
    }
}

pub fn parse_measure(text: &str) -> Result<Measure> {
    let wrap = |e: Error| Error::Measure(e.to_string());
    let mut c = Cursor::new(tokenize(text, &Origin::file("<measure>")).map_err(wrap)?);
    if c.at_eof() {
        return Err(Error::Measure("empty measure".into()));
    }
    let expr = m_or(&mut c).map_err(wrap)?;
    if !c.at_eof() {
        return Err(wrap(c.unexpected::<()>("end of measure").unwrap_err()));
    }
    Ok(Measure { expr })
}

fn m_or(c: &mut Cursor) -> Result<MeasureExpr> {
    let mut lhs = m_and(c)?;
    while c.eat_keyword("or") {
        lhs = MeasureExpr::Or(Box::new(lhs), Box::new(m_and(c)?));
    }
    Ok(lhs)
}

fn m_and(c: &mut Cursor) -> Result<MeasureExpr> {
    let mut lhs = m_unary(c)?;
    while c.eat_keyword("and") {
        lhs = MeasureExpr::And(Box::new(lhs), Box::new(m_unary(c)?));
    }
    Ok(lhs)
}

fn path(c: &mut Cursor) -> Result<String> {
    c.expect(&Tok::LParen)?;
    let p = if matches!(c.peek(), Tok::RParen) { String::new() } else { c.dotted()?.0 };
    c.expect(&Tok::RParen)?;
    Ok(p)
}

fn m_unary(c: &mut Cursor) -> Result<MeasureExpr> {
    if c.eat_keyword("not") {
        return Ok(MeasureExpr::Not(Box::new(m_unary(c)?)));
    }
    if c.eat(&Tok::LParen) {
        let e = m_or(c)?;
        c.expect(&Tok::RParen)?;
        return Ok(e);
    }
    if c.eat_keyword("true") {
        return Ok(MeasureExpr::Const(true));
    }
    if c.eat_keyword("false") {
        return Ok(MeasureExpr::Const(false));
    }
    if c.eat_keyword("state") {
        let path = path(c)?;
        c.expect_keyword("in")?;
        c.expect(&Tok::LBrace)?;
        let mut names = vec![c.ident()?.0];
        while c.eat(&Tok::Comma) {
            names.push(c.ident()?.0);
        }
        c.expect(&Tok::RBrace)?;
        return Ok(MeasureExpr::State { path, names });
    }
    if c.eat_keyword("mode") {
        let path = path(c)?;
        let equal = if c.eat(&Tok::EqEq) {
            true
        } else if c.eat(&Tok::NotEq) {
            false
        } else {
            return c.unexpected("`==` or `!=`");
        };
        let mode = c.ident()?.0;
        return Ok(MeasureExpr::Mode { path, mode, equal });
    }
    c.unexpected("measure term")
}

#[derive(Debug, Clone, PartialEq)]
enum Resolved {
    Const(bool),
    /// Membership mask over the states of an error instance.
    State { error: usize, mask: Vec<bool> },
    Mode { owner: usize, mode: usize, equal: bool },
    Not(Box<Resolved>),
    And(Box<Resolved>, Box<Resolved>),
    Or(Box<Resolved>, Box<Resolved>),
}

/// A measure bound to the indices of a particular model.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedMeasure {
    root: Resolved,
    pub text: String,
}

impl Measure {
    pub fn resolve(&self, bound: &BoundModel) -> Result<ResolvedMeasure> {
        Ok(ResolvedMeasure { root: resolve(&self.expr, bound)?, text: self.to_string() })
    }
}

fn resolve(e: &MeasureExpr, bound: &BoundModel) -> Result<Resolved> {
    let im = &bound.instances;
    let find = |path: &str| im.find(path).ok_or_else(|| Error::Measure(format!("no instance `{path}`")));
    Ok(match e {
        MeasureExpr::Const(b) => Resolved::Const(*b),
        MeasureExpr::State { path, names } => {
            let inst = find(path)?;
            let error = bound.error_of[inst]
                .ok_or_else(|| Error::Measure(format!("`{path}` has no error model")))?;
            let model = &bound.errors[error].model;
            let mut mask = vec![false; model.states.len()];
            for n in names {
                let states = model
                    .expand(n)
                    .ok_or_else(|| Error::Measure(format!("`{n}` is not a state or alias of `{}`", model.name)))?;
                for s in states {
                    mask[s] = true;
                }
            }
            Resolved::State { error, mask }
        }
        MeasureExpr::Mode { path, mode, equal } => {
            let inst = find(path)?;
            let owner = im
                .mode_owner_of(inst)
                .ok_or_else(|| Error::Measure(format!("`{path}` has no modes")))?;
            let m = im.mode_owners[owner]
                .mode_index(mode)
                .ok_or_else(|| Error::Measure(format!("`{path}` has no mode `{mode}`")))?;
            Resolved::Mode { owner, mode: m, equal: *equal }
        }
        MeasureExpr::Not(a) => Resolved::Not(Box::new(resolve(a, bound)?)),
        MeasureExpr::And(a, b) => Resolved::And(Box::new(resolve(a, bound)?), Box::new(resolve(b, bound)?)),
        MeasureExpr::Or(a, b) => Resolved::Or(Box::new(resolve(a, bound)?), Box::new(resolve(b, bound)?)),
    })
}

fn eval(r: &Resolved, g: &GlobalState) -> bool {
    match r {
        Resolved::Const(b) => *b,
        Resolved::State { error, mask } => mask[g.error(*error)],
        Resolved::Mode { owner, mode, equal } => (g.mode(*owner) == *mode) == *equal,
        Resolved::Not(a) => !eval(a, g),
        Resolved::And(a, b) => eval(a, g) && eval(b, g),
        Resolved::Or(a, b) => eval(a, g) || eval(b, g),
    }
}

/// Whether the predicate holds in a global state.
pub fn eval_measure_predicate(m: &ResolvedMeasure, g: &GlobalState) -> bool {
    eval(&m.root, g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_forms() {
        let m = parse_measure("state(A.B) in {Failed, Error_Free} and not mode() == Nominal or true").unwrap();
        assert!(matches!(m.expr, MeasureExpr::Or(_, _)));
        let m = parse_measure("mode(Sys) != x").unwrap();
        assert_eq!(m.expr, MeasureExpr::Mode { path: "Sys".into(), mode: "x".into(), equal: false });
    }

    #[test]
    fn display_reparses() {
        let m = parse_measure("not (state(a) in {X} or false) and mode(b.c) == M").unwrap();
        assert_eq!(parse_measure(&m.to_string()).unwrap(), m);
    }

    #[test]
    fn rejects_garbage() {
        for bad in ["", "state(a) in {}", "mode(a) = M", "x", "true true"] {
            assert!(matches!(parse_measure(bad), Err(Error::Measure(_))), "{bad}");
        }
    }
}
