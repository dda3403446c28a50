//! Error model libraries (`.errlib` files).
//!
//! ```text
//! error model independent
//! features
//!   Error_Free: initial error state;
//!   Failed: error state;
//!   Fail: error event {Occurrence => poisson 1e-3};
//!   alias Down = Failed;
//! end independent;
//!
//! error model implementation independent.simple
//! transitions
//!   Error_Free -[Fail]-> Failed;
//!   Error_Free -[Glitch]-> (A with fixed 0.9, B with fixed 0.1);
//! end independent.simple;
//! ```

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lexer::{tokenize, Cursor, Origin, Tok};
use crate::model::same_name;

pub const DEFAULT_LIBRARY: &str = include_str!("../assets/default.errlib");

/// Tolerance on the sum of branch probabilities.
pub const BRANCH_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEvent {
    pub name: String,
    /// Default poisson rate per hour.
    pub default_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alias {
    pub name: String,
    pub states: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModelType {
    pub name: String,
    pub states: Vec<String>,
    pub initial: usize,
    pub events: Vec<ErrorEvent>,
    pub aliases: Vec<Alias>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TransitionTarget {
    State(usize),
    Branch(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTransition {
    pub source: usize,
    pub event: usize,
    pub target: TransitionTarget,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModelImpl {
    /// Full `type.impl` name.
    pub name: String,
    pub transitions: Vec<ErrorTransition>,
}

/// A type and one of its implementations merged into a single automaton.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub name: String,
    pub states: Vec<String>,
    pub initial: usize,
    pub events: Vec<ErrorEvent>,
    pub aliases: Vec<Alias>,
    pub transitions: Vec<ErrorTransition>,
}

impl ErrorModel {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| same_name(s, name))
    }

    pub fn event_index(&self, name: &str) -> Option<usize> {
        self.events.iter().position(|e| same_name(&e.name, name))
    }

    /// States named by `name`: the state itself, else the alias members.
    pub fn expand(&self, name: &str) -> Option<Vec<usize>> {
        if let Some(s) = self.state_index(name) {
            return Some(vec![s]);
        }
        self.aliases.iter().find(|a| same_name(&a.name, name)).map(|a| a.states.clone())
    }

    pub fn is_initial(&self, state: usize) -> bool {
        state == self.initial
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ErrorLibrary {
    pub types: Vec<ErrorModelType>,
    pub implementations: Vec<ErrorModelImpl>,
    models: Vec<Arc<ErrorModel>>,
}

impl ErrorLibrary {
    /// The bundled library shipping `independent.general`.
    pub fn bundled() -> Self {
        load_error_library(DEFAULT_LIBRARY, "default.errlib").expect("bundled library is valid")
    }

    pub fn model(&self, name: &str) -> Option<Arc<ErrorModel>> {
        self.models.iter().find(|m| same_name(&m.name, name)).cloned()
    }

    pub fn models(&self) -> impl Iterator<Item = &Arc<ErrorModel>> {
        self.models.iter()
    }

    pub fn merge(&mut self, other: ErrorLibrary) -> Result<()> {
        for t in &other.types {
            if self.types.iter().any(|x| same_name(&x.name, &t.name)) {
                return Err(Error::Library(format!("duplicate error model `{}`", t.name)));
            }
        }
        for i in &other.implementations {
            if self.implementations.iter().any(|x| same_name(&x.name, &i.name)) {
                return Err(Error::Library(format!("duplicate error model implementation `{}`", i.name)));
            }
        }
        self.types.extend(other.types);
        self.implementations.extend(other.implementations);
        self.models.extend(other.models);
        Ok(())
    }
}

struct RawType {
    name: String,
    states: Vec<(String, bool)>,
    events: Vec<ErrorEvent>,
    aliases: Vec<(String, Vec<String>)>,
}

enum RawTarget {
    State(String),
    Branch(Vec<(String, f64)>),
}

struct RawImpl {
    name: String,
    transitions: Vec<(String, String, RawTarget)>,
}

pub fn load_error_library(text: &str, file: &str) -> Result<ErrorLibrary> {
    let mut c = Cursor::new(tokenize(text, &Origin::file(file))?);
    let mut raw_types = Vec::new();
    let mut raw_impls = Vec::new();
    while !c.at_eof() {
        c.expect_keyword("error")?;
        c.expect_keyword("model")?;
        if c.eat_keyword("implementation") {
            raw_impls.push(parse_impl(&mut c)?);
        } else {
            raw_types.push(parse_type(&mut c)?);
        }
    }
    build_library(raw_types, raw_impls)
}

fn end_clause(c: &mut Cursor, name: &str) -> Result<()> {
    c.expect_keyword("end")?;
    let (closing, span) = c.dotted()?;
    if !same_name(&closing, name) {
        return Err(Error::syntax(span, format!("`end {closing}` does not close `{name}`")));
    }
    c.expect(&Tok::Semi)?;
    Ok(())
}

fn parse_type(c: &mut Cursor) -> Result<RawType> {
    let (name, _) = c.ident()?;
    let mut t = RawType { name, states: Vec::new(), events: Vec::new(), aliases: Vec::new() };
    if c.eat_keyword("features") {
        while !c.is_keyword("end") {
            if c.eat_keyword("alias") {
                let (alias, _) = c.ident()?;
                c.expect(&Tok::Eq)?;
                let mut members = vec![c.ident()?.0];
                while c.eat(&Tok::Pipe) {
                    members.push(c.ident()?.0);
                }
                c.expect(&Tok::Semi)?;
                t.aliases.push((alias, members));
                continue;
            }
            let mut names = vec![c.ident()?.0];
            while c.eat(&Tok::Comma) {
                names.push(c.ident()?.0);
            }
            c.expect(&Tok::Colon)?;
            let initial = c.eat_keyword("initial");
            c.expect_keyword("error")?;
            if c.eat_keyword("state") {
                t.states.extend(names.into_iter().map(|n| (n, initial)));
            } else if c.eat_keyword("event") {
                if initial {
                    return c.error("events cannot be initial");
                }
                let mut default_rate = None;
                if c.eat(&Tok::LBrace) {
                    c.expect_keyword("occurrence")?;
                    c.expect(&Tok::FatArrow)?;
                    c.expect_keyword("poisson")?;
                    default_rate = Some(c.number()?);
                    c.expect(&Tok::RBrace)?;
                }
                t.events.extend(names.into_iter().map(|name| ErrorEvent { name, default_rate }));
            } else {
                return c.unexpected("`state` or `event`");
            }
            c.expect(&Tok::Semi)?;
        }
    }
    let name = t.name.clone();
    end_clause(c, &name)?;
    Ok(t)
}

fn parse_impl(c: &mut Cursor) -> Result<RawImpl> {
    let (name, span) = c.dotted()?;
    if !name.contains('.') {
        return Err(Error::syntax(span, format!("implementation name `{name}` must have the form type.impl")));
    }
    let mut imp = RawImpl { name, transitions: Vec::new() };
    if c.eat_keyword("transitions") {
        while !c.is_keyword("end") {
            let (src, _) = c.ident()?;
            c.expect(&Tok::TransOpen)?;
            let (event, _) = c.ident()?;
            c.expect(&Tok::RBracket)?;
            c.expect(&Tok::Arrow)?;
            let target = if c.eat(&Tok::LParen) {
                let mut branches = Vec::new();
                loop {
                    let (state, _) = c.ident()?;
                    c.expect_keyword("with")?;
                    c.expect_keyword("fixed")?;
                    branches.push((state, c.number()?));
                    if !c.eat(&Tok::Comma) {
                        break;
                    }
                }
                c.expect(&Tok::RParen)?;
                RawTarget::Branch(branches)
            } else {
                RawTarget::State(c.ident()?.0)
            };
            c.expect(&Tok::Semi)?;
            imp.transitions.push((src, event, target));
        }
    }
    let name = imp.name.clone();
    end_clause(c, &name)?;
    Ok(imp)
}

fn build_library(raw_types: Vec<RawType>, raw_impls: Vec<RawImpl>) -> Result<ErrorLibrary> {
    let mut lib = ErrorLibrary::default();
    for rt in raw_types {
        if lib.types.iter().any(|t| same_name(&t.name, &rt.name)) {
            return Err(Error::Library(format!("duplicate error model `{}`", rt.name)));
        }
        let mut seen = BTreeSet::new();
        let all_names = rt
            .states
            .iter()
            .map(|(n, _)| n)
            .chain(rt.events.iter().map(|e| &e.name))
            .chain(rt.aliases.iter().map(|(n, _)| n));
        for n in all_names {
            if !seen.insert(n.to_ascii_lowercase()) {
                return Err(Error::Library(format!("{}: name `{n}` declared twice", rt.name)));
            }
        }
        let initials: Vec<usize> = rt.states.iter().enumerate().filter(|(_, (_, i))| *i).map(|(k, _)| k).collect();
        if initials.len() != 1 {
            return Err(Error::Library(format!(
                "{}: expected exactly one initial state, found {}",
                rt.name,
                initials.len()
            )));
        }
        for e in &rt.events {
            if let Some(r) = e.default_rate {
                if !(r.is_finite() && r > 0.0) {
                    return Err(Error::Library(format!("{}: rate of `{}` must be positive", rt.name, e.name)));
                }
            }
        }
        let states: Vec<String> = rt.states.into_iter().map(|(n, _)| n).collect();
        let mut aliases = Vec::new();
        for (name, members) in rt.aliases {
            let mut idx = Vec::new();
            for m in &members {
                let Some(k) = states.iter().position(|s| same_name(s, m)) else {
                    return Err(Error::Library(format!("{}: alias `{name}` names unknown state `{m}`", rt.name)));
                };
                idx.push(k);
            }
            aliases.push(Alias { name, states: idx });
        }
        lib.types.push(ErrorModelType { name: rt.name, states, initial: initials[0], events: rt.events, aliases });
    }

    for ri in raw_impls {
        if lib.implementations.iter().any(|i| same_name(&i.name, &ri.name)) {
            return Err(Error::Library(format!("duplicate error model implementation `{}`", ri.name)));
        }
        let type_name = ri.name.rsplit_once('.').map(|(t, _)| t).unwrap_or(&ri.name);
        let Some(ty) = lib.types.iter().find(|t| same_name(&t.name, type_name)) else {
            return Err(Error::Library(format!("{}: unknown error model `{type_name}`", ri.name)));
        };
        let state = |n: &str| {
            ty.states
                .iter()
                .position(|s| same_name(s, n))
                .ok_or_else(|| Error::Library(format!("{}: unknown state `{n}`", ri.name)))
        };
        let mut transitions: Vec<ErrorTransition> = Vec::new();
        for (src, ev, target) in &ri.transitions {
            let source = state(src)?;
            let event = ty
                .events
                .iter()
                .position(|e| same_name(&e.name, ev))
                .ok_or_else(|| Error::Library(format!("{}: unknown event `{ev}`", ri.name)))?;
            if transitions.iter().any(|t| t.source == source && t.event == event) {
                return Err(Error::Library(format!("{}: transition {src} -[{ev}]-> declared twice", ri.name)));
            }
            let target = match target {
                RawTarget::State(s) => TransitionTarget::State(state(s)?),
                RawTarget::Branch(list) => {
                    let mut branches = Vec::new();
                    for (s, p) in list {
                        if !(0.0..=1.0).contains(p) {
                            return Err(Error::Library(format!("{}: branch probability {p} out of range", ri.name)));
                        }
                        let k = state(s)?;
                        if branches.iter().any(|(b, _)| *b == k) {
                            return Err(Error::Library(format!("{}: branch target `{s}` repeated", ri.name)));
                        }
                        branches.push((k, *p));
                    }
                    let sum: f64 = branches.iter().map(|(_, p)| p).sum();
                    if (sum - 1.0).abs() > BRANCH_SUM_TOLERANCE {
                        return Err(Error::Library(format!(
                            "{}: branch of {src} -[{ev}]-> does not sum to 1 (sum {sum})",
                            ri.name
                        )));
                    }
                    TransitionTarget::Branch(branches)
                }
            };
            transitions.push(ErrorTransition { source, event, target });
        }
        lib.models.push(Arc::new(ErrorModel {
            name: ri.name.clone(),
            states: ty.states.clone(),
            initial: ty.initial,
            events: ty.events.clone(),
            aliases: ty.aliases.clone(),
            transitions: transitions.clone(),
        }));
        lib.implementations.push(ErrorModelImpl { name: ri.name, transitions });
    }
    Ok(lib)
}
