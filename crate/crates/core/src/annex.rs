//! Error_Model annex subclauses and guard expressions.

use std::fmt;

use crate::error::{Error, Result};
use crate::errlib::ErrorLibrary;
use crate::lexer::{tokenize, Cursor, Origin, SourceSpan, Tok};
use crate::model::RawAnnex;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Occurrence {
    /// Exponential rate, per hour.
    Poisson(f64),
    /// Branch probability.
    Fixed(f64),
}

impl Occurrence {
    pub fn in_range(self) -> bool {
        match self {
            Occurrence::Poisson(r) => r.is_finite() && r > 0.0,
            Occurrence::Fixed(p) => (0.0..=1.0).contains(&p),
        }
    }
}

impl fmt::Display for Occurrence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Occurrence::Poisson(r) => write!(f, "poisson {r:e}"),
            Occurrence::Fixed(p) => write!(f, "fixed {p}"),
        }
    }
}

/// Who an atom observes: the owning component itself or the peer behind one
/// of its ports.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Subject {
    Own,
    Port(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GuardAtom {
    pub subject: Subject,
    /// Error state or alias name.
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum GuardExpr {
    Atom(GuardAtom),
    Not(Box<GuardExpr>),
    And(Box<GuardExpr>, Box<GuardExpr>),
    Or(Box<GuardExpr>, Box<GuardExpr>),
}

impl GuardExpr {
    pub fn atoms(&self) -> Vec<&GuardAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms<'a>(&'a self, out: &mut Vec<&'a GuardAtom>) {
        match self {
            GuardExpr::Atom(a) => out.push(a),
            GuardExpr::Not(e) => e.collect_atoms(out),
            GuardExpr::And(a, b) | GuardExpr::Or(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Evaluates with an arbitrary atom valuation.
    pub fn eval_with(&self, atom: &mut impl FnMut(&GuardAtom) -> bool) -> bool {
        match self {
            GuardExpr::Atom(a) => atom(a),
            GuardExpr::Not(e) => !e.eval_with(atom),
            GuardExpr::And(a, b) => a.eval_with(atom) && b.eval_with(atom),
            GuardExpr::Or(a, b) => a.eval_with(atom) || b.eval_with(atom),
        }
    }
}

impl fmt::Display for GuardAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Subject::Own => write!(f, "self[{}]", self.name),
            Subject::Port(p) => write!(f, "{p}[{}]", self.name),
        }
    }
}

impl fmt::Display for GuardExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GuardExpr::Atom(a) => write!(f, "{a}"),
            GuardExpr::Not(e) => write!(f, "not {e}"),
            GuardExpr::And(a, b) => write!(f, "({a} and {b})"),
            GuardExpr::Or(a, b) => write!(f, "({a} or {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceOverride {
    pub occurrence: Occurrence,
    /// Event name (poisson) or branch target state name (fixed).
    pub target: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardEventDecl {
    pub expr: GuardExpr,
    /// Out port name or `self.<local event>`.
    pub target: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuardTransitionDecl {
    pub expr: GuardExpr,
    /// Label of a mode transition of the owning implementation.
    pub target: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnexContent {
    pub model_ref: String,
    pub occurrences: Vec<OccurrenceOverride>,
    pub guard_events: Vec<GuardEventDecl>,
    pub guard_transitions: Vec<GuardTransitionDecl>,
}

pub fn parse_guard_expr(text: &str) -> Result<GuardExpr> {
    let mut c = Cursor::new(tokenize(text, &Origin::file("<guard>"))?);
    if c.at_eof() {
        return c.error("empty guard expression");
    }
    let e = guard_or(&mut c)?;
    if !c.at_eof() {
        return c.unexpected("end of guard expression");
    }
    Ok(e)
}

fn guard_or(c: &mut Cursor) -> Result<GuardExpr> {
    let mut lhs = guard_and(c)?;
    while c.eat_keyword("or") {
        let rhs = guard_and(c)?;
        lhs = GuardExpr::Or(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn guard_and(c: &mut Cursor) -> Result<GuardExpr> {
    let mut lhs = guard_not(c)?;
    while c.eat_keyword("and") {
        let rhs = guard_not(c)?;
        lhs = GuardExpr::And(Box::new(lhs), Box::new(rhs));
    }
    Ok(lhs)
}

fn guard_not(c: &mut Cursor) -> Result<GuardExpr> {
    if c.eat_keyword("not") {
        return Ok(GuardExpr::Not(Box::new(guard_not(c)?)));
    }
    if c.eat(&Tok::LParen) {
        let e = guard_or(c)?;
        c.expect(&Tok::RParen)?;
        return Ok(e);
    }
    let (subject, _) = c.ident()?;
    c.expect(&Tok::LBracket)?;
    let (name, _) = c.ident()?;
    c.expect(&Tok::RBracket)?;
    let subject = if subject.eq_ignore_ascii_case("self") { Subject::Own } else { Subject::Port(subject) };
    Ok(GuardExpr::Atom(GuardAtom { subject, name }))
}

/// Parses an annex body without consulting any error library.
pub fn parse_annex_syntax(raw: &RawAnnex) -> Result<AnnexContent> {
    let origin = Origin { file: raw.span.file.clone(), line: raw.span.line, column: raw.span.column };
    let mut c = Cursor::new(tokenize(&raw.text, &origin)?);
    let mut model_ref = None;
    let mut content = AnnexContent {
        model_ref: String::new(),
        occurrences: Vec::new(),
        guard_events: Vec::new(),
        guard_transitions: Vec::new(),
    };
    while !c.at_eof() {
        let (prop, span) = c.ident()?;
        c.expect(&Tok::FatArrow)?;
        match prop.to_ascii_lowercase().as_str() {
            "model" => {
                if model_ref.is_some() {
                    return Err(Error::syntax(span, "duplicate `Model` property"));
                }
                model_ref = Some(c.dotted()?.0);
            }
            "occurrence" => {
                let occurrence = if c.eat_keyword("poisson") {
                    Occurrence::Poisson(c.number()?)
                } else if c.eat_keyword("fixed") {
                    Occurrence::Fixed(c.number()?)
                } else {
                    return c.unexpected("`poisson` or `fixed`");
                };
                c.expect_keyword("applies")?;
                c.expect_keyword("to")?;
                // `applies to error Fail`: the `error` keyword is noise
                if c.is_keyword("error") && matches!(c.peek_at(1), Tok::Ident(_)) {
                    c.bump();
                }
                let (target, _) = c.ident()?;
                content.occurrences.push(OccurrenceOverride { occurrence, target, span: span.clone() });
            }
            "guard_event" | "guard_transition" => {
                let expr = guard_or(&mut c)?;
                c.expect_keyword("applies")?;
                c.expect_keyword("to")?;
                let (target, _) = c.dotted()?;
                if prop.eq_ignore_ascii_case("guard_event") {
                    content.guard_events.push(GuardEventDecl { expr, target, span: span.clone() });
                } else {
                    content.guard_transitions.push(GuardTransitionDecl { expr, target, span: span.clone() });
                }
            }
            _ => return Err(Error::syntax(span, format!("unsupported annex property `{prop}`"))),
        }
        c.expect(&Tok::Semi)?;
    }
    content.model_ref = model_ref.ok_or_else(|| Error::syntax(raw.span.clone(), "annex lacks a `Model` property"))?;
    Ok(content)
}

/// Parses an annex body and checks its model reference against `library`.
pub fn parse_error_annex(raw: &RawAnnex, library: &ErrorLibrary) -> Result<AnnexContent> {
    let content = parse_annex_syntax(raw)?;
    if library.model(&content.model_ref).is_none() {
        return Err(Error::Binding(format!(
            "{}: unknown error model implementation `{}`",
            raw.owner, content.model_ref
        )));
    }
    Ok(content)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(subject: &str, name: &str) -> GuardExpr {
        let subject = if subject == "self" { Subject::Own } else { Subject::Port(subject.into()) };
        GuardExpr::Atom(GuardAtom { subject, name: name.into() })
    }

    #[test]
    fn single_atom() {
        assert_eq!(parse_guard_expr("self[Error_Free]").unwrap(), atom("self", "Error_Free"));
    }

    #[test]
    fn conjunction_of_three() {
        let e = parse_guard_expr("fromC1[FailedVisible] and fromC2[Error_Free] and self[Error_Free]").unwrap();
        assert_eq!(e.atoms().len(), 3);
        assert!(matches!(e, GuardExpr::And(..)));
    }

    #[test]
    fn precedence_not_and_or() {
        let e = parse_guard_expr("a[X] or b[Y] and not c[Z]").unwrap();
        let expected = GuardExpr::Or(
            Box::new(atom("a", "X")),
            Box::new(GuardExpr::And(Box::new(atom("b", "Y")), Box::new(GuardExpr::Not(Box::new(atom("c", "Z")))))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn precedence_agrees_with_truth_table() {
        // brute force over the 8 valuations of a, b, c
        let e = parse_guard_expr("a[X] or b[Y] and not c[Z]").unwrap();
        for bits in 0..8u8 {
            let (a, b, c) = (bits & 1 != 0, bits & 2 != 0, bits & 4 != 0);
            let got = e.eval_with(&mut |at: &GuardAtom| match &at.subject {
                Subject::Port(p) if p == "a" => a,
                Subject::Port(p) if p == "b" => b,
                _ => c,
            });
            assert_eq!(got, a || (b && !c), "valuation {bits:03b}");
        }
    }

    #[test]
    fn parentheses_override_precedence() {
        let e = parse_guard_expr("(a[X] or b[Y]) and c[Z]").unwrap();
        assert!(matches!(e, GuardExpr::And(..)));
    }

    #[test]
    fn empty_and_malformed_guards() {
        assert!(parse_guard_expr("").is_err());
        assert!(parse_guard_expr("self[").is_err());
        assert!(parse_guard_expr("a[X] b[Y]").is_err());
    }

    fn raw(text: &str) -> RawAnnex {
        RawAnnex { owner: "t.i".into(), text: text.into(), span: SourceSpan::generated() }
    }

    #[test]
    fn model_only_annex() {
        let a = parse_annex_syntax(&raw("Model => independent.general;")).unwrap();
        assert_eq!(a.model_ref, "independent.general");
        assert!(a.occurrences.is_empty() && a.guard_events.is_empty() && a.guard_transitions.is_empty());
    }

    #[test]
    fn occurrence_with_error_keyword() {
        let a = parse_annex_syntax(&raw(
            "Model => m.i; Occurrence => fixed 0.9 applies to error\nFailedVisible; Occurrence => poisson 1e-3 applies to Fail;",
        ))
        .unwrap();
        assert_eq!(a.occurrences[0].occurrence, Occurrence::Fixed(0.9));
        assert_eq!(a.occurrences[0].target, "FailedVisible");
        assert_eq!(a.occurrences[1].occurrence, Occurrence::Poisson(1e-3));
        assert_eq!(a.occurrences[1].target, "Fail");
    }

    #[test]
    fn malformed_occurrence() {
        assert!(parse_annex_syntax(&raw("Model => m.i; Occurrence => weibull 2 applies to Fail;")).is_err());
        assert!(parse_annex_syntax(&raw("Model => m.i; Occurrence => poisson applies to Fail;")).is_err());
    }

    #[test]
    fn missing_model_is_rejected() {
        assert!(parse_annex_syntax(&raw("Occurrence => poisson 1 applies to Fail;")).is_err());
    }
}
