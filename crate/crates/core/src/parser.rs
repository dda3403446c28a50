//! Recursive-descent parser for the AADL subset.
//!
//! The first syntax error aborts the parse; no recovery is attempted.

use crate::error::Result;
use crate::lexer::{tokenize, Cursor, Origin, SourceSpan, Tok};
use crate::model::*;

const SECTION_KEYWORDS: [&str; 7] = ["features", "subcomponents", "connections", "modes", "properties", "annex", "end"];

/// Parses `.aadl` text. `file` only labels spans.
pub fn parse_aadl(text: &str, file: &str) -> Result<DeclarationSet> {
    let toks = tokenize(text, &Origin::file(file))?;
    let mut p = Parser { c: Cursor::new(toks) };
    let mut decls = DeclarationSet::default();
    while !p.c.at_eof() {
        p.declaration(&mut decls)?;
    }
    Ok(decls)
}

struct Parser {
    c: Cursor,
}

impl Parser {
    fn at_section_keyword(&self) -> bool {
        SECTION_KEYWORDS.iter().any(|k| self.c.is_keyword(k))
    }

    fn declaration(&mut self, decls: &mut DeclarationSet) -> Result<()> {
        let (word, span) = self.c.ident()?;
        let Some(category) = ComponentCategory::from_keyword(&word) else {
            return Err(crate::Error::syntax(span, format!("unsupported component category `{word}`")));
        };
        if self.c.eat_keyword("implementation") {
            let imp = self.implementation(category, span)?;
            decls.implementations.push(imp);
        } else {
            let ty = self.component_type(category, span)?;
            decls.types.push(ty);
        }
        Ok(())
    }

    fn end_clause(&mut self, name: &str) -> Result<()> {
        self.c.expect_keyword("end")?;
        let (closing, span) = self.c.dotted()?;
        if !same_name(&closing, name) {
            return Err(crate::Error::syntax(span, format!("`end {closing}` does not close `{name}`")));
        }
        self.c.expect(&Tok::Semi)?;
        Ok(())
    }

    fn component_type(&mut self, category: ComponentCategory, span: SourceSpan) -> Result<ComponentType> {
        let (name, _) = self.c.ident()?;
        let mut features = Vec::new();
        while !self.c.is_keyword("end") {
            if self.c.eat_keyword("features") {
                while !self.at_section_keyword() {
                    self.port_declaration(&mut features)?;
                }
            } else {
                return self.c.unexpected("`features` or `end`");
            }
        }
        self.end_clause(&name)?;
        Ok(ComponentType { name, category, features, span })
    }

    fn ident_list(&mut self) -> Result<Vec<(String, SourceSpan)>> {
        let mut names = vec![self.c.ident()?];
        while self.c.eat(&Tok::Comma) {
            names.push(self.c.ident()?);
        }
        Ok(names)
    }

    fn port_kind(&mut self) -> Result<PortKind> {
        let kind = if self.c.eat_keyword("event") {
            if self.c.eat_keyword("data") {
                PortKind::EventData
            } else {
                PortKind::Event
            }
        } else if self.c.eat_keyword("data") {
            PortKind::Data
        } else {
            return self.c.unexpected("`event`, `data` or `event data`");
        };
        self.c.expect_keyword("port")?;
        Ok(kind)
    }

    fn port_declaration(&mut self, out: &mut Vec<Port>) -> Result<()> {
        let names = self.ident_list()?;
        self.c.expect(&Tok::Colon)?;
        let direction = if self.c.eat_keyword("in") {
            if self.c.eat_keyword("out") {
                Direction::InOut
            } else {
                Direction::In
            }
        } else if self.c.eat_keyword("out") {
            Direction::Out
        } else {
            return self.c.unexpected("port direction");
        };
        let kind = self.port_kind()?;
        self.c.expect(&Tok::Semi)?;
        out.extend(names.into_iter().map(|(name, span)| Port { name, direction, kind, span }));
        Ok(())
    }

    fn implementation(&mut self, category: ComponentCategory, span: SourceSpan) -> Result<ComponentImplementation> {
        let (name, name_span) = self.c.dotted()?;
        if !name.contains('.') {
            return Err(crate::Error::syntax(name_span, format!("implementation name `{name}` must have the form type.impl")));
        }
        let mut imp = ComponentImplementation::new(category, name);
        imp.span = span;
        loop {
            if self.c.is_keyword("end") {
                break;
            } else if self.c.eat_keyword("subcomponents") {
                while !self.at_section_keyword() {
                    let (sub_name, span) = self.c.ident()?;
                    self.c.expect(&Tok::Colon)?;
                    let (word, word_span) = self.c.ident()?;
                    let Some(category) = ComponentCategory::from_keyword(&word) else {
                        return Err(crate::Error::syntax(word_span, format!("unsupported component category `{word}`")));
                    };
                    let (classifier, _) = self.c.dotted()?;
                    self.c.expect(&Tok::Semi)?;
                    imp.subcomponents.push(Subcomponent { name: sub_name, category, classifier, span });
                }
            } else if self.c.eat_keyword("connections") {
                while !self.at_section_keyword() {
                    let conn = self.connection()?;
                    imp.connections.push(conn);
                }
            } else if self.c.eat_keyword("modes") {
                let automaton = imp.modes.get_or_insert_with(ModeAutomaton::default);
                while !SECTION_KEYWORDS.iter().any(|k| self.c.is_keyword(k)) {
                    Self::mode_item(&mut self.c, automaton)?;
                }
            } else if self.c.eat_keyword("properties") {
                while !self.at_section_keyword() {
                    let prop = self.property()?;
                    imp.properties.push(prop);
                }
            } else if self.c.is_keyword("annex") {
                let annex_span = self.c.bump().span;
                let (annex_name, _) = self.c.ident()?;
                if !same_name(&annex_name, "Error_Model") {
                    return Err(crate::Error::syntax(annex_span, format!("unsupported annex `{annex_name}`")));
                }
                let body_span = self.c.span();
                let Tok::AnnexBody(text) = self.c.peek().clone() else {
                    return self.c.unexpected("`{**`");
                };
                self.c.bump();
                self.c.expect(&Tok::Semi)?;
                if imp.annex.is_some() {
                    return Err(crate::Error::syntax(annex_span, "duplicate Error_Model annex"));
                }
                // body text starts three characters after `{**`
                let span = SourceSpan::new(body_span.file.clone(), body_span.line, body_span.column + 3);
                imp.annex = Some(RawAnnex { owner: imp.name.clone(), text, span });
            } else {
                return self.c.unexpected("implementation section or `end`");
            }
        }
        let name = imp.name.clone();
        self.end_clause(&name)?;
        Ok(imp)
    }

    fn endpoint(&mut self) -> Result<String> {
        Ok(self.c.dotted()?.0)
    }

    fn connection(&mut self) -> Result<Connection> {
        let span = self.c.span();
        let label = if matches!(self.c.peek(), Tok::Ident(_)) && matches!(self.c.peek_at(1), Tok::Colon) {
            let (l, _) = self.c.ident()?;
            self.c.bump();
            Some(l)
        } else {
            None
        };
        let kind = self.port_kind()?;
        let source = self.endpoint()?;
        self.c.expect(&Tok::Arrow)?;
        let destination = self.endpoint()?;
        let in_modes = if self.c.eat_keyword("in") {
            self.c.expect_keyword("modes")?;
            let parenthesized = self.c.eat(&Tok::LParen);
            let names = self.ident_list()?.into_iter().map(|(n, _)| n).collect();
            if parenthesized {
                self.c.expect(&Tok::RParen)?;
            }
            names
        } else {
            Vec::new()
        };
        self.c.expect(&Tok::Semi)?;
        Ok(Connection { label, kind, source, destination, in_modes, span })
    }

    fn mode_item(c: &mut Cursor, automaton: &mut ModeAutomaton) -> Result<()> {
        let span = c.span();
        let declares_modes = match c.peek_at(1) {
            Tok::Comma => true,
            Tok::Colon => c.is_keyword_at(2, "initial") || c.is_keyword_at(2, "mode"),
            _ => false,
        };
        if declares_modes {
            let mut names = vec![c.ident()?];
            while c.eat(&Tok::Comma) {
                names.push(c.ident()?);
            }
            c.expect(&Tok::Colon)?;
            let initial = c.eat_keyword("initial");
            c.expect_keyword("mode")?;
            c.expect(&Tok::Semi)?;
            automaton
                .modes
                .extend(names.into_iter().map(|(name, span)| ModeDecl { name, initial, span }));
            return Ok(());
        }
        let label = if matches!(c.peek_at(1), Tok::Colon) {
            let (l, _) = c.ident()?;
            c.bump();
            Some(l)
        } else {
            None
        };
        let (source, _) = c.ident()?;
        c.expect(&Tok::TransOpen)?;
        let mut triggers = vec![c.dotted()?.0];
        while c.eat(&Tok::Comma) {
            triggers.push(c.dotted()?.0);
        }
        c.expect(&Tok::RBracket)?;
        c.expect(&Tok::Arrow)?;
        let (target, _) = c.ident()?;
        c.expect(&Tok::Semi)?;
        automaton.transitions.push(ModeTransitionDecl { label, source, triggers, target, span });
        Ok(())
    }

    fn property(&mut self) -> Result<PropertyAssociation> {
        let span = self.c.span();
        let (name, _) = self.c.dotted()?;
        self.c.expect(&Tok::FatArrow)?;
        let value = if self.c.eat_keyword("reference") {
            let parenthesized = self.c.eat(&Tok::LParen);
            let (target, _) = self.c.dotted()?;
            if parenthesized {
                self.c.expect(&Tok::RParen)?;
            }
            PropertyValue::Reference(target)
        } else if let Tok::Number(n) = *self.c.peek() {
            self.c.bump();
            PropertyValue::Number(n)
        } else {
            PropertyValue::Name(self.c.dotted()?.0)
        };
        let applies_to = if self.c.eat_keyword("applies") {
            self.c.expect_keyword("to")?;
            Some(self.c.dotted()?.0)
        } else {
            None
        };
        self.c.expect(&Tok::Semi)?;
        Ok(PropertyAssociation { name, value, applies_to, span })
    }
}
