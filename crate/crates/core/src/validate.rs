//! Static checks over a declaration set.

use std::collections::BTreeSet;
use std::fmt;

use crate::annex::{parse_annex_syntax, AnnexContent, Occurrence, Subject};
use crate::errlib::{ErrorLibrary, TransitionTarget};
use crate::lexer::SourceSpan;
use crate::model::*;

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub span: SourceSpan,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.span, self.message)
    }
}

struct Checker<'a> {
    decls: &'a DeclarationSet,
    library: Option<&'a ErrorLibrary>,
    out: Vec<Diagnostic>,
}

impl Checker<'_> {
    fn report(&mut self, span: &SourceSpan, message: impl Into<String>) {
        self.out.push(Diagnostic { span: span.clone(), message: message.into() });
    }
}

/// Checks names, directions, mode automata and annex contents. An empty
/// result means the declarations are well formed.
pub fn validate(decls: &DeclarationSet) -> Vec<Diagnostic> {
    run(decls, None)
}

/// [`validate`] plus checks of annex contents against an error library.
pub fn validate_with_library(decls: &DeclarationSet, library: &ErrorLibrary) -> Vec<Diagnostic> {
    run(decls, Some(library))
}

fn run(decls: &DeclarationSet, library: Option<&ErrorLibrary>) -> Vec<Diagnostic> {
    let mut ck = Checker { decls, library, out: Vec::new() };
    let mut seen = BTreeSet::new();
    for t in &decls.types {
        if !seen.insert(t.name.to_ascii_lowercase()) {
            ck.report(&t.span, format!("component type `{}` declared twice", t.name));
        }
        let mut features = BTreeSet::new();
        for p in &t.features {
            if !features.insert(p.name.to_ascii_lowercase()) {
                ck.report(&p.span, format!("feature `{}` declared twice in `{}`", p.name, t.name));
            }
        }
    }
    let mut seen = BTreeSet::new();
    for imp in &decls.implementations {
        if !seen.insert(imp.name.to_ascii_lowercase()) {
            ck.report(&imp.span, format!("implementation `{}` declared twice", imp.name));
        }
        check_implementation(&mut ck, imp);
    }
    ck.out
}

fn check_implementation(ck: &mut Checker<'_>, imp: &ComponentImplementation) {
    let decls = ck.decls;
    let ty = match decls.component_type(imp.type_name()) {
        Some(t) if t.category == imp.category => Some(t),
        Some(t) => {
            ck.report(&imp.span, format!("`{}` is a {} type, implemented as {}", t.name, t.category, imp.category));
            None
        }
        None => {
            ck.report(&imp.span, format!("unknown component type `{}`", imp.type_name()));
            None
        }
    };
    if !imp.subcomponents.is_empty() && imp.category != ComponentCategory::System {
        ck.report(&imp.span, format!("a {} cannot have subcomponents", imp.category));
    }
    let mut names = BTreeSet::new();
    for sub in &imp.subcomponents {
        if !names.insert(sub.name.to_ascii_lowercase()) {
            ck.report(&sub.span, format!("subcomponent `{}` declared twice", sub.name));
        }
        match decls.implementation(&sub.classifier) {
            None => ck.report(&sub.span, format!("unknown implementation `{}`", sub.classifier)),
            Some(i) if i.category != sub.category => {
                ck.report(&sub.span, format!("`{}` is a {}, declared as {}", sub.classifier, i.category, sub.category))
            }
            Some(_) => {}
        }
    }

    // endpoint lookup: (port, is_own)
    let endpoint = |path: &str| -> Option<(&Port, bool)> {
        match path.split_once('.') {
            Some((sub, port)) => {
                let s = imp.subcomponent(sub)?;
                let si = decls.implementation(&s.classifier)?;
                let st = decls.component_type(si.type_name())?;
                st.feature(port).map(|p| (p, false))
            }
            None => ty?.feature(path).map(|p| (p, true)),
        }
    };

    let modes = imp.modes.as_ref();
    if let Some(m) = modes {
        if !matches!(imp.category, ComponentCategory::System | ComponentCategory::Thread) {
            ck.report(&imp.span, format!("modes are not allowed on a {}", imp.category));
        }
        let initial = m.initial_modes().count();
        if initial == 0 {
            ck.report(&imp.span, format!("`{}`: no initial mode", imp.name));
        } else if initial > 1 {
            ck.report(&imp.span, format!("`{}`: multiple initial modes", imp.name));
        }
        let mut mnames = BTreeSet::new();
        for d in &m.modes {
            if !mnames.insert(d.name.to_ascii_lowercase()) {
                ck.report(&d.span, format!("mode `{}` declared twice", d.name));
            }
        }
    }

    let mut labels = BTreeSet::new();
    for c in &imp.connections {
        if let Some(l) = &c.label {
            if !labels.insert(l.to_ascii_lowercase()) {
                ck.report(&c.span, format!("connection label `{l}` used twice"));
            }
        }
        let src = endpoint(&c.source);
        let dst = endpoint(&c.destination);
        match src {
            None => ck.report(&c.span, format!("dangling connection endpoint `{}`", c.source)),
            Some((p, own)) => {
                let ok = if own { p.direction.can_receive() } else { p.direction.can_send() };
                if !ok {
                    ck.report(&c.span, format!("`{}` cannot be a connection source", c.source));
                }
                if p.kind != c.kind {
                    ck.report(&c.span, format!("`{}` is an {}, connection is a {}", c.source, p.kind, c.kind));
                }
            }
        }
        match dst {
            None => ck.report(&c.span, format!("dangling connection endpoint `{}`", c.destination)),
            Some((p, own)) => {
                let ok = if own { p.direction.can_send() } else { p.direction.can_receive() };
                if !ok {
                    ck.report(&c.span, format!("`{}` cannot be a connection destination", c.destination));
                }
                if p.kind != c.kind {
                    ck.report(&c.span, format!("`{}` is an {}, connection is a {}", c.destination, p.kind, c.kind));
                }
            }
        }
        for m in &c.in_modes {
            if modes.and_then(|a| a.mode_index(m)).is_none() {
                ck.report(&c.span, format!("`in modes` names undeclared mode `{m}`"));
            }
        }
    }

    let annex = imp.annex.as_ref().map(|raw| (raw, parse_annex_syntax(raw)));
    let annex_content: Option<&AnnexContent> = match &annex {
        Some((raw, Err(e))) => {
            ck.report(&raw.span, e.to_string());
            None
        }
        Some((_, Ok(c))) => Some(c),
        None => None,
    };

    if let Some(m) = modes {
        let mut tlabels = BTreeSet::new();
        for t in &m.transitions {
            if let Some(l) = &t.label {
                if !tlabels.insert(l.to_ascii_lowercase()) {
                    ck.report(&t.span, format!("mode transition label `{l}` used twice"));
                }
            }
            for end in [&t.source, &t.target] {
                if m.mode_index(end).is_none() {
                    ck.report(&t.span, format!("mode transition names undeclared mode `{end}`"));
                }
            }
            for trig in &t.triggers {
                if trig.split_once('.').is_some_and(|(s, _)| s.eq_ignore_ascii_case("self")) {
                    continue;
                }
                match endpoint(trig) {
                    None => ck.report(&t.span, format!("unknown trigger port `{trig}`")),
                    Some((p, own)) => {
                        let dir_ok = if own { p.direction.can_receive() } else { p.direction.can_send() };
                        if !dir_ok || !p.kind.carries_events() {
                            ck.report(&t.span, format!("`{trig}` cannot trigger a mode transition"));
                        }
                    }
                }
            }
        }
        // determinism: transitions leaving the same mode must not share a
        // trigger unless Guard_Transition properties disambiguate them
        let guarded = |label: &Option<String>| {
            label.as_ref().is_some_and(|l| {
                annex_content.is_some_and(|a| a.guard_transitions.iter().any(|g| same_name(&g.target, l)))
            })
        };
        for (i, a) in m.transitions.iter().enumerate() {
            for b in &m.transitions[i + 1..] {
                if !same_name(&a.source, &b.source) {
                    continue;
                }
                let shared = a.triggers.iter().find(|x| b.triggers.iter().any(|y| same_name(x, y)));
                if let Some(trig) = shared {
                    if !(guarded(&a.label) && guarded(&b.label)) {
                        ck.report(
                            &b.span,
                            format!("nondeterministic mode automaton: two transitions leave `{}` on `{trig}`", a.source),
                        );
                    }
                }
            }
        }
    }

    for prop in &imp.properties {
        check_property(ck, imp, prop);
    }

    if let (Some((raw, _)), Some(content)) = (&annex, annex_content) {
        check_annex(ck, imp, ty, raw, content);
    }
}

fn resolve_relative<'a>(decls: &'a DeclarationSet, imp: &'a ComponentImplementation, path: &str) -> Option<&'a ComponentImplementation> {
    let mut cur = imp;
    for part in path.split('.') {
        let sub = cur.subcomponent(part)?;
        cur = decls.implementation(&sub.classifier)?;
    }
    Some(cur)
}

fn check_property(ck: &mut Checker<'_>, imp: &ComponentImplementation, prop: &PropertyAssociation) {
    let is_proc = same_name(&prop.name, PROCESSOR_BINDING);
    let is_conn = same_name(&prop.name, CONNECTION_BINDING);
    if !is_proc && !is_conn {
        ck.report(&prop.span, format!("unsupported property `{}`", prop.name));
        return;
    }
    let PropertyValue::Reference(target) = &prop.value else {
        ck.report(&prop.span, format!("`{}` expects a reference value", prop.name));
        return;
    };
    let Some(applies) = &prop.applies_to else {
        ck.report(&prop.span, format!("`{}` needs `applies to`", prop.name));
        return;
    };
    let wanted = if is_proc { ComponentCategory::Processor } else { ComponentCategory::Bus };
    match resolve_relative(ck.decls, imp, target) {
        None => ck.report(&prop.span, format!("binding target `{target}` does not exist")),
        Some(t) if t.category != wanted => {
            ck.report(&prop.span, format!("binding target `{target}` is a {}, expected {wanted}", t.category))
        }
        Some(_) => {}
    }
    if is_proc {
        match resolve_relative(ck.decls, imp, applies) {
            None => ck.report(&prop.span, format!("bound component `{applies}` does not exist")),
            Some(t) if t.category != ComponentCategory::Thread => {
                ck.report(&prop.span, format!("`{applies}` is a {}, only threads bind to processors", t.category))
            }
            Some(_) => {}
        }
    } else {
        let (owner, label) = match applies.rsplit_once('.') {
            Some((sub, label)) => (resolve_relative(ck.decls, imp, sub), label),
            None => (Some(imp), applies.as_str()),
        };
        let found = owner.is_some_and(|o| o.connections.iter().any(|c| c.label.as_deref().is_some_and(|l| same_name(l, label))));
        if !found {
            ck.report(&prop.span, format!("no connection labelled `{applies}`"));
        }
    }
}

fn check_annex(
    ck: &mut Checker<'_>,
    imp: &ComponentImplementation,
    ty: Option<&ComponentType>,
    raw: &RawAnnex,
    content: &AnnexContent,
) {
    for o in &content.occurrences {
        if !o.occurrence.in_range() {
            let what = match o.occurrence {
                Occurrence::Poisson(_) => "rate must be positive",
                Occurrence::Fixed(_) => "probability out of range",
            };
            ck.report(&o.span, format!("{what}: {}", o.occurrence));
        }
    }
    let modes = imp.modes.as_ref();
    let guards = content
        .guard_events
        .iter()
        .map(|g| (&g.expr, &g.span))
        .chain(content.guard_transitions.iter().map(|g| (&g.expr, &g.span)));
    for (expr, span) in guards {
        for atom in expr.atoms() {
            if let Subject::Port(p) = &atom.subject {
                match ty.and_then(|t| t.feature(p)) {
                    Some(port) if port.direction.can_receive() => {}
                    Some(_) => ck.report(span, format!("guard observes `{p}`, which is not an in port")),
                    None => ck.report(span, format!("guard observes unknown port `{p}`")),
                }
            }
        }
    }
    for g in &content.guard_events {
        let local = g.target.split_once('.').is_some_and(|(s, _)| s.eq_ignore_ascii_case("self"));
        if local {
            continue;
        }
        match ty.and_then(|t| t.feature(&g.target)) {
            Some(p) if p.direction.can_send() && p.kind.carries_events() => {}
            Some(_) => ck.report(&g.span, format!("Guard_Event target `{}` is not an out event port", g.target)),
            None => ck.report(&g.span, format!("Guard_Event target `{}` does not exist", g.target)),
        }
    }
    for g in &content.guard_transitions {
        let exists = modes.is_some_and(|m| m.transitions.iter().any(|t| t.label.as_deref().is_some_and(|l| same_name(l, &g.target))));
        if !exists {
            ck.report(&g.span, format!("Guard_Transition target `{}` is not a labelled mode transition", g.target));
        }
    }

    let Some(library) = ck.library else { return };
    let Some(model) = library.model(&content.model_ref) else {
        ck.report(&raw.span, format!("unknown error model implementation `{}`", content.model_ref));
        return;
    };
    for o in &content.occurrences {
        match o.occurrence {
            Occurrence::Poisson(_) => {
                if model.event_index(&o.target).is_none() {
                    ck.report(&o.span, format!("`{}` is not an event of `{}`", o.target, model.name));
                }
            }
            Occurrence::Fixed(_) => {
                let branch_target = model.state_index(&o.target).is_some_and(|s| {
                    model.transitions.iter().any(|t| matches!(&t.target, TransitionTarget::Branch(b) if b.iter().any(|(x, _)| *x == s)))
                });
                if !branch_target {
                    ck.report(&o.span, format!("`{}` is not a branch target of `{}`", o.target, model.name));
                }
            }
        }
    }
    let guards = content.guard_events.iter().map(|g| (&g.expr, &g.span)).chain(content.guard_transitions.iter().map(|g| (&g.expr, &g.span)));
    for (expr, span) in guards {
        for atom in expr.atoms() {
            if model.expand(&atom.name).is_none() {
                ck.report(span, format!("`{}` is neither a state nor an alias of `{}`", atom.name, model.name));
            }
        }
    }
}
