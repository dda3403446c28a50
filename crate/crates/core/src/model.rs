//! Declarations of the AADL subset: component types, implementations, ports,
//! connections, mode automata, property associations and raw annex text.
//!
//! Identifiers keep the spelling they were written with, but every lookup is
//! case-insensitive, as in AADL.

use std::fmt::{self, Write as _};

use crate::lexer::SourceSpan;

/// Case-insensitive identifier comparison.
pub fn same_name(a: &str, b: &str) -> bool {
    a.eq_ignore_ascii_case(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ComponentCategory {
    Thread,
    System,
    Processor,
    Bus,
    Device,
}

impl ComponentCategory {
    pub fn from_keyword(word: &str) -> Option<Self> {
        match word.to_ascii_lowercase().as_str() {
            "thread" => Some(Self::Thread),
            "system" => Some(Self::System),
            "processor" => Some(Self::Processor),
            "bus" => Some(Self::Bus),
            "device" => Some(Self::Device),
            _ => None,
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Self::Thread => "thread",
            Self::System => "system",
            Self::Processor => "processor",
            Self::Bus => "bus",
            Self::Device => "device",
        }
    }

    /// Execution platform categories, the only legal binding targets.
    pub fn is_platform(self) -> bool {
        matches!(self, Self::Processor | Self::Bus | Self::Device)
    }
}

impl fmt::Display for ComponentCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    In,
    Out,
    InOut,
}

impl Direction {
    pub fn can_receive(self) -> bool {
        matches!(self, Direction::In | Direction::InOut)
    }

    pub fn can_send(self) -> bool {
        matches!(self, Direction::Out | Direction::InOut)
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::In => "in",
            Direction::Out => "out",
            Direction::InOut => "in out",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PortKind {
    Event,
    Data,
    EventData,
}

impl PortKind {
    pub fn carries_events(self) -> bool {
        matches!(self, PortKind::Event | PortKind::EventData)
    }
}

impl fmt::Display for PortKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PortKind::Event => "event port",
            PortKind::Data => "data port",
            PortKind::EventData => "event data port",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Port {
    pub name: String,
    pub direction: Direction,
    pub kind: PortKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentType {
    pub name: String,
    pub category: ComponentCategory,
    pub features: Vec<Port>,
    pub span: SourceSpan,
}

impl ComponentType {
    pub fn feature(&self, name: &str) -> Option<&Port> {
        self.features.iter().find(|p| same_name(&p.name, name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subcomponent {
    pub name: String,
    pub category: ComponentCategory,
    /// `type.impl` reference.
    pub classifier: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub label: Option<String>,
    pub kind: PortKind,
    /// `port` for an own feature, `sub.port` for a subcomponent feature.
    pub source: String,
    pub destination: String,
    /// Empty means active in every mode.
    pub in_modes: Vec<String>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeDecl {
    pub name: String,
    pub initial: bool,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransitionDecl {
    pub label: Option<String>,
    pub source: String,
    /// Endpoint paths: `sub.port`, an own port, or `self.<local event>`.
    pub triggers: Vec<String>,
    pub target: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModeAutomaton {
    pub modes: Vec<ModeDecl>,
    pub transitions: Vec<ModeTransitionDecl>,
}

impl ModeAutomaton {
    pub fn mode_index(&self, name: &str) -> Option<usize> {
        self.modes.iter().position(|m| same_name(&m.name, name))
    }

    pub fn initial_modes(&self) -> impl Iterator<Item = &ModeDecl> {
        self.modes.iter().filter(|m| m.initial)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PropertyValue {
    Reference(String),
    Number(f64),
    Name(String),
}

impl fmt::Display for PropertyValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropertyValue::Reference(r) => write!(f, "reference ({r})"),
            PropertyValue::Number(n) => write!(f, "{n}"),
            PropertyValue::Name(n) => f.write_str(n),
        }
    }
}

pub const PROCESSOR_BINDING: &str = "Actual_Processor_Binding";
pub const CONNECTION_BINDING: &str = "Actual_Connection_Binding";

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyAssociation {
    pub name: String,
    pub value: PropertyValue,
    pub applies_to: Option<String>,
    pub span: SourceSpan,
}

/// Error_Model annex subclause captured verbatim; interpreted later by
/// [`crate::annex`].
#[derive(Debug, Clone, PartialEq)]
pub struct RawAnnex {
    pub owner: String,
    pub text: String,
    /// Position of the first character after `{**`.
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentImplementation {
    pub category: ComponentCategory,
    /// Full `type.impl` name.
    pub name: String,
    pub subcomponents: Vec<Subcomponent>,
    pub connections: Vec<Connection>,
    pub modes: Option<ModeAutomaton>,
    pub properties: Vec<PropertyAssociation>,
    pub annex: Option<RawAnnex>,
    pub span: SourceSpan,
}

impl ComponentImplementation {
    pub fn new(category: ComponentCategory, name: impl Into<String>) -> Self {
        ComponentImplementation {
            category,
            name: name.into(),
            subcomponents: Vec::new(),
            connections: Vec::new(),
            modes: None,
            properties: Vec::new(),
            annex: None,
            span: SourceSpan::generated(),
        }
    }

    pub fn type_name(&self) -> &str {
        self.name.rsplit_once('.').map_or(self.name.as_str(), |(t, _)| t)
    }

    pub fn subcomponent(&self, name: &str) -> Option<&Subcomponent> {
        self.subcomponents.iter().find(|s| same_name(&s.name, name))
    }
}

/// The syntactic universe of a model: every parsed type and implementation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DeclarationSet {
    pub types: Vec<ComponentType>,
    pub implementations: Vec<ComponentImplementation>,
}

impl DeclarationSet {
    pub fn is_empty(&self) -> bool {
        self.types.is_empty() && self.implementations.is_empty()
    }

    pub fn component_type(&self, name: &str) -> Option<&ComponentType> {
        self.types.iter().find(|t| same_name(&t.name, name))
    }

    pub fn implementation(&self, name: &str) -> Option<&ComponentImplementation> {
        self.implementations.iter().find(|i| same_name(&i.name, name))
    }

    pub fn merge(&mut self, other: DeclarationSet) {
        self.types.extend(other.types);
        self.implementations.extend(other.implementations);
    }

    /// System implementations never used as a subcomponent: candidate roots.
    pub fn root_candidates(&self) -> Vec<&ComponentImplementation> {
        self.implementations
            .iter()
            .filter(|i| i.category == ComponentCategory::System)
            .filter(|i| {
                !self
                    .implementations
                    .iter()
                    .flat_map(|o| o.subcomponents.iter())
                    .any(|s| same_name(&s.classifier, &i.name))
            })
            .collect()
    }
}

fn write_name_list(out: &mut String, names: &[String]) {
    for (i, n) in names.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(n);
    }
}

/// Renders declarations as `.aadl` text that parses back to an equal set.
impl fmt::Display for DeclarationSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::new();
        for t in &self.types {
            let _ = writeln!(out, "{} {}", t.category, t.name);
            if !t.features.is_empty() {
                out.push_str("features\n");
                for p in &t.features {
                    let _ = writeln!(out, "  {}: {} {};", p.name, p.direction, p.kind);
                }
            }
            let _ = writeln!(out, "end {};\n", t.name);
        }
        for imp in &self.implementations {
            let _ = writeln!(out, "{} implementation {}", imp.category, imp.name);
            if !imp.subcomponents.is_empty() {
                out.push_str("subcomponents\n");
                for s in &imp.subcomponents {
                    let _ = writeln!(out, "  {}: {} {};", s.name, s.category, s.classifier);
                }
            }
            if !imp.connections.is_empty() {
                out.push_str("connections\n");
                for c in &imp.connections {
                    out.push_str("  ");
                    if let Some(l) = &c.label {
                        let _ = write!(out, "{l}: ");
                    }
                    let _ = write!(out, "{} {} -> {}", c.kind, c.source, c.destination);
                    if !c.in_modes.is_empty() {
                        out.push_str(" in modes (");
                        write_name_list(&mut out, &c.in_modes);
                        out.push(')');
                    }
                    out.push_str(";\n");
                }
            }
            if let Some(m) = &imp.modes {
                out.push_str("modes\n");
                for d in &m.modes {
                    let _ = writeln!(out, "  {}: {}mode;", d.name, if d.initial { "initial " } else { "" });
                }
                for t in &m.transitions {
                    out.push_str("  ");
                    if let Some(l) = &t.label {
                        let _ = write!(out, "{l}: ");
                    }
                    let _ = write!(out, "{} -[", t.source);
                    write_name_list(&mut out, &t.triggers);
                    let _ = writeln!(out, "]-> {};", t.target);
                }
            }
            if !imp.properties.is_empty() {
                out.push_str("properties\n");
                for p in &imp.properties {
                    let _ = write!(out, "  {} => {}", p.name, p.value);
                    if let Some(a) = &p.applies_to {
                        let _ = write!(out, " applies to {a}");
                    }
                    out.push_str(";\n");
                }
            }
            if let Some(a) = &imp.annex {
                let _ = writeln!(out, "annex Error_Model {{**{}**}};", a.text);
            }
            let _ = writeln!(out, "end {};\n", imp.name);
        }
        f.write_str(&out)
    }
}
