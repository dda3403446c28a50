//! Flattened instance model.
//!
//! Declared connections are chained into semantic connections that run from
//! an ultimate source port to an ultimate destination port, crossing system
//! boundaries. A semantic connection is active when every declared segment
//! along it is active in the current mode of the segment's owner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::*;

pub type InstanceId = usize;

#[derive(Debug, Clone, PartialEq)]
pub struct ComponentInstance {
    /// Hierarchical path below the root; the root itself has the empty path.
    pub path: String,
    pub name: String,
    pub category: ComponentCategory,
    pub implementation: String,
    pub parent: Option<InstanceId>,
    pub ports: Vec<Port>,
    pub annex: Option<RawAnnex>,
}

impl ComponentInstance {
    pub fn port(&self, name: &str) -> Option<&Port> {
        self.ports.iter().find(|p| same_name(&p.name, name))
    }

    /// Path for display: the root shows its type name.
    pub fn display_path(&self) -> &str {
        if self.path.is_empty() {
            &self.name
        } else {
            &self.path
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PortRef {
    pub instance: InstanceId,
    /// Spelling from the component type.
    pub port: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub owner: InstanceId,
    pub declaration: usize,
    pub label: Option<String>,
}

/// The owner (an index into [`InstanceModel::mode_owners`]) must be in one
/// of `modes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModeCondition {
    pub owner: usize,
    pub modes: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConnectionInstance {
    pub source: PortRef,
    pub destination: PortRef,
    pub kind: PortKind,
    /// Every port on the route, source first, destination last.
    pub route: Vec<PortRef>,
    pub segments: Vec<Segment>,
    pub conditions: Vec<ModeCondition>,
}

impl ConnectionInstance {
    pub fn is_active(&self, modes: &[usize]) -> bool {
        self.conditions.iter().all(|c| c.modes.contains(&modes[c.owner]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trigger {
    Port(PortRef),
    Local { instance: InstanceId, name: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTransitionInstance {
    pub label: Option<String>,
    pub source: usize,
    pub target: usize,
    pub triggers: Vec<Trigger>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeOwner {
    pub instance: InstanceId,
    pub modes: Vec<String>,
    pub initial: usize,
    pub transitions: Vec<ModeTransitionInstance>,
}

impl ModeOwner {
    pub fn mode_index(&self, name: &str) -> Option<usize> {
        self.modes.iter().position(|m| same_name(m, name))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceModel {
    pub root_implementation: String,
    /// Sorted lexicographically by path; index 0 is the root.
    pub instances: Vec<ComponentInstance>,
    pub connections: Vec<ConnectionInstance>,
    pub processor_bindings: BTreeMap<InstanceId, InstanceId>,
    /// Semantic connections that route over a bus.
    pub connection_bindings: BTreeMap<usize, InstanceId>,
    pub mode_owners: Vec<ModeOwner>,
}

impl InstanceModel {
    /// Looks an instance up by path. The empty path and the root's type name
    /// both denote the root.
    pub fn find(&self, path: &str) -> Option<InstanceId> {
        if let Some(i) = self.instances.iter().position(|i| same_name(&i.path, path)) {
            return Some(i);
        }
        same_name(&self.instances[0].name, path).then_some(0)
    }

    pub fn mode_owner_of(&self, instance: InstanceId) -> Option<usize> {
        self.mode_owners.iter().position(|o| o.instance == instance)
    }

    pub fn initial_modes(&self) -> Vec<usize> {
        self.mode_owners.iter().map(|o| o.initial).collect()
    }

    pub fn port_name(&self, p: &PortRef) -> String {
        let inst = &self.instances[p.instance];
        if inst.path.is_empty() {
            p.port.clone()
        } else {
            format!("{}.{}", inst.path, p.port)
        }
    }

    /// Connections active under a mode assignment (one mode per owner).
    pub fn active_connections(&self, modes: &[usize]) -> Result<Vec<usize>> {
        if modes.len() != self.mode_owners.len() {
            return Err(Error::Resolve(format!(
                "mode assignment covers {} owners, model has {}",
                modes.len(),
                self.mode_owners.len()
            )));
        }
        for (k, (m, owner)) in modes.iter().zip(&self.mode_owners).enumerate() {
            if *m >= owner.modes.len() {
                return Err(Error::Resolve(format!("mode index {m} out of range for owner {k}")));
            }
        }
        Ok((0..self.connections.len()).filter(|&c| self.connections[c].is_active(modes)).collect())
    }

    /// Stable line-oriented dump: one instance, connection, binding or mode
    /// item per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "root {}", self.root_implementation);
        for inst in &self.instances {
            let _ = writeln!(out, "instance {} {} {}", inst.display_path(), inst.category, inst.implementation);
        }
        for (k, c) in self.connections.iter().enumerate() {
            let _ = write!(out, "connection {k} {} -> {} {}", self.port_name(&c.source), self.port_name(&c.destination), c.kind);
            for cond in &c.conditions {
                let owner = &self.mode_owners[cond.owner];
                let names: Vec<&str> = cond.modes.iter().map(|&m| owner.modes[m].as_str()).collect();
                let _ = write!(out, " when {}:{{{}}}", self.instances[owner.instance].display_path(), names.join(","));
            }
            if let Some(bus) = self.connection_bindings.get(&k) {
                let _ = write!(out, " via {}", self.instances[*bus].display_path());
            }
            out.push('\n');
        }
        for (t, p) in &self.processor_bindings {
            let _ = writeln!(out, "binding {} -> {}", self.instances[*t].display_path(), self.instances[*p].display_path());
        }
        for owner in &self.mode_owners {
            let path = self.instances[owner.instance].display_path();
            let _ = writeln!(out, "modes {path} initial={} {{{}}}", owner.modes[owner.initial], owner.modes.join(","));
            for t in &owner.transitions {
                let trig: Vec<String> = t
                    .triggers
                    .iter()
                    .map(|tr| match tr {
                        Trigger::Port(p) => self.port_name(p),
                        Trigger::Local { name, .. } => format!("self.{name}"),
                    })
                    .collect();
                let _ = writeln!(out, "transition {path} {} -[{}]-> {}", owner.modes[t.source], trig.join(","), owner.modes[t.target]);
            }
        }
        out
    }
}

struct Edge {
    from: PortRef,
    to: PortRef,
    segment: Segment,
    condition: Option<ModeCondition>,
}

fn resolve_endpoint(instances: &[ComponentInstance], children: &[Vec<InstanceId>], owner: InstanceId, path: &str) -> Result<PortRef> {
    let (inst, port) = match path.split_once('.') {
        Some((sub, port)) => {
            let Some(&child) = children[owner].iter().find(|&&c| same_name(&instances[c].name, sub)) else {
                return Err(Error::Resolve(format!(
                    "{}: `{path}` names no subcomponent `{sub}`",
                    instances[owner].implementation
                )));
            };
            (child, port)
        }
        None => (owner, path),
    };
    let Some(p) = instances[inst].port(port) else {
        return Err(Error::Resolve(format!(
            "{}: dangling connection endpoint `{path}`",
            instances[owner].implementation
        )));
    };
    Ok(PortRef { instance: inst, port: p.name.clone() })
}

/// Flattens `root` into an instance model.
pub fn resolve_instance(decls: &DeclarationSet, root: &str) -> Result<InstanceModel> {
    let Some(root_impl) = decls.implementation(root) else {
        return Err(Error::Resolve(format!("unknown implementation `{root}`")));
    };
    if root_impl.category != ComponentCategory::System {
        return Err(Error::Resolve(format!("root `{root}` is not a system implementation")));
    }

    // instantiate the tree
    let mut raw: Vec<(ComponentInstance, &ComponentImplementation)> = Vec::new();
    let mut stack = vec![(String::new(), root_impl.type_name().to_string(), root_impl, vec![root_impl.name.clone()])];
    while let Some((path, name, imp, ancestry)) = stack.pop() {
        let Some(ty) = decls.component_type(imp.type_name()) else {
            return Err(Error::Resolve(format!("{}: unknown component type `{}`", imp.name, imp.type_name())));
        };
        for sub in imp.subcomponents.iter().rev() {
            let Some(sub_impl) = decls.implementation(&sub.classifier) else {
                return Err(Error::Resolve(format!("{}: unknown implementation `{}`", imp.name, sub.classifier)));
            };
            if ancestry.iter().any(|a| same_name(a, &sub_impl.name)) {
                return Err(Error::Resolve(format!("{}: recursive containment of `{}`", imp.name, sub_impl.name)));
            }
            let child_path = if path.is_empty() { sub.name.clone() } else { format!("{path}.{}", sub.name) };
            let mut anc = ancestry.clone();
            anc.push(sub_impl.name.clone());
            stack.push((child_path, sub.name.clone(), sub_impl, anc));
        }
        let inst = ComponentInstance {
            path,
            name,
            category: imp.category,
            implementation: imp.name.clone(),
            parent: None,
            ports: ty.features.clone(),
            annex: imp.annex.clone(),
        };
        raw.push((inst, imp));
    }
    raw.sort_by(|a, b| a.0.path.cmp(&b.0.path));
    let impls: Vec<&ComponentImplementation> = raw.iter().map(|(_, i)| *i).collect();
    let mut instances: Vec<ComponentInstance> = raw.into_iter().map(|(i, _)| i).collect();
    for k in 0..instances.len() {
        let path = instances[k].path.clone();
        instances[k].parent = match path.rsplit_once('.') {
            Some((parent, _)) => instances.iter().position(|i| i.path == parent),
            None if path.is_empty() => None,
            None => Some(0),
        };
    }
    let mut children: Vec<Vec<InstanceId>> = vec![Vec::new(); instances.len()];
    for (k, inst) in instances.iter().enumerate() {
        if let Some(p) = inst.parent {
            children[p].push(k);
        }
    }

    // mode owners
    let mut mode_owners = Vec::new();
    for (k, imp) in impls.iter().enumerate() {
        let Some(automaton) = &imp.modes else { continue };
        if !matches!(imp.category, ComponentCategory::System | ComponentCategory::Thread) {
            return Err(Error::Resolve(format!("{}: modes are only allowed on systems and threads", imp.name)));
        }
        let initial: Vec<usize> =
            automaton.modes.iter().enumerate().filter(|(_, m)| m.initial).map(|(i, _)| i).collect();
        if initial.len() != 1 {
            return Err(Error::Resolve(format!("{}: expected exactly one initial mode", imp.name)));
        }
        let mut transitions = Vec::new();
        for t in &automaton.transitions {
            let (Some(source), Some(target)) = (automaton.mode_index(&t.source), automaton.mode_index(&t.target)) else {
                return Err(Error::Resolve(format!("{}: transition names an undeclared mode", imp.name)));
            };
            let mut triggers = Vec::new();
            for trig in &t.triggers {
                let trigger = match trig.split_once('.') {
                    Some((s, name)) if s.eq_ignore_ascii_case("self") => Trigger::Local { instance: k, name: name.to_string() },
                    _ => Trigger::Port(resolve_endpoint(&instances, &children, k, trig)?),
                };
                triggers.push(trigger);
            }
            transitions.push(ModeTransitionInstance { label: t.label.clone(), source, target, triggers });
        }
        mode_owners.push(ModeOwner {
            instance: k,
            modes: automaton.modes.iter().map(|m| m.name.clone()).collect(),
            initial: initial[0],
            transitions,
        });
    }

    // declared connections become edges between port instances
    let mut edges = Vec::new();
    for (k, imp) in impls.iter().enumerate() {
        for (d, conn) in imp.connections.iter().enumerate() {
            let from = resolve_endpoint(&instances, &children, k, &conn.source)?;
            let to = resolve_endpoint(&instances, &children, k, &conn.destination)?;
            for end in [&from, &to] {
                let port = instances[end.instance].port(&end.port).expect("resolved");
                if port.kind != conn.kind {
                    return Err(Error::Resolve(format!(
                        "{}: connection kind `{}` does not match port `{}` ({})",
                        imp.name, conn.kind, conn.source, port.kind
                    )));
                }
            }
            let condition = if conn.in_modes.is_empty() {
                None
            } else {
                let owner = mode_owners.iter().position(|o| o.instance == k).ok_or_else(|| {
                    Error::Resolve(format!("{}: `in modes` used without declared modes", imp.name))
                })?;
                let mut modes = BTreeSet::new();
                for m in &conn.in_modes {
                    let idx = mode_owners[owner]
                        .mode_index(m)
                        .ok_or_else(|| Error::Resolve(format!("{}: unknown mode `{m}`", imp.name)))?;
                    modes.insert(idx);
                }
                Some(ModeCondition { owner, modes })
            };
            edges.push(Edge {
                from,
                to,
                segment: Segment { owner: k, declaration: d, label: conn.label.clone() },
                condition,
            });
        }
    }

    // chain edges into semantic connections
    let has_incoming: BTreeSet<&PortRef> = edges.iter().map(|e| &e.to).collect();
    let mut starts: Vec<&PortRef> = edges.iter().map(|e| &e.from).filter(|p| !has_incoming.contains(p)).collect();
    starts.sort();
    starts.dedup();
    let mut connections = Vec::new();
    for start in starts {
        let mut work: Vec<(Vec<usize>, PortRef)> = vec![(Vec::new(), start.clone())];
        while let Some((path, at)) = work.pop() {
            let next: Vec<usize> = (0..edges.len()).filter(|&e| edges[e].from == at).collect();
            if next.is_empty() {
                let mut route = vec![edges[path[0]].from.clone()];
                route.extend(path.iter().map(|&e| edges[e].to.clone()));
                connections.push(ConnectionInstance {
                    source: route[0].clone(),
                    destination: at.clone(),
                    kind: instances[at.instance].port(&at.port).expect("resolved").kind,
                    route,
                    segments: path.iter().map(|&e| edges[e].segment.clone()).collect(),
                    conditions: path.iter().filter_map(|&e| edges[e].condition.clone()).collect(),
                });
                continue;
            }
            for &e in next.iter().rev() {
                if path.contains(&e) {
                    return Err(Error::Resolve(format!("connection cycle through `{}`", instances[at.instance].display_path())));
                }
                let mut p = path.clone();
                p.push(e);
                work.push((p, edges[e].to.clone()));
            }
        }
    }
    connections.sort_by(|a, b| (&a.source, &a.destination).cmp(&(&b.source, &b.destination)));

    // bindings
    let mut processor_bindings = BTreeMap::new();
    let mut bound_declarations: BTreeMap<(InstanceId, usize), InstanceId> = BTreeMap::new();
    let lookup = |from: InstanceId, rel: &str| -> Option<InstanceId> {
        let base = &instances[from].path;
        let full = if base.is_empty() { rel.to_string() } else { format!("{base}.{rel}") };
        instances.iter().position(|i| same_name(&i.path, &full))
    };
    for (k, imp) in impls.iter().enumerate() {
        for prop in &imp.properties {
            let is_proc = same_name(&prop.name, PROCESSOR_BINDING);
            let is_conn = same_name(&prop.name, CONNECTION_BINDING);
            if !is_proc && !is_conn {
                return Err(Error::Resolve(format!("{}: unsupported property `{}`", imp.name, prop.name)));
            }
            let PropertyValue::Reference(target) = &prop.value else {
                return Err(Error::Resolve(format!("{}: `{}` expects a reference value", imp.name, prop.name)));
            };
            let Some(target_id) = lookup(k, target) else {
                return Err(Error::Resolve(format!("{}: binding target `{target}` does not exist", imp.name)));
            };
            let target_cat = instances[target_id].category;
            let Some(applies) = &prop.applies_to else {
                return Err(Error::Resolve(format!("{}: `{}` needs `applies to`", imp.name, prop.name)));
            };
            if is_proc {
                if target_cat != ComponentCategory::Processor {
                    return Err(Error::Resolve(format!("{}: `{target}` is a {target_cat}, not a processor", imp.name)));
                }
                let Some(thread) = lookup(k, applies) else {
                    return Err(Error::Resolve(format!("{}: bound component `{applies}` does not exist", imp.name)));
                };
                if instances[thread].category != ComponentCategory::Thread {
                    return Err(Error::Resolve(format!("{}: only threads can be bound to processors", imp.name)));
                }
                if processor_bindings.insert(thread, target_id).is_some() {
                    return Err(Error::Resolve(format!("{}: `{applies}` bound to two processors", imp.name)));
                }
            } else {
                if target_cat != ComponentCategory::Bus {
                    return Err(Error::Resolve(format!("{}: `{target}` is a {target_cat}, not a bus", imp.name)));
                }
                let (owner, label) = match applies.rsplit_once('.') {
                    Some((sub, label)) => (
                        lookup(k, sub).ok_or_else(|| Error::Resolve(format!("{}: unknown component `{sub}`", imp.name)))?,
                        label,
                    ),
                    None => (k, applies.as_str()),
                };
                let Some(decl) = impls[owner].connections.iter().position(|c| c.label.as_deref().is_some_and(|l| same_name(l, label))) else {
                    return Err(Error::Resolve(format!("{}: no connection labelled `{applies}`", imp.name)));
                };
                bound_declarations.insert((owner, decl), target_id);
            }
        }
    }
    let mut connection_bindings = BTreeMap::new();
    for (k, c) in connections.iter().enumerate() {
        let bus = c.segments.iter().find_map(|s| bound_declarations.get(&(s.owner, s.declaration)));
        let Some(&bus) = bus else { continue };
        let src = processor_bindings.get(&c.source.instance);
        let dst = processor_bindings.get(&c.destination.instance);
        let co_located = matches!((src, dst), (Some(a), Some(b)) if a == b);
        if !co_located {
            connection_bindings.insert(k, bus);
        }
    }

    Ok(InstanceModel {
        root_implementation: root_impl.name.clone(),
        instances,
        connections,
        processor_bindings,
        connection_bindings,
        mode_owners,
    })
}
