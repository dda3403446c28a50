//! Binding of library error models to component instances, and guard
//! evaluation over observed error states.
//!
//! A guard atom `port[Name]` observes the current error state of the
//! component at the far end of the active connection entering `port`;
//! `self[Name]` observes the owning component. Names resolve to a state
//! first, then to an alias.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::annex::{parse_annex_syntax, AnnexContent, GuardExpr, Occurrence, Subject};
use crate::errlib::{ErrorLibrary, ErrorModel, ErrorTransition, TransitionTarget, BRANCH_SUM_TOLERANCE};
use crate::error::{Error, Result};
use crate::instance::{InstanceId, InstanceModel, PortRef, Trigger};
use crate::model::same_name;

#[derive(Debug, Clone, PartialEq)]
pub struct BoundGuardEvent {
    pub expr: GuardExpr,
    /// Port or local event the architectural event is raised on.
    pub target: Trigger,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundGuardTransition {
    pub expr: GuardExpr,
    pub owner: usize,
    pub transition: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorInstance {
    pub instance: InstanceId,
    pub model: Arc<ErrorModel>,
    /// Poisson rate per event, per hour.
    pub rates: Vec<f64>,
    /// Library transitions with branch probabilities customized.
    pub transitions: Vec<ErrorTransition>,
    pub guard_events: Vec<BoundGuardEvent>,
    pub guard_transitions: Vec<BoundGuardTransition>,
}

impl ErrorInstance {
    /// Sets an event rate (`item` names an event) or a branch probability
    /// (`item` names a branch target state).
    pub fn set_occurrence(&mut self, item: &str, value: f64) -> Result<()> {
        if let Some(e) = self.model.event_index(item) {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Binding(format!("rate of `{item}` must be positive, got {value}")));
            }
            self.rates[e] = value;
            return Ok(());
        }
        self.apply(Occurrence::Fixed(value), item)
    }

    fn apply(&mut self, occurrence: Occurrence, item: &str) -> Result<()> {
        if !occurrence.in_range() {
            return Err(Error::Binding(format!("occurrence {occurrence} on `{item}` out of range")));
        }
        match occurrence {
            Occurrence::Poisson(rate) => {
                let e = self
                    .model
                    .event_index(item)
                    .ok_or_else(|| Error::Binding(format!("`{item}` is not an event of `{}`", self.model.name)))?;
                self.rates[e] = rate;
            }
            Occurrence::Fixed(p) => {
                let s = self
                    .model
                    .state_index(item)
                    .ok_or_else(|| Error::Binding(format!("`{item}` is not a state of `{}`", self.model.name)))?;
                let mut hit = false;
                for t in &mut self.transitions {
                    let TransitionTarget::Branch(branches) = &mut t.target else { continue };
                    let Some(k) = branches.iter().position(|(x, _)| *x == s) else { continue };
                    if branches.len() != 2 {
                        return Err(Error::Binding(format!(
                            "fixed occurrence on `{item}` needs a two-way branch, found {}",
                            branches.len()
                        )));
                    }
                    branches[k].1 = p;
                    branches[1 - k].1 = 1.0 - p;
                    hit = true;
                }
                if !hit {
                    return Err(Error::Binding(format!("fixed occurrence on non-branch state `{item}`")));
                }
            }
        }
        Ok(())
    }
}

/// Builds the error automaton instance of `instance` from its annex.
pub fn bind_error_model(
    model: &InstanceModel,
    instance: InstanceId,
    annex: &AnnexContent,
    library: &ErrorLibrary,
) -> Result<ErrorInstance> {
    let inst = &model.instances[instance];
    let who = inst.display_path();
    let em = library
        .model(&annex.model_ref)
        .ok_or_else(|| Error::Binding(format!("{who}: unknown error model implementation `{}`", annex.model_ref)))?;
    let mut rates = Vec::new();
    for e in &em.events {
        rates.push(e.default_rate.unwrap_or(f64::NAN));
    }
    let mut out = ErrorInstance {
        instance,
        model: em.clone(),
        rates,
        transitions: em.transitions.clone(),
        guard_events: Vec::new(),
        guard_transitions: Vec::new(),
    };
    for o in &annex.occurrences {
        out.apply(o.occurrence, &o.target).map_err(|e| Error::Binding(format!("{who}: {e}")))?;
    }
    for (e, r) in out.rates.iter().enumerate() {
        if r.is_nan() {
            return Err(Error::Binding(format!("{who}: event `{}` has no occurrence rate", em.events[e].name)));
        }
    }

    let check_atoms = |expr: &GuardExpr| -> Result<()> {
        for atom in expr.atoms() {
            if let Subject::Port(p) = &atom.subject {
                match inst.port(p) {
                    Some(port) if port.direction.can_receive() => {}
                    _ => return Err(Error::Binding(format!("{who}: guard observes `{p}`, which is not an in port"))),
                }
            }
            if em.expand(&atom.name).is_none() {
                return Err(Error::Binding(format!("{who}: guard names unknown state or alias `{}`", atom.name)));
            }
        }
        Ok(())
    };

    for g in &annex.guard_events {
        check_atoms(&g.expr)?;
        let target = match g.target.split_once('.') {
            Some((s, name)) if s.eq_ignore_ascii_case("self") => Trigger::Local { instance, name: name.to_string() },
            _ => match inst.port(&g.target) {
                Some(p) if p.direction.can_send() && p.kind.carries_events() => {
                    Trigger::Port(PortRef { instance, port: p.name.clone() })
                }
                _ => return Err(Error::Binding(format!("{who}: Guard_Event target `{}` is not an out event port", g.target))),
            },
        };
        out.guard_events.push(BoundGuardEvent { expr: g.expr.clone(), target });
    }
    for g in &annex.guard_transitions {
        check_atoms(&g.expr)?;
        let owner = model
            .mode_owner_of(instance)
            .ok_or_else(|| Error::Binding(format!("{who}: Guard_Transition without modes")))?;
        let transition = model.mode_owners[owner]
            .transitions
            .iter()
            .position(|t| t.label.as_deref().is_some_and(|l| same_name(l, &g.target)))
            .ok_or_else(|| Error::Binding(format!("{who}: no mode transition labelled `{}`", g.target)))?;
        out.guard_transitions.push(BoundGuardTransition { expr: g.expr.clone(), owner, transition });
    }
    Ok(out)
}

/// Per-instance parameter changes applied after annex overrides, keyed by
/// (instance path, event or branch-state name).
pub type OccurrenceOverrides = BTreeMap<(String, String), f64>;

/// An instance model together with the error automata of its components.
#[derive(Debug, Clone)]
pub struct BoundModel {
    pub instances: InstanceModel,
    pub errors: Vec<ErrorInstance>,
    /// Instance id → index into `errors`.
    pub error_of: Vec<Option<usize>>,
    /// Per error instance: the ports its guards observe, with the
    /// connections that may deliver an observation to each.
    observed: Vec<Vec<(String, Vec<usize>)>>,
}

impl BoundModel {
    pub fn new(instances: InstanceModel, library: &ErrorLibrary, overrides: &OccurrenceOverrides) -> Result<Self> {
        let mut errors = Vec::new();
        let mut error_of = vec![None; instances.instances.len()];
        for (k, inst) in instances.instances.iter().enumerate() {
            let Some(raw) = &inst.annex else { continue };
            let content = parse_annex_syntax(raw)?;
            let ei = bind_error_model(&instances, k, &content, library)?;
            error_of[k] = Some(errors.len());
            errors.push(ei);
        }
        for ((path, item), value) in overrides {
            let inst = instances
                .find(path)
                .ok_or_else(|| Error::InvalidParams(format!("no instance `{path}`")))?;
            let e = error_of[inst].ok_or_else(|| Error::InvalidParams(format!("`{path}` has no error model")))?;
            errors[e].set_occurrence(item, *value)?;
        }
        let mut observed = Vec::new();
        for ei in &errors {
            let mut ports: Vec<String> = Vec::new();
            let exprs = ei.guard_events.iter().map(|g| &g.expr).chain(ei.guard_transitions.iter().map(|g| &g.expr));
            for expr in exprs {
                for atom in expr.atoms() {
                    if let Subject::Port(p) = &atom.subject {
                        let canonical = instances.instances[ei.instance].port(p).expect("checked at binding").name.clone();
                        if !ports.contains(&canonical) {
                            ports.push(canonical);
                        }
                    }
                }
            }
            let entry = ports
                .into_iter()
                .map(|p| {
                    let at = PortRef { instance: ei.instance, port: p.clone() };
                    let conns = (0..instances.connections.len())
                        .filter(|&c| instances.connections[c].route[1..].contains(&at))
                        .collect();
                    (p, conns)
                })
                .collect();
            observed.push(entry);
        }
        Ok(BoundModel { instances, errors, error_of, observed })
    }

    pub fn initial_error_states(&self) -> Vec<usize> {
        self.errors.iter().map(|e| e.model.initial).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub enum Observation<'a> {
    Observed { model: &'a ErrorModel, state: usize },
    Unobservable,
}

/// What one component sees: its own error state and the error state of the
/// peer behind each observed port.
#[derive(Debug, Clone)]
pub struct ObservationContext<'a> {
    pub model: &'a ErrorModel,
    pub self_state: usize,
    pub ports: Vec<(&'a str, Observation<'a>)>,
}

impl ObservationContext<'_> {
    pub fn observation(&self, port: &str) -> Observation<'_> {
        self.ports
            .iter()
            .find(|(p, _)| same_name(p, port))
            .map_or(Observation::Unobservable, |(_, o)| *o)
    }
}

/// Builds the observation context of error instance `error` given the
/// error-state vector and the set of active connections.
pub fn build_observation_context<'a>(
    bound: &'a BoundModel,
    error_states: &[usize],
    error: usize,
    active: &[bool],
) -> Result<ObservationContext<'a>> {
    let ei = &bound.errors[error];
    let mut ports = Vec::new();
    for (port, conns) in &bound.observed[error] {
        let mut source: Option<InstanceId> = None;
        for &c in conns {
            if !active[c] {
                continue;
            }
            let s = bound.instances.connections[c].source.instance;
            match source {
                Some(prev) if prev != s => {
                    return Err(Error::Behavior(format!(
                        "ambiguous observation: `{}.{port}` receives from both `{}` and `{}`",
                        bound.instances.instances[ei.instance].display_path(),
                        bound.instances.instances[prev].display_path(),
                        bound.instances.instances[s].display_path()
                    )));
                }
                _ => source = Some(s),
            }
        }
        let obs = match source.and_then(|s| bound.error_of[s]) {
            Some(peer) => Observation::Observed { model: &bound.errors[peer].model, state: error_states[peer] },
            None => Observation::Unobservable,
        };
        ports.push((port.as_str(), obs));
    }
    Ok(ObservationContext { model: &ei.model, self_state: error_states[error], ports })
}

fn in_expansion(model: &ErrorModel, name: &str, state: usize) -> bool {
    model.expand(name).is_some_and(|s| s.contains(&state))
}

/// Pure evaluation of a guard; atoms on unobservable ports are false.
pub fn eval_guard(expr: &GuardExpr, ctx: &ObservationContext<'_>) -> bool {
    expr.eval_with(&mut |atom| match &atom.subject {
        Subject::Own => in_expansion(ctx.model, &atom.name, ctx.self_state),
        Subject::Port(p) => match ctx.observation(p) {
            Observation::Observed { model, state } => in_expansion(model, &atom.name, state),
            Observation::Unobservable => false,
        },
    })
}

/// Sanity check used by tests and by expansion: every branch sums to one.
pub fn branches_sum_to_one(ei: &ErrorInstance) -> bool {
    ei.transitions.iter().all(|t| match &t.target {
        TransitionTarget::State(_) => true,
        TransitionTarget::Branch(b) => (b.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs() <= BRANCH_SUM_TOLERANCE,
    })
}
