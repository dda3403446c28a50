//! Composition of error automata and mode automata into a stochastic
//! transition system.
//!
//! Timed error events move the system out of a tangible state. What follows
//! is instantaneous: a probabilistic branch of the event's transition, then
//! rounds of
//!
//! 1. forced transitions: a thread whose processor is failed is put in
//!    `FailedVisible`;
//! 2. guards: Guard_Event expressions that went from false to true raise
//!    architectural events, which travel along active connections and fire
//!    mode transitions one owner at a time;
//!
//! until nothing changes. Guard values are compared against the tangible
//! state the timed event left, so a guard that stays true never re-fires.

mod eliminate;
mod measure;

pub use eliminate::{eliminate_vanishing, Ctmc, VANISHING_LOOP_TOLERANCE};
pub use measure::{eval_measure_predicate, parse_measure, Measure, MeasureExpr, ResolvedMeasure};

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt::Write as _;

use crate::binding::{build_observation_context, eval_guard, BoundModel};
use crate::errlib::TransitionTarget;
use crate::error::{Error, Result};
use crate::instance::{InstanceId, PortRef, Trigger};
use crate::model::ComponentCategory;

/// Default bound on the number of explored states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;
/// Tolerance on probability sums out of vanishing states.
pub const PROBABILITY_TOLERANCE: f64 = 1e-9;

/// Name of the state a thread is forced into when its processor fails.
pub const FORCED_FAILURE_STATE: &str = "FailedVisible";

/// One node of the composed behavior: an error state per error instance and
/// a mode per mode owner, both in instance order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GlobalState {
    pub errors: Vec<u16>,
    pub modes: Vec<u16>,
}

impl GlobalState {
    pub fn error(&self, k: usize) -> usize {
        self.errors[k] as usize
    }

    pub fn mode(&self, k: usize) -> usize {
        self.modes[k] as usize
    }

    pub fn mode_vec(&self) -> Vec<usize> {
        self.modes.iter().map(|&m| m as usize).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StateKind {
    Tangible,
    /// Pending branch of `transition` of error instance `error`, entered
    /// from the state stored alongside.
    Vanishing { error: usize, transition: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StsState {
    pub global: GlobalState,
    pub kind: StateKind,
}

impl StsState {
    pub fn is_tangible(&self) -> bool {
        self.kind == StateKind::Tangible
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedEdge {
    pub from: usize,
    pub to: usize,
    pub rate: f64,
    /// (error instance, event) that caused the edge; `None` for edges of
    /// hand-built systems.
    pub cause: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImmediateEdge {
    pub from: usize,
    pub to: usize,
    pub probability: f64,
}

#[derive(Debug, Clone)]
pub struct StochasticTransitionSystem {
    pub states: Vec<StsState>,
    pub timed: Vec<TimedEdge>,
    pub immediate: Vec<ImmediateEdge>,
    pub initial: usize,
    timed_out: Vec<Vec<usize>>,
    immediate_out: Vec<Vec<usize>>,
}

impl StochasticTransitionSystem {
    /// Assembles a system from parts, checking its invariants.
    pub fn from_parts(states: Vec<StsState>, timed: Vec<TimedEdge>, immediate: Vec<ImmediateEdge>, initial: usize) -> Result<Self> {
        let n = states.len();
        if initial >= n {
            return Err(Error::Behavior("initial state out of range".into()));
        }
        let mut timed_out = vec![Vec::new(); n];
        let mut immediate_out = vec![Vec::new(); n];
        for (k, e) in timed.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::Behavior("timed edge endpoint out of range".into()));
            }
            if !(e.rate.is_finite() && e.rate > 0.0) {
                return Err(Error::Behavior(format!("timed edge {} -> {} has rate {}", e.from, e.to, e.rate)));
            }
            if !states[e.from].is_tangible() {
                return Err(Error::Behavior(format!("vanishing state {} has a timed edge", e.from)));
            }
            timed_out[e.from].push(k);
        }
        for (k, e) in immediate.iter().enumerate() {
            if e.from >= n || e.to >= n {
                return Err(Error::Behavior("immediate edge endpoint out of range".into()));
            }
            if states[e.from].is_tangible() {
                return Err(Error::Behavior(format!("tangible state {} has an immediate edge", e.from)));
            }
            if !(0.0..=1.0 + PROBABILITY_TOLERANCE).contains(&e.probability) {
                return Err(Error::Behavior(format!("immediate edge probability {}", e.probability)));
            }
            immediate_out[e.from].push(k);
        }
        for (v, outs) in immediate_out.iter().enumerate() {
            if states[v].is_tangible() {
                continue;
            }
            let sum: f64 = outs.iter().map(|&k| immediate[k].probability).sum();
            if (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
                return Err(Error::Behavior(format!("immediate probabilities out of vanishing state {v} sum to {sum}")));
            }
        }
        Ok(StochasticTransitionSystem { states, timed, immediate, initial, timed_out, immediate_out })
    }

    pub fn timed_out(&self, s: usize) -> impl Iterator<Item = &TimedEdge> {
        self.timed_out[s].iter().map(move |&k| &self.timed[k])
    }

    pub fn immediate_out(&self, s: usize) -> impl Iterator<Item = &ImmediateEdge> {
        self.immediate_out[s].iter().map(move |&k| &self.immediate[k])
    }

    pub fn tangible_count(&self) -> usize {
        self.states.iter().filter(|s| s.is_tangible()).count()
    }

    pub fn vanishing_count(&self) -> usize {
        self.states.len() - self.tangible_count()
    }
}

/// Human-readable labels of a global state: `path=state` per error instance
/// and `path@mode` per mode owner.
pub fn state_labels(bound: &BoundModel, g: &GlobalState) -> Vec<String> {
    let mut out = Vec::new();
    for (k, ei) in bound.errors.iter().enumerate() {
        let path = bound.instances.instances[ei.instance].display_path();
        out.push(format!("{path}={}", ei.model.states[g.error(k)]));
    }
    for (k, owner) in bound.instances.mode_owners.iter().enumerate() {
        let path = bound.instances.instances[owner.instance].display_path();
        out.push(format!("{path}@{}", owner.modes[g.mode(k)]));
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub struct ExpandConfig {
    pub state_cap: usize,
}

impl Default for ExpandConfig {
    fn default() -> Self {
        ExpandConfig { state_cap: DEFAULT_STATE_CAP }
    }
}

struct Forced {
    thread: usize,
    processor: usize,
    processor_initial: usize,
    state: usize,
}

/// Precomputed view of a bound model used while composing.
pub struct Composer<'a> {
    bound: &'a BoundModel,
    /// (error instance, guard index), instance order then declaration order.
    guards: Vec<(usize, usize)>,
    forced: Vec<Forced>,
    /// Error instance → error instance of its failed-processor hold.
    hold: Vec<Option<(usize, usize)>>,
    /// (owner, transition) → Guard_Transition expressions (all must hold).
    transition_guards: HashMap<(usize, usize), Vec<(usize, usize)>>,
    /// Port → (connection, position of the port on the route).
    downstream: HashMap<PortRef, Vec<(usize, usize)>>,
    iteration_bound: usize,
}

impl<'a> Composer<'a> {
    pub fn new(bound: &'a BoundModel) -> Result<Self> {
        let im = &bound.instances;
        let mut guards = Vec::new();
        let mut transition_guards: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
        for (e, ei) in bound.errors.iter().enumerate() {
            guards.extend((0..ei.guard_events.len()).map(|g| (e, g)));
            for (g, gt) in ei.guard_transitions.iter().enumerate() {
                transition_guards.entry((gt.owner, gt.transition)).or_default().push((e, g));
            }
        }
        let mut forced = Vec::new();
        let mut hold = vec![None; bound.errors.len()];
        for (&thread, &processor) in &im.processor_bindings {
            let (Some(te), Some(pe)) = (bound.error_of[thread], bound.error_of[processor]) else { continue };
            let model = &bound.errors[te].model;
            let state = model.state_index(FORCED_FAILURE_STATE).ok_or_else(|| {
                Error::Behavior(format!(
                    "thread `{}` is bound to a processor but its error model has no `{FORCED_FAILURE_STATE}` state",
                    im.instances[thread].display_path()
                ))
            })?;
            let processor_initial = bound.errors[pe].model.initial;
            forced.push(Forced { thread: te, processor: pe, processor_initial, state });
            hold[te] = Some((pe, processor_initial));
        }
        let mut downstream: HashMap<PortRef, Vec<(usize, usize)>> = HashMap::new();
        for (c, conn) in im.connections.iter().enumerate() {
            for (pos, p) in conn.route.iter().enumerate() {
                downstream.entry(p.clone()).or_default().push((c, pos));
            }
        }
        // events from outside the root never arrive
        for owner in &im.mode_owners {
            for t in &owner.transitions {
                for trig in &t.triggers {
                    if let Trigger::Port(p) = trig {
                        let inst = &im.instances[p.instance];
                        let own_in = p.instance == owner.instance
                            && inst.port(&p.port).is_some_and(|x| x.direction.can_receive());
                        if own_in && inst.parent.is_none() && inst.category == ComponentCategory::System {
                            return Err(Error::Behavior(format!(
                                "mode transition of `{}` is triggered by its own in port `{}`, which no component of the model can reach",
                                inst.display_path(),
                                p.port
                            )));
                        }
                    }
                }
            }
        }
        let iteration_bound = 4 * (im.instances.len() + im.mode_owners.len());
        Ok(Composer { bound, guards, forced, hold, transition_guards, downstream, iteration_bound })
    }

    pub fn bound(&self) -> &BoundModel {
        self.bound
    }

    pub fn initial_raw(&self) -> GlobalState {
        GlobalState {
            errors: self.bound.errors.iter().map(|e| e.model.initial as u16).collect(),
            modes: self.bound.instances.mode_owners.iter().map(|o| o.initial as u16).collect(),
        }
    }

    fn active_mask(&self, g: &GlobalState) -> Vec<bool> {
        let modes = g.mode_vec();
        self.bound.instances.connections.iter().map(|c| c.is_active(&modes)).collect()
    }

    fn guard_values(&self, g: &GlobalState, active: &[bool]) -> Result<Vec<bool>> {
        let errors: Vec<usize> = g.errors.iter().map(|&x| x as usize).collect();
        let mut out = Vec::with_capacity(self.guards.len());
        let mut cache: Option<(usize, crate::binding::ObservationContext<'_>)> = None;
        for &(e, k) in &self.guards {
            if cache.as_ref().is_none_or(|(ce, _)| *ce != e) {
                cache = Some((e, build_observation_context(self.bound, &errors, e, active)?));
            }
            let ctx = &cache.as_ref().expect("just set").1;
            out.push(eval_guard(&self.bound.errors[e].guard_events[k].expr, ctx));
        }
        Ok(out)
    }

    /// Whether the timed events of error instance `e` are suspended in `g`.
    pub fn is_held(&self, g: &GlobalState, e: usize) -> bool {
        self.hold[e].is_some_and(|(p, init)| g.error(p) != init)
    }

    /// Deterministic part of the immediate phase: forced transitions and
    /// guard-triggered mode switches, repeated to a fixpoint. `pre` is the
    /// tangible state the timed event left (`None` for the initial state,
    /// where every guard counts as previously false).
    pub fn settle(&self, pre: Option<&GlobalState>, raw: GlobalState) -> Result<GlobalState> {
        let im = &self.bound.instances;
        let mut last = match pre {
            Some(p) => self.guard_values(p, &self.active_mask(p))?,
            None => vec![false; self.guards.len()],
        };
        let mut cur = raw;
        for _ in 0..self.iteration_bound {
            let mut changed = false;
            for f in &self.forced {
                if cur.error(f.processor) != f.processor_initial && cur.error(f.thread) != f.state {
                    cur.errors[f.thread] = f.state as u16;
                    changed = true;
                }
            }
            let mut active = self.active_mask(&cur);
            let values = self.guard_values(&cur, &active)?;
            let fired: Vec<usize> = (0..values.len()).filter(|&g| values[g] && !last[g]).collect();
            last = values;
            if !fired.is_empty() {
                let mut arrivals: BTreeSet<Trigger> = BTreeSet::new();
                for g in fired {
                    let (e, k) = self.guards[g];
                    let target = &self.bound.errors[e].guard_events[k].target;
                    arrivals.insert(target.clone());
                    if let Trigger::Port(p) = target {
                        for &(c, pos) in self.downstream.get(p).map(Vec::as_slice).unwrap_or(&[]) {
                            if active[c] {
                                for q in &im.connections[c].route[pos + 1..] {
                                    arrivals.insert(Trigger::Port(q.clone()));
                                }
                            }
                        }
                    }
                }
                for (o, owner) in im.mode_owners.iter().enumerate() {
                    let mode = cur.mode(o);
                    let mut enabled = Vec::new();
                    for (t, tr) in owner.transitions.iter().enumerate() {
                        if tr.source != mode || !tr.triggers.iter().any(|x| arrivals.contains(x)) {
                            continue;
                        }
                        if self.transition_guard_holds(&cur, &active, o, t)? {
                            enabled.push(t);
                        }
                    }
                    match enabled.as_slice() {
                        [] => {}
                        [t] => {
                            cur.modes[o] = owner.transitions[*t].target as u16;
                            changed = true;
                            active = self.active_mask(&cur);
                        }
                        _ => {
                            return Err(Error::Behavior(format!(
                                "nondeterministic mode automaton: {} transitions of `{}` leave mode `{}` at once",
                                enabled.len(),
                                im.instances[owner.instance].display_path(),
                                owner.modes[mode]
                            )))
                        }
                    }
                }
            }
            if !changed {
                return Ok(cur);
            }
        }
        Err(Error::Behavior(format!(
            "immediate livelock: no fixpoint within {} rounds",
            self.iteration_bound
        )))
    }

    fn transition_guard_holds(&self, g: &GlobalState, active: &[bool], owner: usize, transition: usize) -> Result<bool> {
        let Some(list) = self.transition_guards.get(&(owner, transition)) else { return Ok(true) };
        let errors: Vec<usize> = g.errors.iter().map(|&x| x as usize).collect();
        for &(e, k) in list {
            let ctx = build_observation_context(self.bound, &errors, e, active)?;
            if !eval_guard(&self.bound.errors[e].guard_transitions[k].expr, &ctx) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Full immediate phase after error instance `e` takes `transition` in
    /// tangible state `pre`: returns the reachable tangible states with
    /// their probabilities.
    pub fn immediate_closure(&self, pre: &GlobalState, e: usize, transition: usize) -> Result<Vec<(GlobalState, f64)>> {
        let tr = &self.bound.errors[e].transitions[transition];
        let outcomes: Vec<(usize, f64)> = match &tr.target {
            TransitionTarget::State(s) => vec![(*s, 1.0)],
            TransitionTarget::Branch(b) => b.iter().copied().filter(|(_, p)| *p > 0.0).collect(),
        };
        let mut merged: BTreeMap<GlobalState, f64> = BTreeMap::new();
        let mut order = Vec::new();
        for (s, p) in outcomes {
            let mut raw = pre.clone();
            raw.errors[e] = s as u16;
            let settled = self.settle(Some(pre), raw)?;
            if !merged.contains_key(&settled) {
                order.push(settled.clone());
            }
            *merged.entry(settled).or_insert(0.0) += p;
        }
        Ok(order.into_iter().map(|g| {
            let p = merged[&g];
            (g, p)
        }).collect())
    }
}

/// Breadth-first expansion of a bound model from its initial state.
pub fn expand(bound: &BoundModel, cfg: &ExpandConfig) -> Result<StochasticTransitionSystem> {
    let composer = Composer::new(bound)?;
    let initial = composer.settle(None, composer.initial_raw())?;
    let mut states: Vec<StsState> = Vec::new();
    let mut index: HashMap<StsState, usize> = HashMap::new();
    let mut timed = Vec::new();
    let mut immediate = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |st: StsState, states: &mut Vec<StsState>, queue: &mut VecDeque<usize>| -> Result<usize> {
        if let Some(&k) = index.get(&st) {
            return Ok(k);
        }
        if states.len() >= cfg.state_cap {
            return Err(Error::StateCap { limit: cfg.state_cap });
        }
        let k = states.len();
        if st.is_tangible() {
            queue.push_back(k);
        }
        index.insert(st.clone(), k);
        states.push(st);
        Ok(k)
    };
    let tangible = |g: GlobalState| StsState { global: g, kind: StateKind::Tangible };

    let init = intern(tangible(initial), &mut states, &mut queue)?;
    while let Some(s) = queue.pop_front() {
        let g = states[s].global.clone();
        for (e, ei) in bound.errors.iter().enumerate() {
            if composer.is_held(&g, e) {
                continue;
            }
            for (t, tr) in ei.transitions.iter().enumerate() {
                if tr.source != g.error(e) {
                    continue;
                }
                let rate = ei.rates[tr.event];
                let results = composer.immediate_closure(&g, e, t)?;
                match tr.target {
                    TransitionTarget::State(_) => {
                        let (target, _) = results.into_iter().next().expect("one outcome");
                        let to = intern(tangible(target), &mut states, &mut queue)?;
                        timed.push(TimedEdge { from: s, to, rate, cause: Some((e, tr.event)) });
                    }
                    TransitionTarget::Branch(_) => {
                        let v = intern(
                            StsState { global: g.clone(), kind: StateKind::Vanishing { error: e, transition: t } },
                            &mut states,
                            &mut queue,
                        )?;
                        timed.push(TimedEdge { from: s, to: v, rate, cause: Some((e, tr.event)) });
                        let total: f64 = results.iter().map(|(_, p)| p).sum();
                        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
                            return Err(Error::Behavior(format!("branch probabilities sum to {total}")));
                        }
                        for (target, p) in results {
                            let to = intern(tangible(target), &mut states, &mut queue)?;
                            immediate.push(ImmediateEdge { from: v, to, probability: p });
                        }
                    }
                }
            }
        }
    }
    StochasticTransitionSystem::from_parts(states, timed, immediate, init)
}

/// Line-oriented CTMC dump: `state <idx> <labels...>` then
/// `edge <from> <to> <rate>`, in index order.
pub fn export_ctmc(bound: &BoundModel, ctmc: &Ctmc) -> String {
    let mut out = String::new();
    for (k, g) in ctmc.states.iter().enumerate() {
        let _ = writeln!(out, "state {k} {}", state_labels(bound, g).join(" "));
    }
    for (k, row) in ctmc.rows.iter().enumerate() {
        for &(j, r) in row {
            let _ = writeln!(out, "edge {k} {j} {r}");
        }
    }
    out
}

/// Instance path of error instance `e`.
pub fn error_instance_path(bound: &BoundModel, e: usize) -> &str {
    let id: InstanceId = bound.errors[e].instance;
    bound.instances.instances[id].display_path()
}
