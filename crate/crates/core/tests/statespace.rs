mod common;

use archdep::errlib::ErrorLibrary;
use archdep::patterns::{instantiate_pattern, PatternKind, PatternParams};
use archdep::pipeline::{analyze, bind};
use archdep::statespace::*;
use archdep::Error;
use common::*;

const SINGLE: &str = "\
thread t
end t;
thread implementation t.i
annex Error_Model {**
  Model => independent.general;
**};
end t.i;
system S
end S;
system implementation S.i
subcomponents
  c: thread t.i;
end S.i;
";

#[test]
fn single_component_expansion() {
    let a = analyze_text(SINGLE, "S.i", &ErrorLibrary::bundled());
    assert_eq!(a.sts.tangible_count(), 3);
    assert_eq!(a.sts.vanishing_count(), 1);
    assert_eq!(a.sts.timed.len(), 3);
    assert_eq!(a.sts.immediate.len(), 2);
    assert_eq!(a.ctmc.len(), 3);
    assert_eq!(a.ctmc.edge_count(), 4);
}

#[test]
fn visibility_branch_reduces_to_split_rates() {
    let lambda = 1e-3;
    let a = analyze_text(SINGLE, "S.i", &ErrorLibrary::bundled());
    let map = ctmc_rate_map(&a);
    let key = |s: &str| vec![format!("c={s}")];
    let out = &map[&key("Error_Free")];
    assert_eq!(out.len(), 2);
    // first-step analysis: λ times the branch probability, no rounding slack
    assert_eq!(out[&key("FailedVisible")], 0.9 * lambda);
    assert_eq!(out[&key("FailedInvisible")], 0.1 * lambda);
    assert_eq!(map[&key("FailedVisible")][&key("Error_Free")], 1.0);
    assert_eq!(map[&key("FailedInvisible")][&key("Error_Free")], 1.0);
}

#[test]
fn zero_event_model_has_one_state() {
    let text = SINGLE.replace("independent.general", "perfect.general");
    let a = analyze_text(&text, "S.i", &library("degenerate.errlib"));
    assert_eq!(a.sts.states.len(), 1);
    assert!(a.sts.timed.is_empty());
    assert_eq!(a.ctmc.edge_count(), 0);
}

fn g(k: u16) -> GlobalState {
    GlobalState { errors: vec![k], modes: vec![] }
}

fn tangible(k: u16) -> StsState {
    StsState { global: g(k), kind: StateKind::Tangible }
}

fn vanishing(k: u16, t: usize) -> StsState {
    StsState { global: g(k), kind: StateKind::Vanishing { error: 0, transition: t } }
}

fn timed(from: usize, to: usize, rate: f64) -> TimedEdge {
    TimedEdge { from, to, rate, cause: None }
}

fn imm(from: usize, to: usize, probability: f64) -> ImmediateEdge {
    ImmediateEdge { from, to, probability }
}

#[test]
fn sts_without_vanishing_states_is_copied() {
    let sts = StochasticTransitionSystem::from_parts(
        vec![tangible(0), tangible(1)],
        vec![timed(0, 1, 2.0), timed(1, 0, 3.0)],
        vec![],
        0,
    )
    .unwrap();
    let c = eliminate_vanishing(&sts).unwrap();
    assert_eq!(c.rows, vec![vec![(1, 2.0)], vec![(0, 3.0)]]);
    assert_eq!(c.initial, vec![1.0, 0.0]);
}

#[test]
fn chained_vanishing_states_compose_multiplicatively() {
    let (lambda, p, q) = (0.7, 0.3, 0.6);
    // A -λ-> V1; V1 -p-> V2, -(1-p)-> C; V2 -q-> B, -(1-q)-> D
    let states = vec![tangible(0), vanishing(0, 0), vanishing(0, 1), tangible(1), tangible(2), tangible(3)];
    let sts = StochasticTransitionSystem::from_parts(
        states,
        vec![timed(0, 1, lambda), timed(3, 0, 1.0), timed(4, 0, 1.0), timed(5, 0, 1.0)],
        vec![imm(1, 2, p), imm(1, 4, 1.0 - p), imm(2, 3, q), imm(2, 5, 1.0 - q)],
        0,
    )
    .unwrap();
    let c = eliminate_vanishing(&sts).unwrap();
    assert_eq!(c.len(), 4);
    let idx = |s: usize| c.sts_index.iter().position(|&x| x == s).unwrap();
    let row: std::collections::BTreeMap<usize, f64> = c.rows[idx(0)].iter().copied().collect();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-15;
    assert!(close(row[&idx(3)], p * q * lambda));
    assert!(close(row[&idx(5)], p * (1.0 - q) * lambda));
    assert!(close(row[&idx(4)], (1.0 - p) * lambda));
}

#[test]
fn vanishing_cycle_is_rejected() {
    let states = vec![tangible(0), vanishing(0, 0), vanishing(0, 1)];
    let sts = StochasticTransitionSystem::from_parts(
        states,
        vec![timed(0, 1, 1.0)],
        vec![imm(1, 2, 1.0), imm(2, 1, 1.0)],
        0,
    )
    .unwrap();
    match eliminate_vanishing(&sts) {
        Err(Error::VanishingCycle(msg)) => assert!(!msg.is_empty()),
        other => panic!("expected a cycle error, got {other:?}"),
    }
}

#[test]
fn leaky_vanishing_loop_is_resolved() {
    // V1 -> V2 -> V1 with probability 1/2 of escaping: all mass ends in B
    let states = vec![tangible(0), vanishing(0, 0), vanishing(0, 1), tangible(1)];
    let sts = StochasticTransitionSystem::from_parts(
        states,
        vec![timed(0, 1, 2.0), timed(3, 0, 1.0)],
        vec![imm(1, 2, 1.0), imm(2, 1, 0.5), imm(2, 3, 0.5)],
        0,
    )
    .unwrap();
    let c = eliminate_vanishing(&sts).unwrap();
    let b = c.sts_index.iter().position(|&x| x == 3).unwrap();
    let a = c.sts_index.iter().position(|&x| x == 0).unwrap();
    assert!((c.rows[a].iter().find(|e| e.0 == b).unwrap().1 - 2.0).abs() < 1e-12);
}

#[test]
fn invalid_branch_sum_is_rejected() {
    let states = vec![tangible(0), vanishing(0, 0), tangible(1)];
    let r = StochasticTransitionSystem::from_parts(states, vec![timed(0, 1, 1.0)], vec![imm(1, 2, 0.7)], 0);
    assert!(r.is_err());
}

#[test]
fn outflow_is_conserved() {
    for kind in PatternKind::ALL {
        let gm = instantiate_pattern(&PatternParams::new(kind)).unwrap();
        let a = analyze(&gm.declarations, &gm.root, &ErrorLibrary::bundled(), &Default::default(), &ExpandConfig::default())
            .unwrap();
        for (i, row) in a.ctmc.rows.iter().enumerate() {
            let s: f64 = row.iter().map(|e| e.1).sum();
            assert!((s - a.ctmc.exit_rates[i]).abs() <= 1e-12 * s.max(1.0));
            let q = a.ctmc.dense_generator();
            assert!(q[i].iter().sum::<f64>().abs() <= 1e-12);
        }
    }
}

#[test]
fn state_cap_is_enforced() {
    let gm = instantiate_pattern(&PatternParams::new(PatternKind::Controller)).unwrap();
    let r = analyze(&gm.declarations, &gm.root, &ErrorLibrary::bundled(), &Default::default(), &ExpandConfig { state_cap: 5 });
    assert!(matches!(r, Err(Error::StateCap { limit: 5 })));
}

fn checkpoint_composer_case(setup: impl Fn(&mut GlobalState), e: &str, event: &str, to: &str) -> Vec<(Vec<String>, f64)> {
    let d = parse_fixtures(&["checkpoints.aadl"]);
    let bound = bind(&d, "HotStandBy.checkpoints", &ErrorLibrary::bundled(), &Default::default()).unwrap();
    let c = Composer::new(&bound).unwrap();
    let mut pre = c.settle(None, c.initial_raw()).unwrap();
    setup(&mut pre);
    let ei = bound.error_of[bound.instances.find(e).unwrap()].unwrap();
    let model = &bound.errors[ei].model;
    let ev = model.event_index(event).unwrap();
    let t = bound.errors[ei]
        .transitions
        .iter()
        .position(|t| t.event == ev && t.source == pre.error(ei))
        .unwrap();
    let target = model.state_index(to);
    c.immediate_closure(&pre, ei, t)
        .unwrap()
        .into_iter()
        .filter(|(g, _)| target.is_none_or(|s| g.error(ei) == s))
        .map(|(g, p)| {
            let mut l = state_labels(&bound, &g);
            l.sort();
            (l, p)
        })
        .collect()
}

#[test]
fn detected_failure_hands_over_to_the_standby() {
    let out = checkpoint_composer_case(|_| {}, "Comp1", "Fail", "FailedVisible");
    assert_eq!(out.len(), 1);
    assert!(has(&out[0].0, "HotStandBy@Comp2Primary"), "{out:?}");
    assert!((out[0].1 - 0.9).abs() < 1e-15);
    // an undetected failure leaves the mode alone
    let out = checkpoint_composer_case(|_| {}, "Comp1", "Fail", "FailedInvisible");
    assert!(has(&out[0].0, "HotStandBy@Comp1Primary"));
}

#[test]
fn first_replica_restarted_becomes_primary() {
    // both visibly failed in Comp1Primary; Comp2 restarts first
    let out = checkpoint_composer_case(|g| g.errors = vec![1, 1], "Comp2", "Restart", "Error_Free");
    assert_eq!(out.len(), 1);
    assert!(has(&out[0].0, "HotStandBy@Comp2Primary"), "{out:?}");
    assert!(has(&out[0].0, "Comp2=Error_Free"));
}

#[test]
fn quiet_events_do_not_change_modes() {
    // standby fails: no guard becomes true
    let out = checkpoint_composer_case(|_| {}, "Comp2", "Fail", "FailedVisible");
    assert!(has(&out[0].0, "HotStandBy@Comp1Primary"));
}

#[test]
fn export_lists_states_then_edges() {
    let a = analyze_text(SINGLE, "S.i", &ErrorLibrary::bundled());
    let text = export_ctmc(&a.bound, &a.ctmc);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.iter().filter(|l| l.starts_with("state ")).count(), 3);
    assert_eq!(lines.iter().filter(|l| l.starts_with("edge ")).count(), 4);
    assert_eq!(lines[0], "state 0 c=Error_Free");
}
