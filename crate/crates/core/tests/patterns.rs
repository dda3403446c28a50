mod common;

use archdep::errlib::ErrorLibrary;
use archdep::patterns::{instantiate_pattern, GeneratedModel, PatternKind, PatternParams};
use archdep::pipeline::{analyze, Analysis};
use archdep::solver::{eval_measure, steady_state, SolverConfig};
use archdep::statespace::ExpandConfig;
use archdep::validate::validate_with_library;
use common::*;

fn run(g: &GeneratedModel) -> Analysis {
    analyze(&g.declarations, &g.root, &ErrorLibrary::bundled(), &Default::default(), &ExpandConfig::default()).unwrap()
}

fn pattern(kind: PatternKind) -> (GeneratedModel, Analysis) {
    let g = instantiate_pattern(&PatternParams::new(kind)).unwrap();
    let a = run(&g);
    (g, a)
}

fn unavailability(g: &GeneratedModel, a: &Analysis) -> f64 {
    let pi = steady_state(&a.ctmc, &SolverConfig::default()).unwrap();
    1.0 - eval_measure(&g.up_measure.resolve(&a.bound).unwrap(), &a.ctmc, &pi)
}

#[test]
fn generated_patterns_validate() {
    for kind in PatternKind::ALL {
        let g = instantiate_pattern(&PatternParams::new(kind)).unwrap();
        let diags = validate_with_library(&g.declarations, &ErrorLibrary::bundled());
        assert!(diags.is_empty(), "{}: {diags:?}", kind.name());
        assert_eq!(g.root, format!("HotStandBy.{}", kind.name()));
    }
}

#[test]
fn checkpoints_matches_enumerator() {
    let (_, a) = pattern(PatternKind::Checkpoints);
    let (oracle, _) = oracle_chain(&Checkpoints { comp: default_replica() });
    assert_isomorphic(&ctmc_rate_map(&a), &oracle, 1e-12);
    assert!(a.ctmc.len() <= 18);
}

#[test]
fn controller_matches_enumerator() {
    let (_, a) = pattern(PatternKind::Controller);
    let (oracle, _) = oracle_chain(&Controller { comp: default_replica(), controller: default_controller() });
    assert_isomorphic(&ctmc_rate_map(&a), &oracle, 1e-12);
}

#[test]
fn mutual_matches_enumerator() {
    let (_, a) = pattern(PatternKind::Mutual);
    let (oracle, _) = oracle_chain(&Mutual { comp: default_replica() });
    assert_isomorphic(&ctmc_rate_map(&a), &oracle, 1e-12);
}

/// Up: the primary replica is error free.
fn checkpoints_up(k: &Key) -> bool {
    (has(k, "HotStandBy@Comp1Primary") && has(k, "Comp1=Error_Free"))
        || (has(k, "HotStandBy@Comp2Primary") && has(k, "Comp2=Error_Free"))
}

#[test]
fn checkpoints_unavailability_matches_dense_solve() {
    for visible in [0.9, 1.0] {
        let mut p = PatternParams::new(PatternKind::Checkpoints);
        p.visibility = visible;
        let g = instantiate_pattern(&p).unwrap();
        let a = run(&g);
        let (oracle, _) = oracle_chain(&Checkpoints { comp: Comp { visible, ..default_replica() } });
        let (keys, q) = dense_of(&oracle);
        let pi = dense_steady_state(&q);
        let expected: f64 = keys.iter().zip(&pi).filter(|(k, _)| !checkpoints_up(k)).map(|(_, p)| p).sum();
        let got = unavailability(&g, &a);
        assert!((got - expected).abs() <= 1e-10 * expected, "v={visible}: {got} vs {expected}");
    }
}

#[test]
fn fully_visible_checkpoints_chain_is_small() {
    // with visibility 1 only Error_Free/FailedVisible occur: at most 4 error
    // combinations in 2 modes
    let (oracle, _) = oracle_chain(&Checkpoints { comp: Comp { visible: 1.0, ..default_replica() } });
    assert!(oracle.len() <= 8);
    let mut p = PatternParams::new(PatternKind::Checkpoints);
    p.visibility = 1.0;
    let a = run(&instantiate_pattern(&p).unwrap());
    assert_eq!(a.ctmc.len(), oracle.len());
}

fn swap_key(k: &Key) -> Key {
    let mut out: Key = k
        .iter()
        .map(|l| {
            l.replace("Comp1", "#")
                .replace("Comp2", "Comp1")
                .replace('#', "Comp2")
        })
        .collect();
    out.sort();
    out
}

#[test]
fn checkpoints_chain_is_symmetric_under_replica_swap() {
    let (_, a) = pattern(PatternKind::Checkpoints);
    let map = ctmc_rate_map(&a);
    for (k, row) in &map {
        let sk = swap_key(k);
        let other = map.get(&sk).unwrap_or_else(|| panic!("no mirror of {k:?}"));
        for (t, r) in row {
            let mirrored = other.get(&swap_key(t)).copied().unwrap_or(0.0);
            assert!((r - mirrored).abs() <= 1e-15 * r, "{k:?}->{t:?}");
        }
    }
}

#[test]
fn generated_models_equal_fixture_listings() {
    let lib = ErrorLibrary::bundled();
    let cases = [
        (PatternKind::Checkpoints, vec!["checkpoints.aadl"]),
        (PatternKind::Controller, vec!["controller.aadl", "controller_system.aadl"]),
        (PatternKind::Mutual, vec!["mutual.aadl", "mutual_system.aadl"]),
    ];
    for (kind, files) in cases {
        let (g, generated) = pattern(kind);
        let decls = parse_fixtures(&files);
        assert!(validate_with_library(&decls, &lib).is_empty());
        let listed = analyze(&decls, &g.root, &lib, &Default::default(), &ExpandConfig::default()).unwrap();
        assert_eq!(generated.bound.instances.instances.len(), listed.bound.instances.instances.len());
        assert_eq!(generated.bound.instances.connections.len(), listed.bound.instances.connections.len());
        assert_isomorphic(&ctmc_rate_map(&generated), &ctmc_rate_map(&listed), 1e-12);
    }
}

#[test]
fn mutual_has_the_listed_modes_and_guard() {
    let (g, a) = pattern(PatternKind::Mutual);
    assert!(g.text.contains("self[Failed]"));
    assert!(g.text.contains("applies to self.IFailed"));
    let owners = &a.bound.instances.mode_owners;
    assert_eq!(owners.len(), 2);
    for o in owners {
        let mut modes: Vec<&str> = o.modes.iter().map(String::as_str).collect();
        modes.sort();
        assert_eq!(modes, ["primary", "reboot", "standby"]);
    }
}

#[test]
fn role_overrides_reach_every_replica() {
    let g = instantiate_pattern(&PatternParams::new(PatternKind::Controller)).unwrap();
    let ov = g.role_overrides("software.Fail", 2e-3).unwrap();
    assert_eq!(ov.len(), 2);
    let ov = g.role_overrides("controller.Fail", 1e-5).unwrap();
    assert_eq!(ov.len(), 1);
    assert!(g.role_overrides("nobody.Fail", 1.0).is_err());
}

#[test]
fn invalid_parameters_are_rejected() {
    let mut p = PatternParams::new(PatternKind::Checkpoints);
    p.visibility = 1.5;
    assert!(instantiate_pattern(&p).is_err());
    let mut p = PatternParams::new(PatternKind::Mutual);
    p.lambda = -1.0;
    assert!(instantiate_pattern(&p).is_err());
}

/// A visibly failed primary next to a healthy standby, in a tangible state.
fn stuck_takeover(k: &Key) -> bool {
    let c1_primary = has(k, "Comp1@primary");
    let c2_primary = has(k, "Comp2@primary");
    (c1_primary && !c2_primary && has(k, "Comp1=FailedVisible") && has(k, "Comp2=Error_Free"))
        || (c2_primary && !c1_primary && has(k, "Comp2=FailedVisible") && has(k, "Comp1=Error_Free"))
}

#[test]
fn controller_switches_over_when_it_is_healthy() {
    let mut p = PatternParams::new(PatternKind::Controller);
    p.visibility = 1.0;
    let a = run(&instantiate_pattern(&p).unwrap());
    for k in ctmc_rate_map(&a).keys() {
        if has(k, "Controller=Error_Free") {
            assert!(!stuck_takeover(k), "{k:?}");
        }
    }
}
