mod common;

use archdep::errlib::ErrorLibrary;
use archdep::patterns::{instantiate_pattern, PatternKind, PatternParams};
use archdep::pipeline::analyze;
use archdep::sim::*;
use archdep::solver::{eval_measure, steady_state, SolverConfig};
use archdep::statespace::{parse_measure, ExpandConfig};
use common::*;

const TWO_STATE: &str = "\
thread t
end t;
thread implementation t.i
annex Error_Model {**
  Model => simple.general;
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
fn two_state_estimate_matches_closed_form() {
    let a = analyze_text(TWO_STATE, "S.i", &library("two_state.errlib"));
    let down = parse_measure("state(c) in {Failed}").unwrap().resolve(&a.bound).unwrap();
    let est = simulate(&a.sts, &down, &SimConfig::new(1e5, 100, 42)).unwrap();
    let expected = 1e-3 / (1e-3 + 1.0);
    assert!((est.estimate - expected).abs() <= 3.0 * est.std_error, "{est:?}");
    assert_eq!(est.replications, 100);
    assert!((est.half_width - 1.96 * est.std_error).abs() < 1e-18);
}

#[test]
fn failure_count_matches_renewal_expectation() {
    let (lambda, mu, horizon) = (1e-3, 1.0, 1e6);
    let a = analyze_text(TWO_STATE, "S.i", &library("two_state.errlib"));
    let trace = sample_trajectory(&a.sts, horizon, &mut replication_rng(7, 0));
    let fails = trace.events.iter().filter(|e| a.sts.states[e.state].global.errors[0] == 1).count() as f64;
    // alternating renewal process: cycle mean m, variance v
    let m = 1.0 / lambda + 1.0 / mu;
    let v = 1.0 / (lambda * lambda) + 1.0 / (mu * mu);
    let mean = horizon / m;
    let sd = (horizon * v / (m * m * m)).sqrt();
    assert!((fails - mean).abs() <= 3.0 * sd, "{fails} vs {mean} ± {sd}");
}

#[test]
fn traces_alternate_and_stay_in_the_horizon() {
    let a = analyze_text(TWO_STATE, "S.i", &library("two_state.errlib"));
    let trace = sample_trajectory(&a.sts, 1e5, &mut replication_rng(3, 1));
    let mut prev = trace.initial;
    let mut t = 0.0;
    for e in &trace.events {
        assert!(e.time > t && e.time <= 1e5);
        assert_ne!(e.state, prev);
        assert!(a.sts.timed.iter().any(|x| x.from == prev && x.to == e.state));
        assert!(e.cause.is_some());
        prev = e.state;
        t = e.time;
    }
}

#[test]
fn same_seed_same_trace() {
    let g = instantiate_pattern(&PatternParams::new(PatternKind::Controller)).unwrap();
    let a = analyze(&g.declarations, &g.root, &ErrorLibrary::bundled(), &Default::default(), &ExpandConfig::default()).unwrap();
    let one = sample_trajectory(&a.sts, 1e5, &mut replication_rng(11, 4));
    let two = sample_trajectory(&a.sts, 1e5, &mut replication_rng(11, 4));
    assert_eq!(format!("{one:?}"), format!("{two:?}"));
    let other = sample_trajectory(&a.sts, 1e5, &mut replication_rng(11, 5));
    assert_ne!(format!("{one:?}"), format!("{other:?}"));

    let up = g.up_measure.resolve(&a.bound).unwrap();
    let cfg = SimConfig::new(1e4, 16, 9);
    assert_eq!(simulate(&a.sts, &up, &cfg).unwrap(), simulate(&a.sts, &up, &cfg).unwrap());
}

#[test]
fn event_free_model_gives_an_empty_trace_and_full_availability() {
    let text = TWO_STATE.replace("simple.general", "perfect.general");
    let a = analyze_text(&text, "S.i", &library("degenerate.errlib"));
    let trace = sample_trajectory(&a.sts, 1e5, &mut replication_rng(1, 0));
    assert!(trace.events.is_empty());
    let up = parse_measure("state(c) in {Error_Free}").unwrap().resolve(&a.bound).unwrap();
    let est = simulate(&a.sts, &up, &SimConfig::new(1e5, 10, 1)).unwrap();
    assert_eq!(est.estimate, 1.0);
    assert_eq!(est.half_width, 0.0);
}

#[test]
fn patterns_agree_with_the_solver() {
    for kind in PatternKind::ALL {
        let g = instantiate_pattern(&PatternParams::new(kind)).unwrap();
        let a = analyze(&g.declarations, &g.root, &ErrorLibrary::bundled(), &Default::default(), &ExpandConfig::default())
            .unwrap();
        let up = g.up_measure.resolve(&a.bound).unwrap();
        let pi = steady_state(&a.ctmc, &SolverConfig::default()).unwrap();
        let analytic = eval_measure(&up, &a.ctmc, &pi);
        let est = simulate(&a.sts, &up, &SimConfig::new(1e5, 100, 42)).unwrap();
        assert!((est.estimate - analytic).abs() <= 3.0 * est.std_error, "{kind:?}: {est:?} vs {analytic}");
    }
}

#[test]
fn single_replication_has_zero_spread_and_bad_configs_fail() {
    let a = analyze_text(TWO_STATE, "S.i", &library("two_state.errlib"));
    let up = parse_measure("true").unwrap().resolve(&a.bound).unwrap();
    let est = simulate(&a.sts, &up, &SimConfig::new(10.0, 1, 0)).unwrap();
    assert_eq!((est.estimate, est.std_error), (1.0, 0.0));
    assert!(simulate(&a.sts, &up, &SimConfig::new(-1.0, 1, 0)).is_err());
    assert!(simulate(&a.sts, &up, &SimConfig::new(1.0, 0, 0)).is_err());
    let warm = SimConfig { warmup: 2.0, ..SimConfig::new(1.0, 1, 0) };
    assert!(simulate(&a.sts, &up, &warm).is_err());
}
