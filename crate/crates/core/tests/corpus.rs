mod common;

use archdep::annex::{parse_annex_syntax, Occurrence};
use archdep::binding::OccurrenceOverrides;
use archdep::errlib::ErrorLibrary;
use archdep::instance::resolve_instance;
use archdep::parser::parse_aadl;
use archdep::pipeline::bind;
use archdep::validate::{validate, validate_with_library};
use common::*;

fn no_diagnostics(files: &[&str]) {
    let decls = parse_fixtures(files);
    let diags = validate_with_library(&decls, &ErrorLibrary::bundled());
    assert!(diags.is_empty(), "{files:?}: {diags:?}");
}

#[test]
fn listings_validate_cleanly() {
    no_diagnostics(&["checkpoints.aadl"]);
    no_diagnostics(&["controller.aadl"]);
    no_diagnostics(&["mutual.aadl"]);
    no_diagnostics(&["controller.aadl", "controller_system.aadl"]);
    no_diagnostics(&["mutual.aadl", "mutual_system.aadl"]);
}

#[test]
fn checkpoint_listing_structure() {
    let d = parse_fixtures(&["checkpoints.aadl"]);
    let software = d.component_type("software").unwrap();
    assert_eq!(software.features.len(), 5);
    let sys = d.implementation("HotStandBy.checkpoints").unwrap();
    let modes = sys.modes.as_ref().unwrap();
    assert_eq!(modes.modes.len(), 2);
    assert_eq!(modes.transitions.len(), 2);
    assert_eq!(modes.modes[0].name, "Comp1Primary");
    assert!(modes.modes[0].initial && !modes.modes[1].initial);
    assert_eq!(sys.connections.len(), 6);
    assert_eq!(sys.subcomponents.len(), 2);
}

#[test]
fn mutual_listing_structure() {
    let d = parse_fixtures(&["mutual.aadl"]);
    let imp = d.implementation("software.primary").unwrap();
    let modes = imp.modes.as_ref().unwrap();
    assert_eq!(modes.modes.len(), 3);
    assert_eq!(modes.transitions.len(), 5);
    let annex = parse_annex_syntax(imp.annex.as_ref().unwrap()).unwrap();
    assert_eq!(annex.guard_events.len(), 3);
    assert_eq!(annex.model_ref, "independent.general");
    assert_eq!(annex.guard_events[0].target, "self.IFailed");
}

#[test]
fn controller_listing_annexes() {
    let d = parse_fixtures(&["controller.aadl"]);
    let thread = parse_annex_syntax(d.implementation("software.primary").unwrap().annex.as_ref().unwrap()).unwrap();
    let occ: Vec<(Occurrence, &str)> = thread.occurrences.iter().map(|o| (o.occurrence, o.target.as_str())).collect();
    assert_eq!(occ, [(Occurrence::Fixed(0.9), "FailedVisible"), (Occurrence::Poisson(1e-3), "Fail")]);
    let ctl = parse_annex_syntax(d.implementation("controller.generic").unwrap().annex.as_ref().unwrap()).unwrap();
    assert_eq!(ctl.occurrences.len(), 1);
    assert_eq!(ctl.occurrences[0].occurrence, Occurrence::Poisson(1e-6));
    let targets: Vec<&str> = ctl.guard_events.iter().map(|g| g.target.as_str()).collect();
    assert_eq!(targets, ["Prim2", "Prim1"]);
    assert_eq!(ctl.guard_events[0].expr.atoms().len(), 3);
}

#[test]
fn empty_input_is_valid() {
    let d = parse_aadl("", "<empty>").unwrap();
    assert!(d.is_empty());
    assert!(validate(&d).is_empty());
}

#[test]
fn checkpoint_instance_model() {
    let d = parse_fixtures(&["checkpoints.aadl"]);
    let im = resolve_instance(&d, "HotStandBy.checkpoints").unwrap();
    assert_eq!(im.instances.len(), 3);
    assert_eq!(im.connections.len(), 6);
    assert_eq!(im.mode_owners.len(), 1);
    assert_eq!(im.mode_owners[0].modes.len(), 2);
    let port = |c: usize| (im.port_name(&im.connections[c].source), im.port_name(&im.connections[c].destination));
    let active = |mode: usize| -> Vec<(String, String)> {
        im.active_connections(&[mode]).unwrap().into_iter().map(port).collect()
    };
    let m1 = active(0);
    let has = |set: &[(String, String)], a: &str, b: &str| set.iter().any(|(x, y)| x == a && y == b);
    assert!(has(&m1, "Comp1.Snd", "Comp2.Receive"));
    assert!(!has(&m1, "Comp2.Snd", "Comp1.Receive"));
    let m2 = active(1);
    assert!(has(&m2, "Comp2.Output", "sysOutput") || has(&m2, "Comp2.Output", "HotStandBy.sysOutput"), "{m2:?}");
    assert!(!m2.iter().any(|(s, _)| s == "Comp1.Output"));
}

#[test]
fn trivial_system_instance() {
    let d = parse_aadl("system S\nend S;\nsystem implementation S.i\nend S.i;\n", "<t>").unwrap();
    let im = resolve_instance(&d, "S.i").unwrap();
    assert_eq!(im.instances.len(), 1);
    assert!(im.connections.is_empty());
    assert_eq!(im.active_connections(&[]).unwrap().len(), 0);
}

#[test]
fn occurrence_overrides_bind_per_instance() {
    let d = parse_fixtures(&["controller.aadl", "controller_system.aadl"]);
    let lib = ErrorLibrary::bundled();
    let bound = bind(&d, "HotStandBy.controller", &lib, &OccurrenceOverrides::new()).unwrap();
    let of = |path: &str| &bound.errors[bound.error_of[bound.instances.find(path).unwrap()].unwrap()];
    let c1 = of("Comp1");
    let fail = c1.model.event_index("Fail").unwrap();
    assert_eq!(c1.rates[fail], 1e-3);
    assert_eq!(of("Controller").rates[fail], 1e-6);

    let mut ov = OccurrenceOverrides::new();
    ov.insert(("Comp2".into(), "FailedVisible".into()), 0.5);
    ov.insert(("comp2".into(), "restart".into()), 0.25);
    let bound = bind(&d, "HotStandBy.controller", &lib, &ov).unwrap();
    let c2 = &bound.errors[bound.error_of[bound.instances.find("Comp2").unwrap()].unwrap()];
    assert_eq!(c2.rates[c2.model.event_index("Restart").unwrap()], 0.25);
    assert!(format!("{:?}", c2.transitions).contains("0.5"));

    let mut bad = OccurrenceOverrides::new();
    bad.insert(("Nobody".into(), "Fail".into()), 1.0);
    assert!(bind(&d, "HotStandBy.controller", &lib, &bad).is_err());
}

fn diagnostics(text: &str) -> Vec<String> {
    let d = parse_aadl(text, "<t>").unwrap();
    validate_with_library(&d, &ErrorLibrary::bundled()).into_iter().map(|d| d.to_string()).collect()
}

#[test]
fn two_initial_modes_are_diagnosed() {
    let text = fixture("checkpoints.aadl").replace("Comp2Primary: mode;", "Comp2Primary: initial mode;");
    let diags = diagnostics(&text);
    assert!(diags.iter().any(|d| d.contains("multiple initial modes")), "{diags:?}");
}

#[test]
fn fixed_probability_out_of_range_is_diagnosed() {
    let text = fixture("controller.aadl").replacen("fixed 0.9", "fixed 1.3", 1);
    let diags = diagnostics(&text);
    assert!(diags.iter().any(|d| d.contains("probability out of range")), "{diags:?}");
}

#[test]
fn dangling_and_misdirected_connections_are_diagnosed() {
    let text = fixture("checkpoints.aadl").replace("Comp1.Snd->Comp2.Receive", "Comp1.Snd->Comp2.Nowhere");
    assert!(diagnostics(&text).iter().any(|d| d.contains("dangling connection endpoint")));
    let text = fixture("checkpoints.aadl").replace("Comp1.Snd->Comp2.Receive", "Comp1.Receive->Comp2.Snd");
    assert!(diagnostics(&text).iter().any(|d| d.contains("cannot be a connection")));
}

#[test]
fn unknown_guard_state_is_diagnosed() {
    let text = fixture("checkpoints.aadl").replace("Receive[FailedVisible]", "Receive[Broken]");
    let diags = diagnostics(&text);
    assert!(diags.iter().any(|d| d.contains("neither a state nor an alias")), "{diags:?}");
}

#[test]
fn diagnostics_carry_positions() {
    let text = fixture("checkpoints.aadl").replace("Comp2Primary: mode;", "Comp2Primary: initial mode;");
    let d = diagnostics(&text);
    assert!(d[0].starts_with("<t>:"), "{d:?}");
}

#[test]
fn syntax_errors_report_line_and_column() {
    let err = parse_aadl("thread t\nfeatures\n  p: sideways port;\nend t;\n", "x.aadl").unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("x.aadl:3"), "{msg}");
}
