//! Generators for the duplex hot-standby patterns and the air traffic
//! control case study.
//!
//! Generators write `.aadl` text and parse it, so the programmatic and the
//! textual paths cannot drift apart. Every generated model comes with a
//! default `up` measure and a table of parameter roles (`software`, `bus`,
//! ...) mapping to the instances whose occurrences a role addresses.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::binding::OccurrenceOverrides;
use crate::error::{Error, Result};
use crate::model::DeclarationSet;
use crate::parser::parse_aadl;
use crate::statespace::{parse_measure, Measure};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatternKind {
    Checkpoints,
    Controller,
    Mutual,
}

impl PatternKind {
    pub const ALL: [PatternKind; 3] = [PatternKind::Checkpoints, PatternKind::Controller, PatternKind::Mutual];

    pub fn name(self) -> &'static str {
        match self {
            PatternKind::Checkpoints => "checkpoints",
            PatternKind::Controller => "controller",
            PatternKind::Mutual => "mutual",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternParams {
    pub kind: PatternKind,
    /// Software failure rate, per hour.
    pub lambda: f64,
    /// Software restart rate, per hour.
    pub mu: f64,
    /// Probability that a failure is visible.
    pub visibility: f64,
    /// Controller failure rate (controller pattern only).
    pub controller_lambda: f64,
    /// Replicas are named `<prefix>1` and `<prefix>2`.
    pub prefix: String,
}

impl PatternParams {
    pub fn new(kind: PatternKind) -> Self {
        PatternParams { kind, lambda: 1e-3, mu: 1.0, visibility: 0.9, controller_lambda: 1e-6, prefix: "Comp".into() }
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("mu", self.mu)?;
        positive("controller_lambda", self.controller_lambda)?;
        probability("visibility", self.visibility)?;
        identifier("prefix", &self.prefix)
    }
}

fn positive(what: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{what} must be a positive rate, got {x}")))
    }
}

fn probability(what: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{what} must lie in [0, 1], got {x}")))
    }
}

fn identifier(what: &str, s: &str) -> Result<()> {
    let ok = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{what} `{s}` is not an identifier")))
    }
}

/// A generated model: declarations, their text, the root to instantiate,
/// the default `up` measure and parameter roles.
#[derive(Debug, Clone)]
pub struct GeneratedModel {
    pub name: String,
    pub text: String,
    pub declarations: DeclarationSet,
    pub root: String,
    pub up_measure: Measure,
    /// Role → instance paths.
    pub roles: BTreeMap<String, Vec<String>>,
}

impl GeneratedModel {
    fn new(name: String, text: String, root: &str, up: &str, roles: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let declarations = parse_aadl(&text, &format!("<{name}>"))?;
        let up_measure = parse_measure(up)?;
        Ok(GeneratedModel { name, text, declarations, root: root.to_string(), up_measure, roles })
    }

    /// `.aadl` text of the declarations.
    pub fn emit_aadl(&self) -> String {
        self.text.clone()
    }

    /// Overrides setting `role.item` (e.g. `bus.Fail`) to `value` on every
    /// instance of the role.
    pub fn role_overrides(&self, parameter: &str, value: f64) -> Result<OccurrenceOverrides> {
        let (role, item) = parameter
            .split_once('.')
            .ok_or_else(|| Error::InvalidParams(format!("parameter `{parameter}` is not of the form role.item")))?;
        let paths = self
            .roles
            .iter()
            .find(|(r, _)| r.eq_ignore_ascii_case(role))
            .map(|(_, p)| p)
            .ok_or_else(|| {
                let known: Vec<&str> = self.roles.keys().map(String::as_str).collect();
                Error::InvalidParams(format!("unknown role `{role}` (known: {})", known.join(", ")))
            })?;
        Ok(paths.iter().map(|p| ((p.clone(), item.to_string()), value)).collect())
    }
}

fn annex_occurrences(out: &mut String, lambda: f64, mu: f64, visibility: f64) {
    let _ = writeln!(out, "  Model => independent.general;");
    let _ = writeln!(out, "  Occurrence => poisson {lambda} applies to error Fail;");
    let _ = writeln!(out, "  Occurrence => poisson {mu} applies to error Restart;");
    let _ = writeln!(out, "  Occurrence => fixed {visibility} applies to error FailedVisible;");
}

const HOT_STANDBY_TYPE: &str = "\
system HotStandBy
features
  sysInput: in event data port;
  sysOutput: out event data port;
end HotStandBy;
";

fn primary_up(path_prefix: &str, mode_owner: &str, c: [&str; 2]) -> String {
    format!(
        "(mode({mode_owner}) == {a}Primary and state({path_prefix}{a}) in {{Error_Free}}) or \
         (mode({mode_owner}) == {b}Primary and state({path_prefix}{b}) in {{Error_Free}})",
        a = c[0],
        b = c[1]
    )
}

fn checkpoint_thread(out: &mut String, p: &PatternParams, nominal: bool) {
    let name = if nominal { "nominal" } else { "generic" };
    let _ = writeln!(out, "thread implementation software.{name}");
    let _ = writeln!(out, "annex Error_Model {{**");
    annex_occurrences(out, p.lambda, p.mu, p.visibility);
    if nominal {
        // the nominal replica also takes the lead back once both are healthy
        let _ = writeln!(
            out,
            "  Guard_Event => (Receive[FailedVisible] and self[Error_Free]) or (Receive[Error_Free] and self[Error_Free])\n    applies to IAmPrim;"
        );
    } else {
        let _ = writeln!(out, "  Guard_Event => (Receive[FailedVisible] and self[Error_Free])\n    applies to IAmPrim;");
    }
    let _ = writeln!(out, "**}};\nend software.{name};\n");
}

const CHECKPOINT_THREAD_TYPE: &str = "\
thread software
features
  Snd: out data port;
  Receive: in data port;
  Input: in event data port;
  Output: out event data port;
  IAmPrim: out event port;
end software;
";

/// Body of a checkpoint-pattern system implementation. With `modal_input`
/// only the primary replica receives the system input.
fn checkpoint_system(out: &mut String, ty: &str, imp: &str, c: [&str; 2], first_impl: &str, modal_input: bool) {
    let [a, b] = c;
    let _ = writeln!(out, "system implementation {ty}.{imp}");
    let _ = writeln!(out, "subcomponents\n  {a}: thread software.{first_impl};\n  {b}: thread software.generic;");
    let _ = writeln!(out, "connections");
    let _ = writeln!(out, "  data port {a}.Snd->{b}.Receive\n  in modes {a}Primary;");
    let _ = writeln!(out, "  data port {b}.Snd->{a}.Receive\n  in modes {b}Primary;");
    for x in [a, b] {
        let cond = if modal_input { format!("\n  in modes {x}Primary") } else { String::new() };
        let _ = writeln!(out, "  event data port sysInput->{x}.Input{cond};");
    }
    let _ = writeln!(out, "  event data port {a}.Output->sysOutput\n  in modes {a}Primary;");
    let _ = writeln!(out, "  event data port {b}.Output->sysOutput\n  in modes {b}Primary;");
    let _ = writeln!(out, "modes\n  {a}Primary: initial mode;\n  {b}Primary: mode;");
    let _ = writeln!(out, "  {a}Primary -[{b}.IAmPrim]->{b}Primary;");
    let _ = writeln!(out, "  {b}Primary -[{a}.IAmPrim]->{a}Primary;");
    let _ = writeln!(out, "end {ty}.{imp};\n");
}

fn software_roles(paths: impl IntoIterator<Item = String>) -> BTreeMap<String, Vec<String>> {
    BTreeMap::from([("software".to_string(), paths.into_iter().collect())])
}

/// Hot-standby duplex following one of the three detection schemes.
pub fn instantiate_pattern(p: &PatternParams) -> Result<GeneratedModel> {
    p.validate()?;
    let c1 = format!("{}1", p.prefix);
    let c2 = format!("{}2", p.prefix);
    let c = [c1.as_str(), c2.as_str()];
    let mut t = String::new();
    let mut roles = software_roles([c1.clone(), c2.clone()]);
    let up = match p.kind {
        PatternKind::Checkpoints => {
            t.push_str(CHECKPOINT_THREAD_TYPE);
            t.push('\n');
            checkpoint_thread(&mut t, p, false);
            t.push_str(HOT_STANDBY_TYPE);
            t.push('\n');
            checkpoint_system(&mut t, "HotStandBy", "checkpoints", c, "generic", false);
            primary_up("", "", c)
        }
        PatternKind::Controller => {
            controller_text(&mut t, p, c);
            replica_up(c)
        }
        PatternKind::Mutual => {
            mutual_text(&mut t, p, c);
            replica_up(c)
        }
    };
    if p.kind == PatternKind::Controller {
        roles.insert("controller".into(), vec!["Controller".into()]);
    }
    let root = format!("HotStandBy.{}", p.kind.name());
    GeneratedModel::new(format!("pattern:{}", p.kind.name()), t, &root, &up, roles)
}

/// Some replica is in mode primary and error free.
fn replica_up(c: [&str; 2]) -> String {
    format!(
        "(mode({a}) == primary and state({a}) in {{Error_Free}}) or (mode({b}) == primary and state({b}) in {{Error_Free}})",
        a = c[0],
        b = c[1]
    )
}

fn modal_replica(out: &mut String, p: &PatternParams, name: &str, modes: &str, guards: &str) {
    let _ = writeln!(out, "thread implementation software.{name}\nmodes\n{modes}annex Error_Model {{**");
    annex_occurrences(out, p.lambda, p.mu, p.visibility);
    let _ = writeln!(out, "{guards}**}};\nend software.{name};\n");
}

fn controller_text(t: &mut String, p: &PatternParams, c: [&str; 2]) {
    let [a, b] = c;
    t.push_str(
        "thread software
features
  InStandby: in event port;
  BePrim: in event port;
  Input: in event data port;
  Output: out event data port;
  toController: out event port;
end software;

",
    );
    for (name, pm, sm) in [("primary", "initial ", ""), ("standby", "", "initial ")] {
        let modes = format!(
            "  primary: {pm}mode;\n  standby: {sm}mode;\n  primary-[InStandby]->standby;\n  standby-[BePrim]->primary;\n"
        );
        modal_replica(t, p, name, &modes, "");
    }
    let _ = write!(
        t,
        "system controller
features
  fromC1, fromC2: in event port;
  Prim1, Prim2: out event port;
end controller;

system implementation controller.generic
annex Error_Model {{**
  Model => independent.general;
  Occurrence => poisson {cl} applies to error Fail;
  Guard_Event =>
    fromC1[FailedVisible] and fromC2[Error_Free] and self[Error_Free]
    applies to Prim2;
  Guard_Event =>
    fromC2[FailedVisible] and fromC1[Error_Free] and self[Error_Free]
    applies to Prim1;
**}};
end controller.generic;

",
        cl = p.controller_lambda
    );
    t.push_str(HOT_STANDBY_TYPE);
    // The controller watches both replicas and tells each which mode to
    // take; either replica may feed the system output.
    let _ = write!(
        t,
        "
system implementation HotStandBy.controller
subcomponents
  {a}: thread software.primary;
  {b}: thread software.standby;
  Controller: system controller.generic;
connections
  event port {a}.toController->Controller.fromC1;
  event port {b}.toController->Controller.fromC2;
  event port Controller.Prim1->{a}.BePrim;
  event port Controller.Prim1->{b}.InStandby;
  event port Controller.Prim2->{b}.BePrim;
  event port Controller.Prim2->{a}.InStandby;
  event data port sysInput->{a}.Input;
  event data port sysInput->{b}.Input;
  event data port {a}.Output->sysOutput;
  event data port {b}.Output->sysOutput;
end HotStandBy.controller;
"
    );
}

fn mutual_text(t: &mut String, p: &PatternParams, c: [&str; 2]) {
    let [a, b] = c;
    t.push_str(
        "thread software
features
  Input: in event data port;
  Output: out event data port;
  fromReplica: in event data port;
end software;

",
    );
    let guards = "  Guard_Event => self[Failed]
    applies to self.IFailed;
  Guard_Event => fromReplica[FailedVisible] and self[Error_Free]
    applies to self.IPrim;
  Guard_Event => fromReplica[Error_Free] and self[Error_Free]
    applies to self.IStandby;
";
    let transitions = "  primary-[self.IFailed]->reboot;
  standby-[self.IFailed]->reboot;
  reboot-[self.IPrim]->primary;
  reboot-[self.IStandby]->standby;
  standby-[self.IPrim]->primary;
";
    modal_replica(t, p, "primary", &format!("  primary: initial mode;\n  standby, reboot: mode;\n{transitions}"), guards);
    modal_replica(t, p, "standby", &format!("  standby: initial mode;\n  primary, reboot: mode;\n{transitions}"), guards);
    t.push_str(HOT_STANDBY_TYPE);
    // each replica observes the other's output
    let _ = write!(
        t,
        "
system implementation HotStandBy.mutual
subcomponents
  {a}: thread software.primary;
  {b}: thread software.standby;
connections
  event data port {a}.Output->{b}.fromReplica;
  event data port {b}.Output->{a}.fromReplica;
  event data port sysInput->{a}.Input;
  event data port sysInput->{b}.Input;
  event data port {a}.Output->sysOutput;
  event data port {b}.Output->sysOutput;
end HotStandBy.mutual;
"
    );
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtcConfiguration {
    /// RD replicas on the processors opposite to their FP counterparts.
    One,
    /// RD replicas next to their FP counterparts.
    Two,
}

impl AtcConfiguration {
    pub fn number(self) -> u8 {
        match self {
            AtcConfiguration::One => 1,
            AtcConfiguration::Two => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(AtcConfiguration::One),
            2 => Some(AtcConfiguration::Two),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtcParams {
    pub configuration: AtcConfiguration,
    pub lambda: f64,
    pub mu: f64,
    pub visibility: f64,
    pub processor_lambda: f64,
    pub processor_mu: f64,
    pub bus_lambda: f64,
    pub bus_mu: f64,
    /// Replica 1 of each unit takes the primary role back once both
    /// replicas are healthy, so each unit spends its up time in its
    /// nominal placement.
    pub nominal_reclaim: bool,
}

impl AtcParams {
    pub fn new(configuration: AtcConfiguration) -> Self {
        AtcParams {
            configuration,
            lambda: 1e-3,
            mu: 1.0,
            visibility: 0.9,
            processor_lambda: 1e-4,
            processor_mu: 0.1,
            bus_lambda: 1e-5,
            bus_mu: 0.5,
            nominal_reclaim: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive("lambda", self.lambda)?;
        positive("mu", self.mu)?;
        probability("visibility", self.visibility)?;
        positive("processor_lambda", self.processor_lambda)?;
        positive("processor_mu", self.processor_mu)?;
        positive("bus_lambda", self.bus_lambda)?;
        positive("bus_mu", self.bus_mu)
    }

    /// Processor (1 or 2) hosting replica `i` (1 or 2) of each unit.
    pub fn placement(&self) -> ([u8; 2], [u8; 2]) {
        let fp = [1, 2];
        let rd = match self.configuration {
            AtcConfiguration::One => [2, 1],
            AtcConfiguration::Two => [1, 2],
        };
        (fp, rd)
    }
}

/// Flight-plan and radar-data units, each a checkpoint duplex, on two
/// processors linked by a bus.
pub fn build_atc_model(p: &AtcParams) -> Result<GeneratedModel> {
    p.validate()?;
    let sw = PatternParams { lambda: p.lambda, mu: p.mu, visibility: p.visibility, ..PatternParams::new(PatternKind::Checkpoints) };
    let c = ["Comp1", "Comp2"];
    let first = if p.nominal_reclaim { "nominal" } else { "generic" };
    let mut t = String::new();
    t.push_str(CHECKPOINT_THREAD_TYPE);
    t.push('\n');
    checkpoint_thread(&mut t, &sw, false);
    if p.nominal_reclaim {
        checkpoint_thread(&mut t, &sw, true);
    }
    t.push_str(
        "system Unit
features
  sysInput: in event data port;
  sysOutput: out event data port;
end Unit;

",
    );
    checkpoint_system(&mut t, "Unit", "fp", c, first, false);
    // only the RD primary takes FP data, so exactly one FP→RD link is live
    checkpoint_system(&mut t, "Unit", "rd", c, first, true);
    let _ = write!(
        t,
        "processor cpu
end cpu;

processor implementation cpu.generic
annex Error_Model {{**
  Model => independent.general;
  Occurrence => poisson {pl} applies to error Fail;
  Occurrence => poisson {pm} applies to error Restart;
**}};
end cpu.generic;

bus network
end network;

bus implementation network.generic
annex Error_Model {{**
  Model => independent.general;
  Occurrence => poisson {bl} applies to error Fail;
  Occurrence => poisson {bm} applies to error Restart;
**}};
end network.generic;

system ATC
end ATC;

",
        pl = p.processor_lambda,
        pm = p.processor_mu,
        bl = p.bus_lambda,
        bm = p.bus_mu
    );
    let n = p.configuration.number();
    let (fp, rd) = p.placement();
    let _ = writeln!(
        t,
        "system implementation ATC.configuration{n}
subcomponents
  FPunit: system Unit.fp;
  RDunit: system Unit.rd;
  Processor1: processor cpu.generic;
  Processor2: processor cpu.generic;
  Bus: bus network.generic;
connections
  fp2rd: event data port FPunit.sysOutput->RDunit.sysInput;
properties"
    );
    for (unit, place) in [("FPunit", fp), ("RDunit", rd)] {
        for (k, proc) in place.iter().enumerate() {
            let _ = writeln!(
                t,
                "  Actual_Processor_Binding => reference (Processor{proc}) applies to {unit}.Comp{};",
                k + 1
            );
        }
    }
    let _ = writeln!(t, "  Actual_Connection_Binding => reference (Bus) applies to fp2rd;");
    let _ = writeln!(t, "end ATC.configuration{n};");

    // the live FP→RD link crosses the bus when the two primaries sit on
    // different processors
    let mut crossing = Vec::new();
    for i in 0..2 {
        for j in 0..2 {
            if fp[i] != rd[j] {
                crossing.push(format!(
                    "(mode(FPunit) == Comp{}Primary and mode(RDunit) == Comp{}Primary)",
                    i + 1,
                    j + 1
                ));
            }
        }
    }
    let up = format!(
        "({fp_up}) and ({rd_up}) and not (state(Bus) in {{Failed}} and ({cross}))",
        fp_up = primary_up("FPunit.", "FPunit", c),
        rd_up = primary_up("RDunit.", "RDunit", c),
        cross = crossing.join(" or ")
    );
    let roles = BTreeMap::from([
        ("software".to_string(), ["FPunit.Comp1", "FPunit.Comp2", "RDunit.Comp1", "RDunit.Comp2"].map(String::from).to_vec()),
        ("processor".to_string(), vec!["Processor1".into(), "Processor2".into()]),
        ("bus".to_string(), vec!["Bus".into()]),
    ]);
    GeneratedModel::new(format!("atc:configuration{n}"), t, &format!("ATC.configuration{n}"), &up, roles)
}
