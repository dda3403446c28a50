mod output;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use archdep::binding::OccurrenceOverrides;
use archdep::errlib::{load_error_library, ErrorLibrary};
use archdep::model::DeclarationSet;
use archdep::parser::parse_aadl;
use archdep::patterns::{build_atc_model, instantiate_pattern, AtcConfiguration, AtcParams, PatternKind, PatternParams};
use archdep::pipeline::{analyze, bind, choose_root, Analysis};
use archdep::sim::{replication_rng, sample_trajectory, simulate, SimConfig, RNG_NAME};
use archdep::solver::{eval_measure, log_space, steady_state, sweep, transient, SolverConfig, SolverMethod};
use archdep::statespace::{error_instance_path, export_ctmc, parse_measure, state_labels, ExpandConfig, Measure, DEFAULT_STATE_CAP};
use archdep::validate::validate_with_library;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use output::{num, Format, OutputTable};

#[derive(Parser)]
#[command(name = "archdep", version, about = "Dependability evaluation of AADL architecture models")]
struct Cli {
    /// Error model library (defaults to the bundled one).
    #[arg(long, global = true)]
    errlib: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the result table here; the run manifest goes next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate model files.
    Check { files: Vec<PathBuf> },
    /// Steady-state (or transient) value of a measure.
    Solve {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Measure expression, a file holding one, or `up`.
        #[arg(long, default_value = "up")]
        measure: String,
        /// Evaluate at this time (hours) instead of in steady state.
        #[arg(long)]
        transient: Option<f64>,
    },
    /// Steady-state measure over a log-spaced parameter grid.
    Sweep {
        #[command(flatten)]
        source: SourceArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = "up")]
        measure: String,
        /// `role.item` for generated models, `instance.path.item` otherwise.
        #[arg(long)]
        param: String,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        #[arg(long, default_value_t = 6)]
        points: usize,
    },
    /// Monte Carlo estimate of interval availability.
    Simulate {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value = "up")]
        measure: String,
        #[arg(long, default_value_t = 1e5)]
        horizon: f64,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long, default_value_t = 0.0)]
        warmup: f64,
        /// Dump the first replication's events, one per line.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        state_cap: usize,
    },
    /// Dump the CTMC (or, with --instance, the instance model).
    Export {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long)]
        instance: bool,
        #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
        state_cap: usize,
    },
}

#[derive(Args)]
struct SourceArgs {
    /// Model files.
    files: Vec<PathBuf>,
    #[arg(long, value_enum, conflicts_with = "atc")]
    pattern: Option<PatternArg>,
    /// ATC candidate architecture (1 or 2).
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    atc: Option<u8>,
    /// Root system implementation of file models.
    #[arg(long)]
    root: Option<String>,
    /// Occurrence override, e.g. `bus.Fail=1e-5` or `Comp1.Restart=0.5`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
    /// ATC: keep whichever replica is primary instead of returning to the
    /// nominal placement.
    #[arg(long)]
    no_reclaim: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum PatternArg {
    Checkpoints,
    Controller,
    Mutual,
}

#[derive(Clone, Copy, Default, ValueEnum)]
enum MethodArg {
    #[default]
    Auto,
    Direct,
    Iterative,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value_t)]
    method: MethodArg,
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iterations: usize,
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    state_cap: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let method = match self.method {
            MethodArg::Auto => SolverMethod::Auto,
            MethodArg::Direct => SolverMethod::Direct,
            MethodArg::Iterative => SolverMethod::Iterative,
        };
        SolverConfig { method, tolerance: self.tolerance, max_iterations: self.max_iterations, epsilon: self.epsilon }
    }
}

enum Failure {
    /// Bad flags or unreadable files.
    Usage(String),
    /// Invalid model or failed analysis.
    Model(String),
}

impl From<archdep::Error> for Failure {
    fn from(e: archdep::Error) -> Self {
        Failure::Model(e.to_string())
    }
}

type CliResult<T> = Result<T, Failure>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn load_library(path: Option<&Path>) -> CliResult<ErrorLibrary> {
    match path {
        None => Ok(ErrorLibrary::bundled()),
        Some(p) => Ok(load_error_library(&read(p)?, &p.display().to_string())?),
    }
}

struct Model {
    decls: DeclarationSet,
    root: String,
    up: Option<Measure>,
    roles: BTreeMap<String, Vec<String>>,
    description: Value,
}

impl SourceArgs {
    fn load(&self) -> CliResult<Model> {
        let chosen = [!self.files.is_empty(), self.pattern.is_some(), self.atc.is_some()];
        if chosen.iter().filter(|x| **x).count() != 1 {
            return Err(Failure::Usage("give exactly one model source: files, --pattern or --atc".into()));
        }
        let generated = if let Some(p) = self.pattern {
            let kind = match p {
                PatternArg::Checkpoints => PatternKind::Checkpoints,
                PatternArg::Controller => PatternKind::Controller,
                PatternArg::Mutual => PatternKind::Mutual,
            };
            Some((instantiate_pattern(&PatternParams::new(kind))?, json!({ "pattern": kind.name() })))
        } else if let Some(n) = self.atc {
            let cfg = AtcConfiguration::from_number(n).expect("range checked by clap");
            let params = AtcParams { nominal_reclaim: !self.no_reclaim, ..AtcParams::new(cfg) };
            Some((build_atc_model(&params)?, json!({ "atc": n, "nominal_reclaim": params.nominal_reclaim })))
        } else {
            None
        };
        if let Some((g, description)) = generated {
            return Ok(Model { decls: g.declarations, root: g.root, up: Some(g.up_measure), roles: g.roles, description });
        }
        let mut decls = DeclarationSet::default();
        for f in &self.files {
            decls.merge(parse_aadl(&read(f)?, &f.display().to_string())?);
        }
        let root = choose_root(&decls, self.root.as_deref())?;
        let files: Vec<String> = self.files.iter().map(|f| f.display().to_string()).collect();
        Ok(Model { decls, root, up: None, roles: BTreeMap::new(), description: json!({ "files": files }) })
    }

    fn settings(&self) -> CliResult<Vec<(String, f64)>> {
        self.set
            .iter()
            .map(|s| {
                let (k, v) = s
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("--set expects PATH=VALUE, got `{s}`")))?;
                let v: f64 = v.trim().parse().map_err(|_| Failure::Usage(format!("--set `{s}`: not a number")))?;
                Ok((k.trim().to_string(), v))
            })
            .collect()
    }
}

impl Model {
    /// Overrides for `path = value`: a role of a generated model, or an
    /// instance path followed by an event or branch-state name.
    fn override_for(&self, path: &str, value: f64, into: &mut OccurrenceOverrides) -> CliResult<()> {
        if let Some((role, item)) = path.split_once('.') {
            if let Some((_, paths)) = self.roles.iter().find(|(r, _)| r.eq_ignore_ascii_case(role)) {
                for p in paths {
                    into.insert((p.clone(), item.to_string()), value);
                }
                return Ok(());
            }
        }
        let (inst, item) = path
            .rsplit_once('.')
            .ok_or_else(|| Failure::Usage(format!("parameter `{path}` is not of the form instance.item")))?;
        into.insert((inst.to_string(), item.to_string()), value);
        Ok(())
    }

    fn overrides(&self, settings: &[(String, f64)]) -> CliResult<OccurrenceOverrides> {
        let mut out = OccurrenceOverrides::new();
        for (k, v) in settings {
            self.override_for(k, *v, &mut out)?;
        }
        Ok(out)
    }

    fn measure(&self, text: &str) -> CliResult<Measure> {
        if text.eq_ignore_ascii_case("up") {
            return self
                .up
                .clone()
                .ok_or_else(|| Failure::Usage("file models have no default `up` measure; pass --measure".into()));
        }
        let path = Path::new(text);
        let expr = if path.is_file() { read(path)? } else { text.to_string() };
        Ok(parse_measure(expr.trim())?)
    }
}

struct Run {
    format: Format,
    out: Option<PathBuf>,
    manifest: Value,
}

impl Run {
    fn emit(&self, table: &OutputTable) -> CliResult<()> {
        let text = table.render(self.format);
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let mut manifest = self.manifest.clone();
        manifest["tool"] = json!("archdep");
        manifest["version"] = json!(env!("CARGO_PKG_VERSION"));
        manifest["timestamp_unix"] = json!(stamp);
        let manifest = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        match &self.out {
            Some(path) => {
                fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
                let mpath = PathBuf::from(format!("{}.manifest.json", path.display()));
                fs::write(&mpath, manifest + "\n").map_err(|e| Failure::Usage(format!("{}: {e}", mpath.display())))?;
            }
            None => {
                print!("{text}");
                eprintln!("{manifest}");
            }
        }
        Ok(())
    }
}

fn cmd_check(files: &[PathBuf], library: &ErrorLibrary) -> CliResult<bool> {
    let mut decls = DeclarationSet::default();
    let mut problems = Vec::new();
    for f in files {
        match parse_aadl(&read(f)?, &f.display().to_string()) {
            Ok(d) => decls.merge(d),
            Err(e) => problems.push(e.to_string()),
        }
    }
    if problems.is_empty() {
        problems.extend(validate_with_library(&decls, library).iter().map(ToString::to_string));
    }
    for p in &problems {
        println!("{p}");
    }
    println!(
        "{} file(s), {} type(s), {} implementation(s), {} diagnostic(s)",
        files.len(),
        decls.types.len(),
        decls.implementations.len(),
        problems.len()
    );
    Ok(problems.is_empty())
}

fn analysis(model: &Model, library: &ErrorLibrary, overrides: &OccurrenceOverrides, cap: usize) -> CliResult<Analysis> {
    Ok(analyze(&model.decls, &model.root, library, overrides, &ExpandConfig { state_cap: cap })?)
}

fn run(cli: Cli) -> CliResult<bool> {
    let library = load_library(cli.errlib.as_deref())?;
    let mut run = Run { format: cli.format, out: cli.out.clone(), manifest: Value::Null };
    match &cli.command {
        Command::Check { files } => cmd_check(files, &library),
        Command::Solve { source, solver, measure, transient: at } => {
            let model = source.load()?;
            let settings = source.settings()?;
            let overrides = model.overrides(&settings)?;
            let m = model.measure(measure)?;
            let cfg = solver.config();
            let a = analysis(&model, &library, &overrides, solver.state_cap)?;
            let resolved = m.resolve(&a.bound)?;
            let (kind, pi) = match at {
                Some(t) => (format!("transient@{}", num(*t)), transient(&a.ctmc, *t, &cfg)?),
                None => ("steady-state".to_string(), steady_state(&a.ctmc, &cfg).map_err(|e| match e {
                    archdep::Error::NonErgodic(why) => {
                        Failure::Model(format!("chain is not ergodic ({why}); a transient analysis (--transient <t>) still applies"))
                    }
                    e => e.into(),
                })?),
            };
            let value = eval_measure(&resolved, &a.ctmc, &pi);
            let mut t = OutputTable::new(&["states", "tangible", "analysis", "measure_value", "unavailability"]);
            t.push(vec![
                a.sts.states.len().to_string(),
                a.ctmc.len().to_string(),
                kind,
                num(value),
                num(1.0 - value),
            ]);
            run.manifest = json!({
                "command": "solve",
                "model": model.description,
                "root": model.root,
                "overrides": settings,
                "measure": m.to_string(),
                "solver": cfg.describe(),
                "transient": at,
            });
            run.emit(&t)?;
            Ok(true)
        }
        Command::Sweep { source, solver, measure, param, from, to, points } => {
            let model = source.load()?;
            let settings = source.settings()?;
            let m = model.measure(measure)?;
            let cfg = solver.config();
            cfg.validate()?;
            let values = log_space(*from, *to, *points)?;
            // validate the parameter path once before fanning out
            model.override_for(param, values[0], &mut OccurrenceOverrides::new())?;
            let result = sweep(param, &m.to_string(), &values, &cfg, |v| {
                let mut ov = model.overrides(&settings).map_err(|_| archdep::Error::InvalidParams("bad --set".into()))?;
                model
                    .override_for(param, v, &mut ov)
                    .map_err(|_| archdep::Error::InvalidParams(format!("bad parameter `{param}`")))?;
                let bound = bind(&model.decls, &model.root, &library, &ov)?;
                let sts = archdep::statespace::expand(&bound, &ExpandConfig { state_cap: solver.state_cap })?;
                let ctmc = archdep::statespace::eliminate_vanishing(&sts)?;
                let pi = steady_state(&ctmc, &cfg)?;
                Ok(eval_measure(&m.resolve(&bound)?, &ctmc, &pi))
            })?;
            let mut t = OutputTable::new(&["parameter", "measure_value", "unavailability", "status"]);
            for row in &result.rows {
                match &row.result {
                    Ok(v) => t.push(vec![num(row.value), num(*v), num(1.0 - v), "ok".into()]),
                    Err(e) => t.push(vec![num(row.value), String::new(), String::new(), format!("error: {e}")]),
                }
            }
            run.manifest = json!({
                "command": "sweep",
                "model": model.description,
                "root": model.root,
                "overrides": settings,
                "parameter": param,
                "grid": { "from": from, "to": to, "points": points },
                "measure": result.measure,
                "solver": cfg.describe(),
            });
            run.emit(&t)?;
            Ok(result.rows.iter().all(|r| r.result.is_ok()))
        }
        Command::Simulate { source, measure, horizon, runs, warmup, trace, state_cap } => {
            let model = source.load()?;
            let settings = source.settings()?;
            let overrides = model.overrides(&settings)?;
            let m = model.measure(measure)?;
            let a = analysis(&model, &library, &overrides, *state_cap)?;
            let resolved = m.resolve(&a.bound)?;
            let cfg = SimConfig { horizon: *horizon, replications: *runs, seed: cli.seed, warmup: *warmup };
            let est = simulate(&a.sts, &resolved, &cfg)?;
            if let Some(path) = trace {
                let tr = sample_trajectory(&a.sts, *horizon, &mut replication_rng(cli.seed, 0));
                let mut text = format!("0 - - {}\n", state_labels(&a.bound, &a.sts.states[tr.initial].global).join(" "));
                for e in &tr.events {
                    let (who, what) = match e.cause {
                        Some((ei, ev)) => (
                            error_instance_path(&a.bound, ei).to_string(),
                            a.bound.errors[ei].model.events[ev].name.clone(),
                        ),
                        None => ("-".into(), "-".into()),
                    };
                    let labels = state_labels(&a.bound, &a.sts.states[e.state].global).join(" ");
                    let _ = writeln!(text, "{} {who} {what} {labels}", num(e.time));
                }
                fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
            }
            let mut t = OutputTable::new(&["estimate", "half_width", "std_error", "replications", "horizon"]);
            t.push(vec![num(est.estimate), num(est.half_width), num(est.std_error), est.replications.to_string(), num(*horizon)]);
            run.manifest = json!({
                "command": "simulate",
                "model": model.description,
                "root": model.root,
                "overrides": settings,
                "measure": m.to_string(),
                "horizon": horizon,
                "replications": runs,
                "warmup": warmup,
                "seed": cli.seed,
                "rng": RNG_NAME,
            });
            run.emit(&t)?;
            Ok(true)
        }
        Command::Export { source, instance, state_cap } => {
            let model = source.load()?;
            let settings = source.settings()?;
            let overrides = model.overrides(&settings)?;
            let text = if *instance {
                bind(&model.decls, &model.root, &library, &overrides)?.instances.dump()
            } else {
                let a = analysis(&model, &library, &overrides, *state_cap)?;
                export_ctmc(&a.bound, &a.ctmc)
            };
            match &cli.out {
                Some(p) => fs::write(p, text).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Model(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
