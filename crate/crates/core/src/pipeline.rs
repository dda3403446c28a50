//! End-to-end glue: declarations → instance model → bound model → STS → CTMC.

use crate::binding::{BoundModel, OccurrenceOverrides};
use crate::errlib::ErrorLibrary;
use crate::error::{Error, Result};
use crate::instance::resolve_instance;
use crate::model::DeclarationSet;
use crate::parser::parse_aadl;
use crate::statespace::{eliminate_vanishing, expand, Ctmc, ExpandConfig, StochasticTransitionSystem};
use crate::validate::validate_with_library;

/// Parses several named sources into one declaration set.
pub fn parse_sources<'a>(sources: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<DeclarationSet> {
    let mut decls = DeclarationSet::default();
    for (name, text) in sources {
        decls.merge(parse_aadl(text, name)?);
    }
    Ok(decls)
}

/// The explicitly requested root, or the only candidate.
pub fn choose_root(decls: &DeclarationSet, requested: Option<&str>) -> Result<String> {
    if let Some(r) = requested {
        return decls
            .implementation(r)
            .map(|i| i.name.clone())
            .ok_or_else(|| Error::Resolve(format!("no implementation `{r}`")));
    }
    match decls.root_candidates().as_slice() {
        [one] => Ok(one.name.clone()),
        [] => Err(Error::Resolve("no system implementation to use as root".into())),
        many => Err(Error::Resolve(format!(
            "several candidate roots ({}); pick one",
            many.iter().map(|i| i.name.as_str()).collect::<Vec<_>>().join(", ")
        ))),
    }
}

/// Validates and binds; diagnostics become a single resolution error.
pub fn bind(
    decls: &DeclarationSet,
    root: &str,
    library: &ErrorLibrary,
    overrides: &OccurrenceOverrides,
) -> Result<BoundModel> {
    let diags = validate_with_library(decls, library);
    if !diags.is_empty() {
        let lines: Vec<String> = diags.iter().map(ToString::to_string).collect();
        return Err(Error::Resolve(lines.join("\n")));
    }
    let instances = resolve_instance(decls, root)?;
    BoundModel::new(instances, library, overrides)
}

pub struct Analysis {
    pub bound: BoundModel,
    pub sts: StochasticTransitionSystem,
    pub ctmc: Ctmc,
}

pub fn analyze(
    decls: &DeclarationSet,
    root: &str,
    library: &ErrorLibrary,
    overrides: &OccurrenceOverrides,
    cfg: &ExpandConfig,
) -> Result<Analysis> {
    let bound = bind(decls, root, library, overrides)?;
    let sts = expand(&bound, cfg)?;
    let ctmc = eliminate_vanishing(&sts)?;
    Ok(Analysis { bound, sts, ctmc })
}
