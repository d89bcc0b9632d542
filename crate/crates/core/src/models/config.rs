//! JSON descriptions of models and offspring laws.
//!
//! A model document is `{"family": <tag>, "params": {...}}`. The tag is read
//! first and the parameter block is then decoded against the family's schema,
//! so error locations point into `params`. Glued components nest model
//! documents.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

use super::{
    ConeType, ConeTypeTree, CycleGraph, DriftZd, Environment, FiniteChain, Glued, KernelModel,
    Offspring, OffspringLaw, RegularTree, SeedChain, StateId, DEFAULT_SUPPORT_CAP,
};

/// Parsing options and collected diagnostics.
#[derive(Debug, Default)]
pub struct ParseContext {
    /// Reject unknown keys instead of warning about them.
    pub strict: bool,
    pub warnings: Vec<String>,
}

impl ParseContext {
    pub fn strict() -> Self {
        Self { strict: true, warnings: Vec::new() }
    }

    pub fn lenient() -> Self {
        Self { strict: false, warnings: Vec::new() }
    }

    /// Decodes `value` into `T`, reporting the failing location as a JSON
    /// pointer below `pointer`, then checks for keys `T` does not know.
    pub fn decode<T>(&mut self, value: &Value, pointer: &str) -> Result<T>
    where
        T: DeserializeOwned + Serialize,
    {
        let parsed: T = serde_path_to_error::deserialize(value.clone()).map_err(|e| {
            Error::Config { pointer: join_pointer(pointer, e.path()), message: e.inner().to_string() }
        })?;
        let echo = serde_json::to_value(&parsed).map_err(|e| Error::Config {
            pointer: pointer.to_string(),
            message: e.to_string(),
        })?;
        let mut unknown = Vec::new();
        unknown_keys(value, &echo, pointer, &mut unknown);
        if let Some(first) = unknown.first() {
            if self.strict {
                return Err(Error::Config {
                    pointer: first.clone(),
                    message: "unknown key".to_string(),
                });
            }
            self.warnings.extend(unknown.into_iter().map(|p| format!("ignored unknown key {p}")));
        }
        Ok(parsed)
    }
}

fn join_pointer(base: &str, path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = base.to_string();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{key}")),
            Segment::Enum { variant } => out.push_str(&format!("/{variant}")),
            Segment::Unknown => out.push_str("/?"),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Keys present in `input` but absent from the re-serialised `echo`.
fn unknown_keys(input: &Value, echo: &Value, pointer: &str, out: &mut Vec<String>) {
    match (input, echo) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in a {
                let p = format!("{pointer}/{k}");
                match b.get(k) {
                    Some(w) => unknown_keys(v, w, &p, out),
                    None => out.push(p),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) => {
            for (i, (v, w)) in a.iter().zip(b).enumerate() {
                unknown_keys(v, w, &format!("{pointer}/{i}"), out);
            }
        }
        _ => {}
    }
}

fn config_err(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config { pointer: pointer.to_string(), message: message.into() }
}

fn at(pointer: &str, e: Error) -> Error {
    match e {
        Error::Config { .. } => e,
        other => config_err(pointer, other.to_string()),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Envelope {
    family: String,
    params: Value,
    #[serde(default)]
    id: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct DriftParams {
    p_plus: Vec<f64>,
    p_minus: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TreeParams {
    degree: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConeParams {
    types: Vec<ConeType>,
    root_type: u32,
}

#[derive(Debug, Serialize, Deserialize)]
struct GluedParams {
    components: Vec<Value>,
    weights: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SeedParams {
    p_right: f64,
    seed_site: i64,
    seed_row: [f64; 3],
}

#[derive(Debug, Serialize, Deserialize)]
struct CycleParams {
    #[serde(default = "default_max_cycle")]
    max_cycle: u32,
}

fn default_max_cycle() -> u32 {
    CycleGraph::default().max_cycle()
}

#[derive(Debug, Serialize, Deserialize)]
struct EnvParams {
    laws: Vec<f64>,
    weights: Vec<f64>,
    env_seed: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct FiniteParams {
    rows: Vec<Vec<(u32, f64)>>,
    root: u32,
}

/// A parsed model with its optional user-supplied identifier.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub model: KernelModel,
    pub id: String,
}

/// Parses a model document located at `pointer`.
pub fn parse_model(value: &Value, pointer: &str, ctx: &mut ParseContext) -> Result<ModelSpec> {
    let env: Envelope = ctx.decode(value, pointer)?;
    let p = format!("{pointer}/params");
    let model = match env.family.as_str() {
        "DriftZd" => {
            let q: DriftParams = ctx.decode(&env.params, &p)?;
            KernelModel::DriftZd(DriftZd::new(q.p_plus, q.p_minus).map_err(|e| at(&p, e))?)
        }
        "RegularTree" => {
            let q: TreeParams = ctx.decode(&env.params, &p)?;
            KernelModel::RegularTree(RegularTree::new(q.degree).map_err(|e| at(&p, e))?)
        }
        "ConeTypeTree" => {
            let q: ConeParams = ctx.decode(&env.params, &p)?;
            KernelModel::ConeTypeTree(
                ConeTypeTree::new(q.types, q.root_type).map_err(|e| at(&p, e))?,
            )
        }
        "Glued" => {
            let q: GluedParams = ctx.decode(&env.params, &p)?;
            let comps = q
                .components
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    parse_model(c, &format!("{p}/components/{i}"), ctx).map(|s| s.model)
                })
                .collect::<Result<Vec<_>>>()?;
            KernelModel::Glued(Glued::new(comps, q.weights).map_err(|e| at(&p, e))?)
        }
        "LineTree" => {
            let q: TreeParams = ctx.decode(&env.params, &p)?;
            KernelModel::Glued(Glued::line_tree(q.degree).map_err(|e| at(&p, e))?)
        }
        "SeedChain" => {
            let q: SeedParams = ctx.decode(&env.params, &p)?;
            KernelModel::SeedChain(
                SeedChain::new(q.p_right, q.seed_site, q.seed_row).map_err(|e| at(&p, e))?,
            )
        }
        "CycleGraph" => {
            let q: CycleParams = ctx.decode(&env.params, &p)?;
            KernelModel::CycleGraph(CycleGraph::new(q.max_cycle).map_err(|e| at(&p, e))?)
        }
        "TwoPointEnvironmentZ" => {
            let q: EnvParams = ctx.decode(&env.params, &p)?;
            KernelModel::TwoPointEnvironmentZ(
                Environment::new(q.laws, q.weights, q.env_seed).map_err(|e| at(&p, e))?,
            )
        }
        "FiniteChain" => {
            let q: FiniteParams = ctx.decode(&env.params, &p)?;
            KernelModel::FiniteChain(FiniteChain::new(q.rows, q.root).map_err(|e| at(&p, e))?)
        }
        other => {
            return Err(config_err(
                &format!("{pointer}/family"),
                format!("unknown model family {other:?}"),
            ))
        }
    };
    let id = env.id.unwrap_or_else(|| model.label());
    Ok(ModelSpec { model, id })
}

/// One offspring distribution: exactly one of the three forms.
#[derive(Debug, Default, Serialize, Deserialize)]
pub struct DistConfig {
    #[serde(default)]
    pub masses: Option<Vec<f64>>,
    #[serde(default)]
    pub mean: Option<f64>,
    #[serde(default)]
    pub geometric: Option<GeometricConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GeometricConfig {
    pub ratio: f64,
    pub cap: usize,
}

impl DistConfig {
    fn build(&self, pointer: &str) -> Result<Offspring> {
        let forms = [self.masses.is_some(), self.mean.is_some(), self.geometric.is_some()];
        if forms.iter().filter(|&&f| f).count() != 1 {
            return Err(config_err(
                pointer,
                "give exactly one of masses, mean or geometric",
            ));
        }
        let law = if let Some(m) = &self.masses {
            Offspring::new(m.clone())
        } else if let Some(m) = self.mean {
            Offspring::with_mean(m)
        } else {
            let g = self.geometric.as_ref().expect("checked");
            Offspring::truncated_geometric(g.ratio, g.cap)
        };
        law.map_err(|e| at(pointer, e))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StateOverride {
    state: StateId,
    law: DistConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct TypeOverride {
    cone_type: u32,
    law: DistConfig,
}

#[derive(Debug, Serialize, Deserialize)]
struct LawConfig {
    default: DistConfig,
    #[serde(default)]
    state_overrides: Vec<StateOverride>,
    #[serde(default)]
    cone_type_overrides: Vec<TypeOverride>,
    #[serde(default = "default_cap")]
    support_cap: usize,
    #[serde(default)]
    id: Option<String>,
}

fn default_cap() -> usize {
    DEFAULT_SUPPORT_CAP
}

/// A parsed offspring law with its identifier.
#[derive(Clone, Debug)]
pub struct LawSpec {
    pub law: OffspringLaw,
    pub id: String,
}

/// Parses an offspring-law document located at `pointer`; override states
/// are validated against `model`.
pub fn parse_law(
    value: &Value,
    pointer: &str,
    model: &KernelModel,
    ctx: &mut ParseContext,
) -> Result<LawSpec> {
    let cfg: LawConfig = ctx.decode(value, pointer)?;
    let default = cfg.default.build(&format!("{pointer}/default"))?;
    let mut law = OffspringLaw::constant(default)
        .with_support_cap(cfg.support_cap)
        .map_err(|e| at(pointer, e))?;
    for (i, o) in cfg.state_overrides.iter().enumerate() {
        let p = format!("{pointer}/state_overrides/{i}");
        model.validate_state(&o.state).map_err(|e| at(&format!("{p}/state"), e))?;
        let dist = o.law.build(&format!("{p}/law"))?;
        law = law.with_state(o.state.clone(), dist).map_err(|e| at(&p, e))?;
    }
    for (i, o) in cfg.cone_type_overrides.iter().enumerate() {
        let p = format!("{pointer}/cone_type_overrides/{i}");
        match model {
            KernelModel::ConeTypeTree(t) if (o.cone_type as usize) < t.types().len() => {}
            _ => return Err(config_err(&p, "cone type override needs a matching cone type")),
        }
        let dist = o.law.build(&format!("{p}/law"))?;
        law = law.with_cone_type(o.cone_type, dist).map_err(|e| at(&p, e))?;
    }
    let id = cfg.id.unwrap_or_else(|| law_label(&law));
    Ok(LawSpec { law, id })
}

/// Short identifier for a law.
pub fn law_label(law: &OffspringLaw) -> String {
    let d = law.default_law();
    let base = if d.is_trivial() {
        "none".to_string()
    } else {
        format!("m={}", d.mean())
    };
    if law.has_overrides() {
        format!("{base}+{}", law.state_overrides().len() + law.cone_type_overrides().len())
    } else {
        base
    }
}
