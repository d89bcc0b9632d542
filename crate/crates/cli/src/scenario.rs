//! Scenario documents.
//!
//! ```json
//! {
//!   "seed": 7,
//!   "model": {"family": "DriftZd", "params": {"p_plus": [0.75], "p_minus": [0.25]}},
//!   "law": {"default": {"mean": 1.3}},
//!   "tasks": [{"kind": "classify", "id": "phase"}]
//! }
//! ```
//!
//! Every task is validated against the model and law before anything runs.

use std::collections::BTreeSet;
use std::path::PathBuf;

use bmc_core::engine::{Estimator, SimParams};
use bmc_core::ldp::StepLaw;
use bmc_core::models::config::{parse_law, parse_model, LawSpec, ModelSpec, ParseContext};
use bmc_core::models::{KernelModel, StateId};
use bmc_core::spectral::Variant;
use bmc_core::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{0}")]
    Syntax(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] Error),
}

type Result<T> = std::result::Result<T, ScenarioError>;

fn invalid(pointer: &str, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(Error::Config { pointer: pointer.to_string(), message: message.into() })
}

fn relocate(pointer: &str, e: Error) -> ScenarioError {
    match e {
        Error::Config { .. } => e.into(),
        other => invalid(pointer, other.to_string()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKindTag {
    Spectral,
    Series,
    Classify,
    Simulate,
    Speed,
    Sweep,
}

impl TaskKindTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            TaskKindTag::Spectral => "spectral",
            TaskKindTag::Series => "series",
            TaskKindTag::Classify => "classify",
            TaskKindTag::Simulate => "simulate",
            TaskKindTag::Speed => "speed",
            TaskKindTag::Sweep => "sweep",
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpectralTask {
    pub center: StateId,
    pub max_radius: u32,
    pub variant: Variant,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct SeriesTask {
    pub center: StateId,
    pub order: usize,
    pub radius: u32,
    pub root: bool,
}

#[derive(Clone, Debug)]
pub struct ClassifyTask {
    pub law: LawSpec,
    pub m: f64,
    pub tol: f64,
}

#[derive(Clone, Debug)]
pub struct SimulateTask {
    pub estimator: Estimator,
    pub start: StateId,
    pub sim: SimParams,
    pub k: u64,
}

#[derive(Clone, Debug)]
pub struct SpeedTask {
    pub n: u64,
    pub sim: SimParams,
    pub grid: Grid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SweepTask {
    pub points: Vec<ClassifyTask>,
}

#[derive(Clone, Debug)]
pub enum TaskKind {
    Spectral(SpectralTask),
    Series(SeriesTask),
    Classify(ClassifyTask),
    Simulate(SimulateTask),
    Speed(SpeedTask),
    Sweep(SweepTask),
}

impl TaskKind {
    pub fn tag(&self) -> TaskKindTag {
        match self {
            TaskKind::Spectral(_) => TaskKindTag::Spectral,
            TaskKind::Series(_) => TaskKindTag::Series,
            TaskKind::Classify(_) => TaskKindTag::Classify,
            TaskKind::Simulate(_) => TaskKindTag::Simulate,
            TaskKind::Speed(_) => TaskKindTag::Speed,
            TaskKind::Sweep(_) => TaskKindTag::Sweep,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Task {
    pub id: String,
    pub kind: TaskKind,
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub model: ModelSpec,
    pub law: Option<LawSpec>,
    pub tasks: Vec<Task>,
    pub warnings: Vec<String>,
}

/// Command-line values that replace scenario parameters.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicas: Option<u64>,
    pub horizon: Option<u64>,
    pub pop_cap: Option<u64>,
    pub radius: Option<u32>,
    pub tol: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Document {
    seed: u64,
    #[serde(default)]
    out: Option<PathBuf>,
    model: Value,
    #[serde(default)]
    law: Option<Value>,
    tasks: Vec<Value>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TaskEnvelope {
    kind: TaskKindTag,
    #[serde(default)]
    id: Option<String>,
    #[serde(default = "empty_object")]
    params: Value,
}

fn empty_object() -> Value {
    Value::Object(Default::default())
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SpectralParams {
    #[serde(default)]
    center: Option<StateId>,
    #[serde(default)]
    max_radius: Option<u32>,
    #[serde(default)]
    variant: Option<Variant>,
    #[serde(default)]
    tol: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SeriesParams {
    #[serde(default)]
    center: Option<StateId>,
    #[serde(default)]
    order: Option<usize>,
    #[serde(default)]
    radius: Option<u32>,
    #[serde(default)]
    root: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct ClassifyParams {
    #[serde(default)]
    tol: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SimulateParams {
    #[serde(default)]
    estimator: Option<Estimator>,
    #[serde(default)]
    start: Option<StateId>,
    #[serde(default)]
    replicas: Option<u64>,
    #[serde(default)]
    horizon: Option<u64>,
    #[serde(default)]
    pop_cap: Option<u64>,
    #[serde(default)]
    k: Option<u64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SpeedParams {
    #[serde(default)]
    n: Option<u64>,
    #[serde(default)]
    replicas: Option<u64>,
    #[serde(default)]
    pop_cap: Option<u64>,
    #[serde(default)]
    grid: Option<Grid>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct MRange {
    from: f64,
    to: f64,
    points: usize,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct SweepParams {
    #[serde(default)]
    m: Option<Vec<f64>>,
    #[serde(default)]
    m_range: Option<MRange>,
    #[serde(default)]
    tol: Option<f64>,
}

pub const DEFAULT_MAX_RADIUS: u32 = 60;
pub const DEFAULT_SERIES_ORDER: usize = 200;
pub const DEFAULT_THRESHOLD_TOL: f64 = bmc_core::classify::THRESHOLD_TOL;
pub const DEFAULT_SPECTRAL_TOL: f64 = 1e-10;
pub const DEFAULT_ALPHA_K: u64 = 50;
pub const DEFAULT_SPEED_STEPS: u64 = 100;
pub const DEFAULT_SPEED_REPLICAS: u64 = 500;
pub const DEFAULT_GRID: Grid = Grid { lo: -1.0, hi: 1.0, step: 0.05 };

/// Parses and validates a scenario document.
pub fn parse_scenario(text: &str, strict: bool) -> Result<Scenario> {
    parse_scenario_with(text, strict, &Overrides::default())
}

pub fn parse_scenario_with(text: &str, strict: bool, ov: &Overrides) -> Result<Scenario> {
    let value: Value = serde_json::from_str(text)?;
    let mut ctx = ParseContext { strict, warnings: Vec::new() };
    let doc: Document = ctx.decode(&value, "")?;
    let model = parse_model(&doc.model, "/model", &mut ctx)?;
    let law = doc.law.as_ref().map(|l| parse_law(l, "/law", &model.model, &mut ctx)).transpose()?;
    let mut builder = Builder { model: &model, law: law.as_ref(), seed: ov.seed.unwrap_or(doc.seed), ov, ctx };
    let mut tasks = Vec::with_capacity(doc.tasks.len());
    let mut ids = BTreeSet::new();
    for (i, t) in doc.tasks.iter().enumerate() {
        let task = builder.task(t, &format!("/tasks/{i}"), i)?;
        if !ids.insert(task.id.clone()) {
            return Err(invalid(&format!("/tasks/{i}/id"), format!("duplicate task id {:?}", task.id)));
        }
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(invalid("/tasks", "the scenario declares no tasks"));
    }
    let (seed, warnings) = (builder.seed, builder.ctx.warnings);
    Ok(Scenario { seed, out: doc.out, model, law, tasks, warnings })
}

impl Scenario {
    /// Keeps only tasks of one kind; with none declared, a task of that kind
    /// with default parameters is validated and added.
    pub fn select(&self, kind: TaskKindTag, ov: &Overrides) -> Result<Scenario> {
        let mut out = self.clone();
        out.tasks.retain(|t| t.kind.tag() == kind);
        if out.tasks.is_empty() {
            let mut builder = Builder {
                model: &self.model,
                law: self.law.as_ref(),
                seed: self.seed,
                ov,
                ctx: ParseContext::strict(),
            };
            let doc = serde_json::json!({"kind": kind, "id": kind.as_str()});
            out.tasks.push(builder.task(&doc, &format!("/{}", kind.as_str()), 0)?);
        }
        Ok(out)
    }

    pub fn law_id(&self) -> &str {
        self.law.as_ref().map(|l| l.id.as_str()).unwrap_or("none")
    }
}

struct Builder<'a> {
    model: &'a ModelSpec,
    law: Option<&'a LawSpec>,
    seed: u64,
    ov: &'a Overrides,
    ctx: ParseContext,
}

impl Builder<'_> {
    fn task(&mut self, value: &Value, pointer: &str, index: usize) -> Result<Task> {
        let env: TaskEnvelope = self.ctx.decode(value, pointer)?;
        let p = format!("{pointer}/params");
        let id = env.id.unwrap_or_else(|| format!("{}_{index}", env.kind.as_str()));
        if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
            return Err(invalid(&format!("{pointer}/id"), "task ids use ASCII letters, digits, '_', '-' and '.'"));
        }
        let model = &self.model.model;
        let kind = match env.kind {
            TaskKindTag::Spectral => {
                let q: SpectralParams = self.ctx.decode(&env.params, &p)?;
                let center = self.state(q.center, &format!("{p}/center"))?;
                let max_radius = self.ov.radius.or(q.max_radius).unwrap_or(DEFAULT_MAX_RADIUS);
                if max_radius < 2 {
                    return Err(invalid(&format!("{p}/max_radius"), "max_radius must be at least 2"));
                }
                let variant = q.variant.unwrap_or(Variant::Rho);
                let ok = match variant {
                    Variant::Rho | Variant::CheckRho => true,
                    Variant::Varrho => matches!(model, KernelModel::Glued(_)),
                    Variant::TildeRho => matches!(
                        model,
                        KernelModel::Glued(_) | KernelModel::ConeTypeTree(_) | KernelModel::RegularTree(_)
                    ),
                };
                if !ok {
                    return Err(invalid(
                        &format!("{p}/variant"),
                        format!("variant {} is not available for {}", variant.as_str(), model.family().as_str()),
                    ));
                }
                let tol = self.positive(self.ov.tol.or(q.tol).unwrap_or(DEFAULT_SPECTRAL_TOL), &format!("{p}/tol"))?;
                TaskKind::Spectral(SpectralTask { center, max_radius, variant, tol })
            }
            TaskKindTag::Series => {
                let q: SeriesParams = self.ctx.decode(&env.params, &p)?;
                let center = self.state(q.center, &format!("{p}/center"))?;
                let order = q.order.unwrap_or(DEFAULT_SERIES_ORDER);
                let root = q.root.unwrap_or(true);
                if order < 1 || (root && order < 10) {
                    return Err(invalid(&format!("{p}/order"), "order must be at least 10 to locate the root of U"));
                }
                let exact = (order as u64 * model.max_jump() as u64).div_ceil(2) as u32;
                let radius = self.ov.radius.or(q.radius).unwrap_or(exact.max(1));
                TaskKind::Series(SeriesTask { center, order, radius, root })
            }
            TaskKindTag::Classify => {
                let q: ClassifyParams = self.ctx.decode(&env.params, &p)?;
                let law = self.need_law(&p)?.clone();
                let tol = self.positive(self.ov.tol.or(q.tol).unwrap_or(DEFAULT_THRESHOLD_TOL), &format!("{p}/tol"))?;
                let m = law
                    .law
                    .constant_mean()
                    .ok_or_else(|| invalid("/law", "classification needs a constant mean offspring"))?;
                TaskKind::Classify(ClassifyTask { law, m, tol })
            }
            TaskKindTag::Simulate => {
                let q: SimulateParams = self.ctx.decode(&env.params, &p)?;
                self.need_law(&p)?;
                let estimator = q.estimator.unwrap_or(Estimator::FrozenMean);
                let start = self.state(q.start, &format!("{p}/start"))?;
                let d = SimParams::default();
                let sim = SimParams {
                    replicas: self.ov.replicas.or(q.replicas).unwrap_or(d.replicas),
                    horizon: self.ov.horizon.or(q.horizon).unwrap_or(d.horizon),
                    pop_cap: self.ov.pop_cap.or(q.pop_cap).unwrap_or(d.pop_cap),
                    seed: self.seed,
                };
                self.sim_bounds(&sim, &p)?;
                let k = q.k.unwrap_or(DEFAULT_ALPHA_K);
                match estimator {
                    Estimator::AlphaProxy if k < 2 => {
                        return Err(invalid(&format!("{p}/k"), "the alpha proxy needs k >= 2"))
                    }
                    Estimator::ReturnTime if sim.replicas < 100 => {
                        return Err(invalid(&format!("{p}/replicas"), "return times need at least 100 replicas"))
                    }
                    Estimator::MinSpeed => {
                        self.on_z(&p)?;
                        if sim.horizon < 50 {
                            return Err(invalid(&format!("{p}/horizon"), "minimal speed needs a horizon of at least 50"));
                        }
                    }
                    _ => {}
                }
                TaskKind::Simulate(SimulateTask { estimator, start, sim, k })
            }
            TaskKindTag::Speed => {
                let q: SpeedParams = self.ctx.decode(&env.params, &p)?;
                self.on_z(&p)?;
                let law = self.need_law(&p)?;
                if law.law.constant_mean().is_none() {
                    return Err(invalid("/law", "the speed threshold needs a constant mean offspring"));
                }
                let n = self.ov.horizon.or(q.n).unwrap_or(DEFAULT_SPEED_STEPS);
                if n < 50 {
                    return Err(invalid(&format!("{p}/n"), "minimal speed needs n >= 50"));
                }
                let sim = SimParams {
                    replicas: self.ov.replicas.or(q.replicas).unwrap_or(DEFAULT_SPEED_REPLICAS),
                    horizon: n,
                    pop_cap: self.ov.pop_cap.or(q.pop_cap).unwrap_or(SimParams::default().pop_cap),
                    seed: self.seed,
                };
                self.sim_bounds(&sim, &p)?;
                let grid = q.grid.unwrap_or(DEFAULT_GRID);
                if !(grid.step > 0.0 && grid.hi >= grid.lo) {
                    return Err(invalid(&format!("{p}/grid"), "grid needs lo <= hi and a positive step"));
                }
                TaskKind::Speed(SpeedTask { n, sim, grid })
            }
            TaskKindTag::Sweep => {
                let q: SweepParams = self.ctx.decode(&env.params, &p)?;
                let ms = match (q.m, q.m_range) {
                    (Some(list), None) => list,
                    (None, Some(r)) => {
                        if r.points < 2 || !(r.to > r.from) {
                            return Err(invalid(&format!("{p}/m_range"), "m_range needs from < to and at least 2 points"));
                        }
                        let h = (r.to - r.from) / (r.points - 1) as f64;
                        (0..r.points).map(|i| r.from + h * i as f64).collect()
                    }
                    _ => return Err(invalid(&p, "give exactly one of m or m_range")),
                };
                if ms.is_empty() {
                    return Err(invalid(&format!("{p}/m"), "the sweep grid is empty"));
                }
                let tol = self.positive(self.ov.tol.or(q.tol).unwrap_or(DEFAULT_THRESHOLD_TOL), &format!("{p}/tol"))?;
                let base = self.law.map(|l| l.law.clone()).unwrap_or_else(bmc_core::models::OffspringLaw::trivial);
                let points = ms
                    .iter()
                    .enumerate()
                    .map(|(j, &m)| {
                        let law = base.rescaled(m).map_err(|e| relocate(&format!("{p}/m/{j}"), e))?;
                        Ok(ClassifyTask { law: LawSpec { law, id: format!("m={m}") }, m, tol })
                    })
                    .collect::<Result<Vec<_>>>()?;
                TaskKind::Sweep(SweepTask { points })
            }
        };
        Ok(Task { id, kind })
    }

    fn state(&self, s: Option<StateId>, pointer: &str) -> Result<StateId> {
        match s {
            None => Ok(self.model.model.origin()),
            Some(s) => {
                self.model.model.validate_state(&s).map_err(|e| relocate(pointer, e))?;
                Ok(s)
            }
        }
    }

    fn need_law(&self, pointer: &str) -> Result<&LawSpec> {
        self.law.ok_or_else(|| invalid(pointer, "this task needs an offspring law block at /law"))
    }

    fn on_z(&self, pointer: &str) -> Result<()> {
        StepLaw::from_model(&self.model.model).map(|_| ()).map_err(|e| relocate(pointer, e))
    }

    fn positive(&self, x: f64, pointer: &str) -> Result<f64> {
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(invalid(pointer, format!("expected a positive tolerance, got {x}")))
        }
    }

    fn sim_bounds(&self, sim: &SimParams, pointer: &str) -> Result<()> {
        if sim.replicas < 1 || sim.horizon < 1 || sim.pop_cap < 1 {
            return Err(invalid(pointer, "replicas, horizon and pop_cap must be at least 1"));
        }
        Ok(())
    }
}
