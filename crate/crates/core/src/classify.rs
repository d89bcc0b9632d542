//! Phase verdicts from the threshold theorems, and their comparison with
//! simulation evidence.

use serde::Serialize;

use crate::engine::{Estimator, SimulationSummary};
use crate::error::{Error, Result};
use crate::ldp::{randenv_criterion, NeighbourLaw, RandEnvPhase};
use crate::models::{ConeTypeTree, KernelModel, OffspringLaw};
use crate::spectral::{cone_classes, rho_estimate, rho_variant, SpectralEstimate, SpectralOptions, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Transient,
    WeaklyRecurrent,
    StronglyRecurrent,
    PositiveRecurrent,
    Boundary,
    Unknown,
}

impl Phase {
    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Transient => "Transient",
            Phase::WeaklyRecurrent => "WeaklyRecurrent",
            Phase::StronglyRecurrent => "StronglyRecurrent",
            Phase::PositiveRecurrent => "PositiveRecurrent",
            Phase::Boundary => "Boundary",
            Phase::Unknown => "Unknown",
        }
    }

    fn is_strong(self) -> bool {
        matches!(self, Phase::StronglyRecurrent | Phase::PositiveRecurrent)
    }
}

/// Names of the classification rules a verdict relies on.
pub mod rules {
    pub const TRANSIENT_IFF_BELOW_RHO: &str = "transient-iff-m-at-most-inverse-rho";
    pub const STRONG_ABOVE_RHO: &str = "strongly-recurrent-above-inverse-rho";
    pub const POSITIVE_ON_Z: &str = "positive-recurrent-above-inverse-rho-on-Z";
    pub const GLUED_THREE_PHASE: &str = "glued-chain-three-phase";
    pub const IRREDUCIBLE_CONES_TWO_PHASE: &str = "irreducible-cone-types-two-phase";
    pub const REDUCIBLE_CONES_THREE_PHASE: &str = "reducible-cone-types-three-phase";
    pub const ESCAPE_THROUGH_TRANSIENT_PART: &str = "not-strong-while-a-homogeneous-part-is-transient";
    pub const RANDOM_ENVIRONMENT_HULL: &str = "random-environment-hull-criterion";
    pub const FROZEN_MEAN_EVIDENCE: &str = "frozen-mean-at-most-one-iff-transient";
    pub const ALPHA_PROXY_EVIDENCE: &str = "iterated-frozen-arrivals-proxy";
    pub const TAIL_FIT_EVIDENCE: &str = "exponential-return-tail";
    pub const NO_BRANCHING: &str = "no-branching-markov-chain";
}

/// A critical mean `1/ρ`-type value with its uncertainty band.
#[derive(Clone, Debug, Serialize)]
pub struct Threshold {
    pub name: &'static str,
    pub value: f64,
    /// Interval that contains the true threshold.
    pub low: f64,
    pub high: f64,
    pub closed_form: bool,
}

impl Threshold {
    fn from_estimate(name: &'static str, e: &SpectralEstimate, tol: f64) -> Self {
        let value = 1.0 / e.value;
        if e.method == crate::spectral::Method::ClosedForm || !e.lower_bound {
            let pad = tol * value;
            Self { name, value, low: value - pad, high: value + pad, closed_form: true }
        } else {
            let low = 1.0 / (e.value + e.error_band()).min(1.0).max(e.value);
            Self { name, value, low: low * (1.0 - tol), high: value * (1.0 + tol), closed_form: false }
        }
    }

    fn exact(name: &'static str, value: f64, tol: f64) -> Self {
        Self { name, value, low: value * (1.0 - tol), high: value * (1.0 + tol), closed_form: true }
    }

    fn side(&self, m: f64) -> Side {
        if m < self.low {
            Side::Below
        } else if m > self.high {
            Side::Above
        } else if self.closed_form {
            Side::At
        } else {
            Side::Band
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Below,
    At,
    Band,
    Above,
}

#[derive(Clone, Debug, Serialize)]
pub struct PhaseVerdict {
    pub model_id: String,
    pub law_id: String,
    pub phase: Phase,
    pub m: Option<f64>,
    pub thresholds: Vec<Threshold>,
    pub theorems: Vec<&'static str>,
    pub boundary_note: Option<String>,
    pub notes: Vec<String>,
    /// Estimators whose summaries support an empirical verdict.
    pub evidence: Vec<String>,
}

/// One CSV row per verdict.
#[derive(Clone, Debug, Serialize)]
pub struct VerdictRow {
    pub model_id: String,
    pub law_id: String,
    pub m: Option<f64>,
    pub phase: &'static str,
    pub inverse_rho: Option<f64>,
    pub second_threshold: Option<f64>,
    pub theorems: String,
    pub boundary: bool,
}

impl PhaseVerdict {
    fn new(phase: Phase, m: Option<f64>) -> Self {
        Self {
            model_id: String::new(),
            law_id: String::new(),
            phase,
            m,
            thresholds: Vec::new(),
            theorems: Vec::new(),
            boundary_note: None,
            notes: Vec::new(),
            evidence: Vec::new(),
        }
    }

    pub fn with_ids(mut self, model_id: &str, law_id: &str) -> Self {
        self.model_id = model_id.to_string();
        self.law_id = law_id.to_string();
        self
    }

    pub fn threshold(&self, name: &str) -> Option<&Threshold> {
        self.thresholds.iter().find(|t| t.name == name)
    }

    pub fn row(&self) -> VerdictRow {
        VerdictRow {
            model_id: self.model_id.clone(),
            law_id: self.law_id.clone(),
            m: self.m,
            phase: self.phase.as_str(),
            inverse_rho: self.threshold("1/rho").map(|t| t.value),
            second_threshold: self.thresholds.iter().find(|t| t.name != "1/rho").map(|t| t.value),
            theorems: self.theorems.join(";"),
            boundary: self.boundary_note.is_some() || self.phase == Phase::Boundary,
        }
    }
}

/// Default relative tolerance for closed-form thresholds.
pub const THRESHOLD_TOL: f64 = 1e-9;

pub fn analytic_verdict(model: &KernelModel, law: &OffspringLaw, tol: f64) -> Result<PhaseVerdict> {
    analytic_verdict_with(model, law, tol, &SpectralOptions::default())
}

/// Phase of `(model, law)` from the strongest rule whose hypotheses hold.
///
/// Closed-form thresholds are compared with relative tolerance `tol` and the
/// theorems decide the critical value itself. Truncated spectral radii only
/// bound the threshold from one side, so a mean inside the estimate's error
/// band yields `Boundary`.
pub fn analytic_verdict_with(
    model: &KernelModel,
    law: &OffspringLaw,
    tol: f64,
    opts: &SpectralOptions,
) -> Result<PhaseVerdict> {
    let m = law.constant_mean().ok_or_else(|| {
        Error::Applicability(
            "the threshold theorems need a constant mean offspring; this law varies by state".into(),
        )
    })?;
    if m <= 1.0 + tol {
        let mut v = PhaseVerdict::new(Phase::Unknown, Some(m));
        v.theorems.push(rules::NO_BRANCHING);
        v.notes.push("m = 1: no branching, the verdict is the Markov chain's own recurrence".into());
        return Ok(v);
    }
    match model {
        KernelModel::DriftZd(w) => {
            let rho = rho_estimate(model, opts)?;
            let t = Threshold::from_estimate("1/rho", &rho, tol);
            let mut v = two_phase(m, t, rules::STRONG_ABOVE_RHO);
            if v.phase == Phase::StronglyRecurrent && w.dim() == 1 && !law.has_overrides() {
                v.phase = Phase::PositiveRecurrent;
                v.theorems.push(rules::POSITIVE_ON_Z);
            }
            Ok(v)
        }
        KernelModel::RegularTree(_) | KernelModel::FiniteChain(_) => {
            let rho = rho_estimate(model, opts)?;
            Ok(two_phase(m, Threshold::from_estimate("1/rho", &rho, tol), rules::STRONG_ABOVE_RHO))
        }
        KernelModel::ConeTypeTree(tree) => {
            let rho = rho_estimate(model, opts)?;
            let first = Threshold::from_estimate("1/rho", &rho, tol);
            if irreducible_cones(tree) {
                return Ok(two_phase(m, first, rules::IRREDUCIBLE_CONES_TWO_PHASE));
            }
            let tilde = rho_variant(model, Variant::TildeRho, opts)?;
            let second = Threshold::from_estimate("1/tilde_rho", &tilde.estimate, tol);
            Ok(three_phase(m, first, second, true, rules::REDUCIBLE_CONES_THREE_PHASE))
        }
        KernelModel::Glued(g) => {
            let rho = rho_estimate(model, opts)?;
            let first = Threshold::from_estimate("1/rho", &rho, tol);
            let varrho = rho_variant(model, Variant::Varrho, opts)?;
            let second = Threshold::from_estimate("1/varrho", &varrho.estimate, tol);
            let homogeneous = g.components().iter().all(is_homogeneous);
            let attained = varrho.attained.unwrap_or(true);
            let mut v = three_phase(m, first, second, attained, rules::GLUED_THREE_PHASE);
            if !homogeneous && v.phase.is_strong() {
                v.phase = Phase::Unknown;
                v.notes.push(
                    "above 1/varrho strong recurrence needs every glued component to be homogeneous; \
                     a glued seed chain already fails it"
                        .into(),
                );
            }
            Ok(v)
        }
        KernelModel::SeedChain(s) => {
            let rho = rho_estimate(model, opts)?;
            let first = Threshold::from_estimate("1/rho", &rho, tol);
            let second = Threshold::exact("1/rho_homogeneous", 1.0 / s.rho_homogeneous(), tol);
            let mut v = PhaseVerdict::new(Phase::Unknown, Some(m));
            v.theorems.push(rules::TRANSIENT_IFF_BELOW_RHO);
            v.phase = match first.side(m) {
                Side::Below | Side::At => Phase::Transient,
                Side::Band => Phase::Boundary,
                Side::Above => match second.side(m) {
                    Side::Below | Side::At | Side::Band => {
                        v.theorems.push(rules::ESCAPE_THROUGH_TRANSIENT_PART);
                        Phase::WeaklyRecurrent
                    }
                    Side::Above => {
                        v.notes.push("recurrent; strong recurrence above the homogeneous threshold is not decided".into());
                        Phase::Unknown
                    }
                },
            };
            if first.side(m) == Side::At {
                v.boundary_note = Some("m = 1/rho: the critical value is transient".into());
            }
            v.thresholds = vec![first, second];
            Ok(v)
        }
        KernelModel::TwoPointEnvironmentZ(env) => {
            let support = env
                .laws()
                .iter()
                .zip(env.weights())
                .filter(|(_, &w)| w > 0.0)
                .map(|(&p, _)| NeighbourLaw::walk_z(p))
                .collect::<Result<Vec<_>>>()?;
            let r = randenv_criterion(&support, m)?;
            let mut v = PhaseVerdict::new(
                match r.phase {
                    RandEnvPhase::StronglyRecurrent => Phase::StronglyRecurrent,
                    RandEnvPhase::Transient => Phase::Transient,
                },
                Some(m),
            );
            v.thresholds.push(Threshold::exact("1/hull_value", 1.0 / r.value, tol));
            v.theorems.push(rules::RANDOM_ENVIRONMENT_HULL);
            v.notes.push(format!("hull grid step {}", r.grid_step));
            if r.boundary {
                v.boundary_note = Some("1/m* equals the hull value: transient".into());
            }
            Ok(v)
        }
        KernelModel::CycleGraph(_) => {
            let rho = rho_estimate(model, opts)?;
            let t = Threshold::from_estimate("1/rho", &rho, tol);
            let mut v = PhaseVerdict::new(Phase::Unknown, Some(m));
            v.theorems.push(rules::TRANSIENT_IFF_BELOW_RHO);
            match t.side(m) {
                Side::Below | Side::At => v.phase = Phase::Transient,
                Side::Band => v.phase = Phase::Boundary,
                Side::Above => v.notes.push("recurrent; no rule decides strong recurrence here".into()),
            }
            v.thresholds.push(t);
            Ok(v)
        }
    }
}

/// Components covered by the homogeneous-process classification.
fn is_homogeneous(c: &KernelModel) -> bool {
    match c {
        KernelModel::DriftZd(_) | KernelModel::RegularTree(_) | KernelModel::FiniteChain(_) => true,
        KernelModel::ConeTypeTree(t) => irreducible_cones(t),
        _ => false,
    }
}

/// The cone digraph has one irreducible class holding every non-root type.
fn irreducible_cones(tree: &ConeTypeTree) -> bool {
    let classes = cone_classes(tree);
    let reachable = tree.reachable_types();
    classes.len() == 1
        && (0..tree.types().len() as u32)
            .filter(|&t| reachable[t as usize] && t != tree.root_type())
            .all(|t| classes[0].contains(&t))
}

fn two_phase(m: f64, t: Threshold, strong_rule: &'static str) -> PhaseVerdict {
    let mut v = PhaseVerdict::new(Phase::Unknown, Some(m));
    v.theorems.push(rules::TRANSIENT_IFF_BELOW_RHO);
    match t.side(m) {
        Side::Below => v.phase = Phase::Transient,
        Side::At => {
            v.phase = Phase::Transient;
            v.boundary_note = Some("m = 1/rho: the critical value is transient".into());
        }
        Side::Band => {
            v.phase = Phase::Boundary;
            v.boundary_note = Some(format!("m lies in the truncation band [{}, {}] of 1/rho", t.low, t.high));
        }
        Side::Above => {
            v.phase = Phase::StronglyRecurrent;
            v.theorems.push(strong_rule);
        }
    }
    v.thresholds.push(t);
    v
}

/// `m ≤ 1/ρ` transient, up to the second threshold weakly recurrent, above
/// it strongly recurrent. At the second threshold itself the verdict is weak
/// when `weak_at_second` holds.
fn three_phase(m: f64, first: Threshold, second: Threshold, weak_at_second: bool, rule: &'static str) -> PhaseVerdict {
    let mut v = two_phase(m, first, rule);
    v.theorems.retain(|&r| r != rule);
    v.theorems.push(rule);
    if v.phase == Phase::StronglyRecurrent {
        v.phase = match second.side(m) {
            Side::Below => Phase::WeaklyRecurrent,
            Side::At => {
                v.boundary_note = Some(format!(
                    "m = {}: {}",
                    second.name,
                    if weak_at_second { "the infimum is attained, weakly recurrent" } else { "strongly recurrent" }
                ));
                if weak_at_second { Phase::WeaklyRecurrent } else { Phase::StronglyRecurrent }
            }
            Side::Band => {
                v.boundary_note =
                    Some(format!("m lies in the truncation band [{}, {}] of {}", second.low, second.high, second.name));
                Phase::Boundary
            }
            Side::Above => Phase::StronglyRecurrent,
        };
    }
    v.thresholds.push(second);
    v
}

/// Tolerances for reading simulation summaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TolProfile {
    /// Slack on `E ν ≤ 1`.
    pub frozen_mean: f64,
    /// `α̂ ≥ 1 − alpha` counts as strong.
    pub alpha: f64,
    pub k: u64,
    pub min_r2: f64,
}

impl Default for TolProfile {
    fn default() -> Self {
        Self { frozen_mean: 0.02, alpha: 0.05, k: 50, min_r2: 0.9 }
    }
}

/// Phase suggested by simulation summaries alone.
pub fn empirical_verdict(evidence: &[SimulationSummary], profile: &TolProfile) -> Result<PhaseVerdict> {
    let find = |e: Estimator| evidence.iter().find(|s| s.estimator == e);
    let nu = find(Estimator::FrozenMean)
        .ok_or_else(|| Error::Parameter("empirical verdict needs a frozen-mean summary".into()))?;
    let mean = nu.headline();
    let mut v = PhaseVerdict::new(Phase::Unknown, None);
    v.theorems.push(rules::FROZEN_MEAN_EVIDENCE);
    v.evidence.push(format!("frozen_mean [{:.4}, {:.4}]", mean.ci_low, mean.ci_high));
    if mean.ci_high <= 1.0 + profile.frozen_mean {
        v.phase = Phase::Transient;
        return Ok(v);
    }
    if !(mean.ci_low > 1.0) {
        v.notes.push("frozen-mean interval straddles 1".into());
        return Ok(v);
    }
    let Some(alpha) = find(Estimator::AlphaProxy) else {
        v.notes.push("recurrent evidence; no alpha proxy to separate weak from strong".into());
        return Ok(v);
    };
    let a = alpha.headline();
    v.theorems.push(rules::ALPHA_PROXY_EVIDENCE);
    v.evidence.push(format!("alpha_proxy {:.4} (K = {})", a.value, alpha.k.unwrap_or(profile.k)));
    if a.value < 1.0 - profile.alpha {
        v.phase = Phase::WeaklyRecurrent;
        return Ok(v);
    }
    v.phase = Phase::StronglyRecurrent;
    if let Some(fit) = find(Estimator::ReturnTime).and_then(|s| s.tail_fit) {
        v.evidence.push(format!("return tail R2 {:.4}", fit.r2));
        if fit.r2 > profile.min_r2 && fit.slope < 0.0 {
            v.theorems.push(rules::TAIL_FIT_EVIDENCE);
            v.phase = Phase::PositiveRecurrent;
        }
    }
    Ok(v)
}

#[derive(Clone, Debug, Serialize)]
pub struct Reconciliation {
    pub model_id: String,
    pub law_id: String,
    pub analytic: Phase,
    pub empirical: Phase,
    pub agree: bool,
    /// `|m − nearest threshold|`.
    pub boundary_distance: Option<f64>,
    pub near_boundary: bool,
    pub evidence: Vec<String>,
    pub note: String,
}

/// Compares the two verdicts; the analytic one always stands.
pub fn reconcile(analytic: &PhaseVerdict, empirical: &PhaseVerdict) -> Result<Reconciliation> {
    if analytic.model_id != empirical.model_id || analytic.law_id != empirical.law_id {
        return Err(Error::IdMismatch(format!(
            "analytic verdict is for {}/{}, empirical for {}/{}",
            analytic.model_id, analytic.law_id, empirical.model_id, empirical.law_id
        )));
    }
    let (a, e) = (analytic.phase, empirical.phase);
    let agree = a == e || (a.is_strong() && e.is_strong());
    let boundary_distance = analytic.m.and_then(|m| {
        analytic.thresholds.iter().map(|t| (m - t.value).abs()).min_by(f64::total_cmp)
    });
    let near_boundary = analytic.boundary_note.is_some()
        || a == Phase::Boundary
        || analytic
            .m
            .zip(boundary_distance)
            .is_some_and(|(m, d)| d <= 0.02 * m);
    let note = if agree {
        "analytic and empirical verdicts agree".to_string()
    } else if near_boundary {
        format!(
            "disagreement near a critical value (distance {:.3e}); finite-size effects are likely, the analytic verdict {} stands",
            boundary_distance.unwrap_or(f64::NAN),
            a.as_str()
        )
    } else {
        format!("disagreement away from the critical values; the analytic verdict {} stands", a.as_str())
    };
    Ok(Reconciliation {
        model_id: analytic.model_id.clone(),
        law_id: analytic.law_id.clone(),
        analytic: a,
        empirical: e,
        agree,
        boundary_distance,
        near_boundary,
        evidence: empirical.evidence.clone(),
        note,
    })
}
