//! Spectral radius of a kernel and its variants.
//!
//! Finite truncations give lower bounds through their Perron roots; closed
//! forms are used where a family has one.

mod certificate;
mod variants;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{build_ball, lumped_cone_ball, FiniteRegion, KernelModel, StateId, DEFAULT_NODE_CAP};

pub use certificate::{check_superharmonic, CertificateFunction, Extension, SlackReport};
pub use variants::{
    cone_classes, evaluate_candidate_subset, local_type_representatives, rho_variant,
    VariantReport,
};

/// Default iteration cap for power iteration.
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Rho,
    Varrho,
    TildeRho,
    CheckRho,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Rho => "rho",
            Variant::Varrho => "varrho",
            Variant::TildeRho => "tilde_rho",
            Variant::CheckRho => "check_rho",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    PowerIteration,
    ClosedForm,
    Ldp,
    FirstReturn,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::PowerIteration => "power_iteration",
            Method::ClosedForm => "closed_form",
            Method::Ldp => "ldp",
            Method::FirstReturn => "first_return",
        }
    }
}

/// A value of ρ or one of its variants.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub value: f64,
    pub variant: Variant,
    pub method: Method,
    /// Truncation radius, if any.
    pub radius: Option<u32>,
    /// Truncations bound the true value from below.
    pub lower_bound: bool,
    pub residual: f64,
    pub iterations: usize,
    /// Number of states of the truncation.
    pub states: usize,
    /// Increase over the previous radius, when known.
    pub gap: Option<f64>,
}

impl SpectralEstimate {
    pub fn closed_form(value: f64, variant: Variant) -> Self {
        Self {
            value,
            variant,
            method: Method::ClosedForm,
            radius: None,
            lower_bound: false,
            residual: 0.0,
            iterations: 0,
            states: 0,
            gap: None,
        }
    }

    /// Width of the uncertainty band above a truncated value: the residual
    /// plus the last increment scaled by the radius. Zero for closed forms.
    pub fn error_band(&self) -> f64 {
        match (self.method, self.gap, self.radius) {
            (Method::ClosedForm | Method::Ldp, _, _) => 0.0,
            (_, Some(g), Some(r)) => self.residual + g.max(0.0) * r as f64,
            _ => self.residual,
        }
    }
}

/// Power-iteration controls.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub node_cap: usize,
    /// Radius used when a single truncation stands in for the limit.
    pub radius: u32,
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { tol: 1e-9, max_iter: DEFAULT_MAX_ITER, node_cap: DEFAULT_NODE_CAP, radius: 64 }
    }
}

impl SpectralOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Perron root and vector of a nonnegative irreducible matrix.
#[derive(Clone, Debug)]
pub struct Perron {
    pub lambda: f64,
    /// Positive eigenvector estimate normalised to max 1.
    pub vector: Vec<f64>,
    /// Collatz–Wielandt bounds on λ.
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
    /// `‖Qv − λv‖_∞ / ‖v‖_∞`.
    pub residual: f64,
}

/// Power iteration on `(Q + I)/2` from the all-ones vector.
///
/// Stops when the Collatz–Wielandt bounds on the Perron root of `Q` are
/// within `tol`; the returned λ is their midpoint so that `Qv ≤ (λ + tol) v`.
pub fn perron(region: &FiniteRegion, tol: f64, max_iter: usize) -> Result<Perron> {
    if !(tol > 0.0) {
        return Err(Error::Parameter(format!("tolerance {tol} must be positive")));
    }
    let comps = region.components();
    if comps.len() > 1 {
        let comp = comps
            .iter()
            .find(|c| c.binary_search(&region.center()).is_ok())
            .unwrap_or(&comps[0]);
        return Err(Error::Reducible {
            size: comp.len(),
            sample: comp.iter().take(8).map(|&i| region.states()[i].clone()).collect(),
        });
    }
    let n = region.len();
    let mut v = vec![1.0; n];
    let mut qv = vec![0.0; n];
    let mut lower = 0.0;
    let mut upper = f64::INFINITY;
    for it in 1..=max_iter {
        region.matvec(&v, &mut qv);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in qv.iter().zip(&v) {
            let r = a / b;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        lower = lo;
        upper = hi;
        if hi - lo <= tol {
            let lambda = 0.5 * (lo + hi);
            let residual = residual(&qv, &v, lambda);
            return Ok(Perron { lambda, vector: v, lower: lo, upper: hi, iterations: it, residual });
        }
        let mut top = 0.0f64;
        for (x, q) in v.iter_mut().zip(&qv) {
            *x = 0.5 * (*x + q);
            top = top.max(*x);
        }
        v.iter_mut().for_each(|x| *x /= top);
    }
    let lambda = 0.5 * (lower + upper);
    region.matvec(&v, &mut qv);
    Err(Error::NotConverged { iterations: max_iter, residual: residual(&qv, &v, lambda) })
}

fn residual(qv: &[f64], v: &[f64], lambda: f64) -> f64 {
    let num = qv.iter().zip(v).map(|(a, b)| (a - lambda * b).abs()).fold(0.0, f64::max);
    let den = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    num / den
}

/// Perron root of an irreducible truncation.
pub fn rho_finite(region: &FiniteRegion, tol: f64) -> Result<SpectralEstimate> {
    rho_finite_with(region, tol, DEFAULT_MAX_ITER)
}

pub fn rho_finite_with(region: &FiniteRegion, tol: f64, max_iter: usize) -> Result<SpectralEstimate> {
    let p = perron(region, tol, max_iter)?;
    Ok(SpectralEstimate {
        value: p.lambda,
        variant: Variant::Rho,
        method: Method::PowerIteration,
        radius: Some(region.radius()),
        lower_bound: true,
        residual: p.residual,
        iterations: p.iterations,
        states: region.len(),
        gap: None,
    })
}

/// Error of a truncation sequence together with the radii already done.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("truncation stopped after {} radii: {source}", completed.len())]
pub struct TruncationError {
    pub completed: Vec<SpectralEstimate>,
    pub source: Error,
}

/// Truncation of `model` to the ball around `center`, reduced to the
/// strongly connected component of the center.
pub fn irreducible_ball(
    model: &KernelModel,
    center: &StateId,
    radius: u32,
    node_cap: usize,
) -> Result<FiniteRegion> {
    let ball = build_ball(model, center, radius, node_cap)?;
    if ball.is_irreducible() {
        Ok(ball)
    } else {
        ball.restrict(&ball.center_component())
    }
}

/// Perron roots of the truncations to balls of radius `1..=max_radius`.
pub fn rho_truncation_sequence(
    model: &KernelModel,
    center: &StateId,
    max_radius: u32,
    opts: &SpectralOptions,
) -> std::result::Result<Vec<SpectralEstimate>, TruncationError> {
    let mut out: Vec<SpectralEstimate> = Vec::new();
    if max_radius < 2 {
        return Err(TruncationError {
            completed: out,
            source: Error::Parameter("max_radius must be at least 2".into()),
        });
    }
    for r in 1..=max_radius {
        let step = irreducible_ball(model, center, r, opts.node_cap)
            .and_then(|region| rho_finite_with(&region, opts.tol, opts.max_iter));
        match step {
            Ok(mut est) => {
                est.gap = out.last().map(|prev| est.value - prev.value);
                out.push(est);
            }
            Err(source) => return Err(TruncationError { completed: out, source }),
        }
    }
    Ok(out)
}

/// Closed-form spectral radius when the family has one.
pub fn rho_closed_form(model: &KernelModel) -> Option<SpectralEstimate> {
    let value = match model {
        KernelModel::DriftZd(m) => m.rho(),
        KernelModel::RegularTree(m) => m.rho(),
        KernelModel::ConeTypeTree(t) if t.types().len() == 1 => {
            let b = t.types()[0].back;
            if b <= 0.5 {
                2.0 * (b * (1.0 - b)).sqrt()
            } else {
                1.0
            }
        }
        KernelModel::Glued(g) => {
            let deg = g.line_tree_degree()? as f64;
            if deg >= 5.0 {
                ((deg - 1.0) / (2.0 * (deg - 2.0))).sqrt()
            } else {
                2.0 * (deg - 1.0).sqrt() / deg
            }
        }
        KernelModel::CycleGraph(_) | KernelModel::FiniteChain(_) => 1.0,
        _ => return None,
    };
    Some(SpectralEstimate::closed_form(value, Variant::Rho))
}

/// Perron root of a lumped tree truncation at `radius`, with the gap to
/// `radius − 1` recorded.
pub(crate) fn lumped_estimate(
    tree: &crate::models::ConeTypeTree,
    start: u32,
    at_root: bool,
    allowed: Option<&[bool]>,
    opts: &SpectralOptions,
) -> Result<SpectralEstimate> {
    let mut radius = opts.radius.max(2);
    loop {
        let attempt = (|| {
            let big = lumped_cone_ball(tree, start, at_root, allowed, radius, opts.node_cap)?;
            let small = lumped_cone_ball(tree, start, at_root, allowed, radius - 1, opts.node_cap)?;
            let a = rho_finite_with(&big, opts.tol, opts.max_iter)?;
            let b = rho_finite_with(&small, opts.tol, opts.max_iter)?;
            Ok::<_, Error>(SpectralEstimate { gap: Some(a.value - b.value), ..a })
        })();
        match attempt {
            Err(Error::ResourceLimit { .. }) if radius > 2 => radius /= 2,
            other => return other,
        }
    }
}

/// Best available value of ρ(P): the closed form, or a truncation at
/// `opts.radius` (halved until it fits the node cap).
pub fn rho_estimate(model: &KernelModel, opts: &SpectralOptions) -> Result<SpectralEstimate> {
    if let Some(est) = rho_closed_form(model) {
        return Ok(est);
    }
    match model {
        KernelModel::ConeTypeTree(t) => lumped_estimate(t, t.root_type(), true, None, opts),
        KernelModel::RegularTree(t) => {
            lumped_estimate(&t.as_cone_tree(), 0, true, None, opts)
        }
        _ => {
            let center = match model {
                KernelModel::SeedChain(s) => StateId::site(s.seed_site()),
                _ => model.origin(),
            };
            let mut radius = opts.radius.max(2);
            loop {
                let attempt = (|| {
                    let big = irreducible_ball(model, &center, radius, opts.node_cap)?;
                    let small = irreducible_ball(model, &center, radius - 1, opts.node_cap)?;
                    let a = rho_finite_with(&big, opts.tol, opts.max_iter)?;
                    let b = rho_finite_with(&small, opts.tol, opts.max_iter)?;
                    Ok::<_, Error>(SpectralEstimate { gap: Some(a.value - b.value), ..a })
                })();
                match attempt {
                    Err(Error::ResourceLimit { .. }) if radius > 2 => radius /= 2,
                    other => return other,
                }
            }
        }
    }
}
