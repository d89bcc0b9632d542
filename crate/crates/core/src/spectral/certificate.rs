use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{FiniteRegion, KernelModel, OffspringLaw, StateId};

/// How a certificate is evaluated off its tabulated states.
#[derive(Clone)]
pub enum Extension {
    /// Same value everywhere else.
    Constant(f64),
    /// Closed-form expression in the state encoding.
    Formula(Arc<dyn Fn(&StateId) -> f64 + Send + Sync>),
    /// Undefined off the table.
    None,
}

impl fmt::Debug for Extension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extension::Constant(c) => write!(f, "Constant({c})"),
            Extension::Formula(_) => write!(f, "Formula"),
            Extension::None => write!(f, "None"),
        }
    }
}

/// A positive test function given by a table plus an extension rule.
#[derive(Clone, Debug)]
pub struct CertificateFunction {
    values: HashMap<StateId, f64>,
    extension: Extension,
}

impl CertificateFunction {
    pub fn new(values: HashMap<StateId, f64>, extension: Extension) -> Self {
        Self { values, extension }
    }

    /// A function given entirely by a formula.
    pub fn formula(f: impl Fn(&StateId) -> f64 + Send + Sync + 'static) -> Self {
        Self { values: HashMap::new(), extension: Extension::Formula(Arc::new(f)) }
    }

    pub fn constant(c: f64) -> Self {
        Self { values: HashMap::new(), extension: Extension::Constant(c) }
    }

    /// `λ^{x_1}` on a lattice.
    pub fn exponential(lambda: f64) -> Self {
        Self::formula(move |x| lambda.powf(x.coordinate().unwrap_or(0) as f64))
    }

    /// Whether the function is defined on every state.
    pub fn is_global(&self) -> bool {
        !matches!(self.extension, Extension::None)
    }

    pub fn eval(&self, x: &StateId) -> Result<f64> {
        if let Some(v) = self.values.get(x) {
            return Ok(*v);
        }
        match &self.extension {
            Extension::Constant(c) => Ok(*c),
            Extension::Formula(f) => Ok(f(x)),
            Extension::None => Err(Error::InvalidCertificate(format!(
                "no value at {x} and no extension rule"
            ))),
        }
    }
}

/// Per-state slacks of a certificate inequality on a region.
#[derive(Clone, Debug, Serialize)]
pub struct SlackReport {
    pub slacks: Vec<(StateId, f64)>,
    pub min_slack: f64,
    pub worst: Option<StateId>,
    pub holds: bool,
    /// The function's extension rule covers every state.
    pub global_extension: bool,
}

pub(crate) const SLACK_TOL: f64 = 1e-12;

impl SlackReport {
    pub(crate) fn from_slacks(slacks: Vec<(StateId, f64)>, global_extension: bool) -> Self {
        let (worst, min_slack) = slacks
            .iter()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(x, s)| (Some(x.clone()), *s))
            .unwrap_or((None, f64::INFINITY));
        Self { holds: min_slack >= -SLACK_TOL, slacks, min_slack, worst, global_extension }
    }
}

/// `P f(x)` summed over the full row of `x`.
pub(crate) fn apply_kernel(
    model: &KernelModel,
    f: &CertificateFunction,
    x: &StateId,
    buf: &mut Vec<(StateId, f64)>,
) -> Result<f64> {
    model.neighbors_into(x, buf)?;
    let mut total = 0.0;
    for (y, p) in buf.iter() {
        let fy = f.eval(y)?;
        if !(fy > 0.0) {
            return Err(Error::InvalidCertificate(format!("f({y}) = {fy} is not positive")));
        }
        total += p * fy;
    }
    Ok(total)
}

/// Checks `P f(x) ≤ f(x) / m(x)` on the states of `region`.
///
/// The slack at `x` is `f(x)/m(x) − P f(x)`; the verdict holds when every
/// slack is at least `−1e-12`.
pub fn check_superharmonic(
    model: &KernelModel,
    law: &OffspringLaw,
    f: &CertificateFunction,
    region: &FiniteRegion,
) -> Result<SlackReport> {
    let mut buf = Vec::new();
    let mut slacks = Vec::with_capacity(region.len());
    for x in region.states() {
        let fx = f.eval(x)?;
        if !(fx > 0.0) {
            return Err(Error::InvalidCertificate(format!("f({x}) = {fx} is not positive")));
        }
        let pf = apply_kernel(model, f, x, &mut buf)?;
        slacks.push((x.clone(), fx / law.mean_at(model, x) - pf));
    }
    Ok(SlackReport::from_slacks(slacks, f.is_global()))
}
