//! Truncated Green and first-return generating functions, Galton–Watson
//! extinction, and the Foster-type positive recurrence check.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{build_ball, FiniteRegion, KernelModel, Offspring, OffspringLaw, StateId, DEFAULT_NODE_CAP, MASS_TOL};
use crate::spectral::{CertificateFunction, Method, SlackReport, SpectralEstimate, Variant};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    /// `a_n = p^(n)(x,x)`.
    Green,
    /// `a_n = P_x(T_x = n)`.
    FirstReturn,
}

impl SeriesKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SeriesKind::Green => "green",
            SeriesKind::FirstReturn => "first_return",
        }
    }
}

/// Coefficients `a_0..a_N` of a power series at one state.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesTable {
    pub center: StateId,
    pub kind: SeriesKind,
    pub coefficients: Vec<f64>,
    pub radius: u32,
    /// Every path of length at most `N` from the center stays in the ball.
    pub exact: bool,
}

/// One CSV row of a series table.
#[derive(Clone, Debug, Serialize)]
pub struct SeriesRow {
    pub model_id: String,
    pub center: String,
    pub kind: &'static str,
    pub n: usize,
    pub coefficient: f64,
}

impl SeriesTable {
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    /// Truncated series `Σ a_n z^n`.
    pub fn eval(&self, z: f64) -> f64 {
        self.coefficients.iter().rev().fold(0.0, |acc, a| acc * z + a)
    }

    /// `max a_n^{1/n}` over the upper half of the computed range.
    pub fn root_growth(&self) -> f64 {
        let n = self.order();
        (n.div_ceil(2).max(1)..=n)
            .filter(|&k| self.coefficients[k] > 0.0)
            .map(|k| self.coefficients[k].powf(1.0 / k as f64))
            .fold(0.0, f64::max)
    }

    pub fn rows(&self, model_id: &str) -> Vec<SeriesRow> {
        let center = self.center.to_string();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(n, &a)| SeriesRow {
                model_id: model_id.to_string(),
                center: center.clone(),
                kind: self.kind.as_str(),
                n,
                coefficient: a,
            })
            .collect()
    }
}

fn series(model: &KernelModel, x: &StateId, n: usize, radius: u32, kind: SeriesKind) -> Result<SeriesTable> {
    if n < 1 {
        return Err(Error::Parameter("series order must be at least 1".into()));
    }
    let region = build_ball(model, x, radius.max(1), DEFAULT_NODE_CAP)?;
    let mut v = vec![0.0; region.len()];
    let mut next = vec![0.0; region.len()];
    v[region.center()] = 1.0;
    let mut coefficients = Vec::with_capacity(n + 1);
    coefficients.push(if kind == SeriesKind::Green { 1.0 } else { 0.0 });
    for _ in 1..=n {
        region.vecmat(&v, &mut next);
        let c = region.center();
        coefficients.push(next[c]);
        if kind == SeriesKind::FirstReturn {
            next[c] = 0.0;
        }
        std::mem::swap(&mut v, &mut next);
    }
    Ok(SeriesTable {
        center: x.clone(),
        kind,
        coefficients,
        radius,
        exact: 2 * radius as usize >= n * model.max_jump() as usize,
    })
}

/// Return probabilities `p^(n)(x,x)` for `n ≤ N`, propagated over the ball of
/// `radius` around `x`. Mass that leaves the ball is lost, so the values
/// are exact once `2·radius ≥ N·max_jump`.
pub fn green_coefficients(model: &KernelModel, x: &StateId, n: usize, radius: u32) -> Result<SeriesTable> {
    series(model, x, n, radius, SeriesKind::Green)
}

/// First-return probabilities `P_x(T_x = n)` by the taboo recursion that
/// removes the mass arriving at `x` after every step.
pub fn first_return_coefficients(
    model: &KernelModel,
    x: &StateId,
    n: usize,
    radius: u32,
) -> Result<SeriesTable> {
    series(model, x, n, radius, SeriesKind::FirstReturn)
}

/// Root of `U(x,x|z) = 1` from a truncated first-return table.
#[derive(Clone, Debug, Serialize)]
pub struct URoot {
    /// Largest `z` with truncated `U(z) ≤ 1`; truncation can only push it up.
    pub z_star: f64,
    /// `1 / z_star`, a spectral radius estimate biased downwards.
    pub estimate: SpectralEstimate,
    pub overestimates_root: bool,
}

/// Solves `Σ a_n z^n = 1` by bisection.
///
/// The first-return series of a recurrent chain reaches 1 at `z = 1/ρ`, the
/// radius of convergence, so `z_star` estimates `1/ρ` and its reciprocal
/// estimates `ρ`.
pub fn rho_from_u(table: &SeriesTable) -> Result<URoot> {
    if table.kind != SeriesKind::FirstReturn {
        return Err(Error::Parameter("rho_from_u needs a first-return table".into()));
    }
    if table.order() < 10 {
        return Err(Error::Parameter("rho_from_u needs at least 10 coefficients".into()));
    }
    if table.coefficients.iter().all(|&a| a == 0.0) {
        return Err(Error::DegenerateSeries);
    }
    let mut hi = 1.0;
    while table.eval(hi) <= 1.0 {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::DegenerateSeries);
        }
    }
    let mut lo = 0.0;
    while hi - lo > 1e-12 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if table.eval(mid) <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let z = lo;
    let mut estimate = SpectralEstimate::closed_form(1.0 / z, Variant::Rho);
    estimate.method = Method::FirstReturn;
    estimate.lower_bound = true;
    estimate.residual = hi - lo;
    Ok(URoot { z_star: z, estimate, overestimates_root: true })
}

/// `E_x ν(x) = U(x,x|m)` for a constant mean `m`, from a truncated table.
pub fn expected_frozen_mean(table: &SeriesTable, law: &OffspringLaw) -> Result<f64> {
    if table.kind != SeriesKind::FirstReturn {
        return Err(Error::Parameter("expected frozen mean needs a first-return table".into()));
    }
    let m = law
        .constant_mean()
        .ok_or_else(|| Error::Applicability("E nu = U(m) needs a constant mean".into()))?;
    Ok(table.eval(m))
}

/// Galton–Watson offspring law with `masses[k] = P(k children)`, `k ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GwLaw {
    masses: Vec<f64>,
}

impl GwLaw {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() || masses.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidLaw("GW masses must be nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidLaw(format!("GW masses sum to {total}, expected 1")));
        }
        Ok(Self { masses })
    }

    /// Each child of a BMC offspring law survives independently with `p`.
    pub fn percolated(law: &Offspring, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Parameter(format!("percolation parameter {p} not in [0,1]")));
        }
        let max = law.max_offspring();
        let mut masses = vec![0.0; max + 1];
        for k in 1..=max {
            let mk = law.mass(k);
            if mk == 0.0 {
                continue;
            }
            let mut binom = 1.0;
            for j in 0..=k {
                masses[j] += mk * binom * p.powi(j as i32) * (1.0 - p).powi((k - j) as i32);
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
        }
        Self::new(masses)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mean(&self) -> f64 {
        self.masses.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn pgf(&self, s: f64) -> f64 {
        self.masses.iter().rev().fold(0.0, |acc, p| acc * s + p)
    }

    pub fn pgf_derivative(&self, s: f64) -> f64 {
        self.masses.iter().enumerate().skip(1).rev().fold(0.0, |acc, (k, p)| acc * s + k as f64 * p)
    }
}

impl From<&Offspring> for GwLaw {
    fn from(law: &Offspring) -> Self {
        let mut masses = vec![0.0; law.max_offspring() + 1];
        for (k, m) in masses.iter_mut().enumerate().skip(1) {
            *m = law.mass(k);
        }
        Self { masses }
    }
}

/// Smallest fixed point of the offspring generating function.
///
/// Iterates `s ← f(s)` from 0 and finishes with Newton steps. Laws with
/// `m ≤ 1` and `μ_1 < 1` die out surely.
pub fn gw_extinction(law: &GwLaw) -> f64 {
    let m = law.mean();
    let mu1 = law.masses.get(1).copied().unwrap_or(0.0);
    if m <= 1.0 && mu1 < 1.0 {
        return 1.0;
    }
    let mut s = 0.0;
    for _ in 0..1_000_000 {
        let next = law.pgf(s);
        let done = (next - s).abs() <= 1e-12;
        s = next;
        if done {
            break;
        }
    }
    for _ in 0..3 {
        let slope = law.pgf_derivative(s) - 1.0;
        if slope.abs() < 1e-6 {
            break;
        }
        let next = s - (law.pgf(s) - s) / slope;
        if !(0.0..1.0).contains(&next) {
            break;
        }
        s = next;
    }
    s
}

/// Checks `P f(x) ≤ (f(x) − ε)/m(x)` at every state of `region` except the
/// origin. A holding verdict is evidence for `E_x T_origin < ∞` on the
/// region; it is global only when `f` has an extension rule.
pub fn check_foster(
    model: &KernelModel,
    law: &OffspringLaw,
    origin: &StateId,
    f: &CertificateFunction,
    eps: f64,
    region: &FiniteRegion,
) -> Result<SlackReport> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("Foster epsilon {eps} must be positive")));
    }
    let f_origin = f.eval(origin)?;
    if !(f_origin > 0.0) {
        return Err(Error::InvalidCertificate(format!("f(origin) = {f_origin} is not positive")));
    }
    let mut buf = Vec::new();
    let mut slacks = Vec::with_capacity(region.len());
    for x in region.states().iter().filter(|x| *x != origin) {
        let fx = f.eval(x)?;
        model.neighbors_into(x, &mut buf)?;
        let mut pf = 0.0;
        for (y, p) in &buf {
            let fy = f.eval(y)?;
            if !(fy >= 0.0) {
                return Err(Error::InvalidCertificate(format!("f({y}) = {fy} is negative")));
            }
            pf += p * fy;
        }
        if !(fx >= 0.0) {
            return Err(Error::InvalidCertificate(format!("f({x}) = {fx} is negative")));
        }
        slacks.push((x.clone(), (fx - eps) / law.mean_at(model, x) - pf));
    }
    Ok(SlackReport::from_slacks(slacks, f.is_global()))
}
