//! Cramér rate functions of bounded one-dimensional step laws.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{KernelModel, MASS_TOL};
use crate::spectral::{Method, SpectralEstimate, Variant};

const THETA_MAX: f64 = 50.0;

/// Increment law on `{min, …, min + len − 1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepLaw {
    min: i64,
    masses: Vec<f64>,
}

impl StepLaw {
    /// `masses[k] = P(X = min + k)`; zero masses at both ends are trimmed.
    pub fn new(min: i64, masses: Vec<f64>) -> Result<Self> {
        if masses.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidLaw("step masses must be nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidLaw(format!("step masses sum to {total}, expected 1")));
        }
        let first = masses.iter().position(|&p| p > 0.0).expect("positive total");
        let last = masses.iter().rposition(|&p| p > 0.0).expect("positive total");
        Ok(Self { min: min + first as i64, masses: masses[first..=last].to_vec() })
    }

    /// `±1` steps, up with probability `p`.
    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidLaw(format!("p = {p} not in [0,1]")));
        }
        Self::new(-1, vec![1.0 - p, 0.0, p])
    }

    /// Increment law of a one-dimensional lattice walk.
    pub fn from_model(model: &KernelModel) -> Result<Self> {
        match model {
            KernelModel::DriftZd(w) if w.dim() == 1 => Self::bernoulli(w.p_plus()[0]),
            _ => Err(Error::Unsupported(format!(
                "{} has no single i.i.d. step law on Z",
                model.label()
            ))),
        }
    }

    pub fn support(&self) -> (i64, i64) {
        (self.min, self.min + self.masses.len() as i64 - 1)
    }

    pub fn mass(&self, s: i64) -> f64 {
        usize::try_from(s - self.min).ok().and_then(|k| self.masses.get(k)).copied().unwrap_or(0.0)
    }

    pub fn points(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.masses.iter().enumerate().filter(|e| *e.1 > 0.0).map(|(k, &p)| (self.min + k as i64, p))
    }

    pub fn mean(&self) -> f64 {
        self.points().map(|(s, p)| s as f64 * p).sum()
    }

    pub fn max_jump(&self) -> u64 {
        let (lo, hi) = self.support();
        lo.unsigned_abs().max(hi.unsigned_abs())
    }

    /// gcd of the differences between support points.
    pub fn span(&self) -> u64 {
        let (lo, _) = self.support();
        self.points().fold(0u64, |g, (s, _)| gcd(g, (s - lo) as u64))
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 { a } else { gcd(b, a % b) }
}

/// `I(a) = sup_θ (θa − Λ(θ))` with `Λ(θ) = log E e^{θX}`.
#[derive(Clone, Debug, Serialize)]
pub struct RateFunction {
    law: StepLaw,
}

impl RateFunction {
    pub fn new(law: StepLaw) -> Self {
        Self { law }
    }

    pub fn law(&self) -> &StepLaw {
        &self.law
    }

    /// `Λ(θ)` by log-sum-exp.
    pub fn log_mgf(&self, theta: f64) -> f64 {
        let top = self.law.points().map(|(s, _)| theta * s as f64).fold(f64::NEG_INFINITY, f64::max);
        top + self.law.points().map(|(s, p)| p * (theta * s as f64 - top).exp()).sum::<f64>().ln()
    }

    /// `Λ'(θ)` and `Λ''(θ)`: mean and variance of the tilted law.
    fn tilted_moments(&self, theta: f64) -> (f64, f64) {
        let top = self.law.points().map(|(s, _)| theta * s as f64).fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for (s, p) in self.law.points() {
            let w = p * (theta * s as f64 - top).exp();
            let s = s as f64;
            z += w;
            m1 += w * s;
            m2 += w * s * s;
        }
        let mean = m1 / z;
        (mean, (m2 / z - mean * mean).max(0.0))
    }
}

/// `I(a)`, infinite outside the support interval.
pub fn rate(rf: &RateFunction, a: f64) -> f64 {
    let (lo, hi) = rf.law.support();
    if a < lo as f64 || a > hi as f64 {
        return f64::INFINITY;
    }
    if a == lo as f64 {
        return -rf.law.mass(lo).ln();
    }
    if a == hi as f64 {
        return -rf.law.mass(hi).ln();
    }
    if a == rf.law.mean() {
        return 0.0;
    }
    let g = |t: f64| t * a - rf.log_mgf(t);
    let (mut l, mut r) = (-THETA_MAX, THETA_MAX);
    while r - l > 1e-10 {
        let m1 = l + (r - l) / 3.0;
        let m2 = r - (r - l) / 3.0;
        if g(m1) < g(m2) {
            l = m1;
        } else {
            r = m2;
        }
    }
    let mut theta = 0.5 * (l + r);
    for _ in 0..3 {
        let (mean, var) = rf.tilted_moments(theta);
        if var <= 0.0 {
            break;
        }
        let next = theta + (a - mean) / var;
        if !next.is_finite() || next.abs() > THETA_MAX || g(next) < g(theta) {
            break;
        }
        theta = next;
    }
    g(theta).max(0.0)
}

/// `e^{−I(0)}`.
pub fn rho_from_ldp(rf: &RateFunction) -> SpectralEstimate {
    let mut e = SpectralEstimate::closed_form((-rate(rf, 0.0)).exp(), Variant::Rho);
    e.method = Method::Ldp;
    e
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedThreshold {
    pub value: f64,
    /// `log m` exceeds `I` at the left support edge; the value is that edge.
    pub clamped: bool,
}

/// `sup{s ≤ E[X] : I(s) ≥ log m}` on the decreasing left branch of `I`.
pub fn speed_threshold(rf: &RateFunction, m: f64) -> Result<SpeedThreshold> {
    if !(m >= 1.0) || !m.is_finite() {
        return Err(Error::Domain(format!("speed threshold needs m >= 1, got {m}")));
    }
    let mean = rf.law.mean();
    let target = m.ln();
    if target == 0.0 {
        return Ok(SpeedThreshold { value: mean, clamped: false });
    }
    let lo = rf.law.support().0 as f64;
    if target >= rate(rf, lo) {
        return Ok(SpeedThreshold { value: lo, clamped: true });
    }
    let (mut l, mut r) = (lo, mean);
    while r - l > 1e-12 {
        let mid = 0.5 * (l + r);
        if rate(rf, mid) >= target {
            l = mid;
        } else {
            r = mid;
        }
    }
    Ok(SpeedThreshold { value: l, clamped: false })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatePoint {
    pub a: f64,
    pub rate: f64,
}

/// `I` on `lo, lo + step, …` up to `hi`.
pub fn rate_curve(rf: &RateFunction, lo: f64, hi: f64, step: f64) -> Result<Vec<RatePoint>> {
    if !(step > 0.0) || hi < lo {
        return Err(Error::Parameter("rate curve needs lo <= hi and step > 0".into()));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n)
        .map(|k| {
            let a = lo + k as f64 * step;
            let a = if (a - a.round()).abs() < 1e-12 { a.round() } else { a };
            RatePoint { a, rate: rate(rf, a) }
        })
        .collect())
}

/// Nearest-neighbour increment law on `Z^d` with masses on `±e_i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NeighbourLaw {
    pub p_plus: Vec<f64>,
    pub p_minus: Vec<f64>,
}

impl NeighbourLaw {
    pub fn new(p_plus: Vec<f64>, p_minus: Vec<f64>) -> Result<Self> {
        if p_plus.len() != p_minus.len() || p_plus.is_empty() {
            return Err(Error::InvalidLaw("p_plus and p_minus must have equal length".into()));
        }
        if p_plus.len() > 3 {
            return Err(Error::Unsupported(format!("dimension {} > 3", p_plus.len())));
        }
        if p_plus.iter().chain(&p_minus).any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidLaw("neighbour masses must be nonnegative".into()));
        }
        let total: f64 = p_plus.iter().chain(&p_minus).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidLaw(format!("neighbour masses sum to {total}, expected 1")));
        }
        Ok(Self { p_plus, p_minus })
    }

    pub fn walk_z(p: f64) -> Result<Self> {
        Self::new(vec![p], vec![1.0 - p])
    }

    pub fn dim(&self) -> usize {
        self.p_plus.len()
    }

    fn mix(laws: &[&NeighbourLaw], w: &[f64]) -> NeighbourLaw {
        let d = laws[0].dim();
        let mut out = NeighbourLaw { p_plus: vec![0.0; d], p_minus: vec![0.0; d] };
        for (law, &wi) in laws.iter().zip(w) {
            for i in 0..d {
                out.p_plus[i] += wi * law.p_plus[i];
                out.p_minus[i] += wi * law.p_minus[i];
            }
        }
        out
    }
}

/// `inf_θ Σ_s e^{⟨θ,s⟩} p(s)` by coordinate descent; each coordinate step is
/// the exact minimiser `θ_i = ½ log(p_i⁻/p_i⁺)`. Returns the value and
/// whether some coordinate is one-sided (infimum only approached as
/// `|θ_i| → ∞`).
pub fn mgf_infimum(law: &NeighbourLaw) -> (f64, bool) {
    let d = law.dim();
    let mut theta = vec![0.0; d];
    let mut one_sided = false;
    let value = |theta: &[f64]| -> f64 {
        (0..d).map(|i| law.p_plus[i] * theta[i].exp() + law.p_minus[i] * (-theta[i]).exp()).sum()
    };
    let mut current = value(&theta);
    for _ in 0..100 {
        for i in 0..d {
            let (a, b) = (law.p_plus[i], law.p_minus[i]);
            theta[i] = match (a > 0.0, b > 0.0) {
                (true, true) => 0.5 * (b / a).ln(),
                (true, false) => {
                    one_sided = true;
                    -THETA_MAX
                }
                (false, true) => {
                    one_sided = true;
                    THETA_MAX
                }
                (false, false) => 0.0,
            };
        }
        let next = value(&theta);
        let done = (current - next).abs() <= 1e-10;
        current = next;
        if done {
            break;
        }
    }
    if one_sided {
        // drop the vanishing e^{−50} terms of the one-sided coordinates
        current = (0..d).map(|i| 2.0 * (law.p_plus[i] * law.p_minus[i]).sqrt()).sum();
    }
    (current, one_sided)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RandEnvPhase {
    StronglyRecurrent,
    Transient,
}

#[derive(Clone, Debug, Serialize)]
pub struct RandEnvVerdict {
    /// sup over hull mixtures of the mgf infimum.
    pub value: f64,
    pub inverse_m: f64,
    pub phase: RandEnvPhase,
    /// `1/m*` within `1e-9` of the value; such cases are transient.
    pub boundary: bool,
    /// Mixture weights attaining the grid maximum.
    pub argmax: Vec<f64>,
    pub grid_step: f64,
    pub one_sided: bool,
}

/// Recurrence of a branching walk in a random environment with the given
/// support of step laws and essential mean offspring `m_star`.
///
/// The hull supremum is taken over a simplex grid of mixture weights.
pub fn randenv_criterion(support: &[NeighbourLaw], m_star: f64) -> Result<RandEnvVerdict> {
    if !(m_star > 1.0) || !m_star.is_finite() {
        return Err(Error::Domain(format!("m* must exceed 1, got {m_star}")));
    }
    let Some(first) = support.first() else {
        return Err(Error::Parameter("environment support is empty".into()));
    };
    if support.iter().any(|l| l.dim() != first.dim()) {
        return Err(Error::Parameter("environment laws have different dimensions".into()));
    }
    let laws: Vec<&NeighbourLaw> = support.iter().collect();
    let k = laws.len();
    let steps = grid_steps(k);
    let mut best = (f64::NEG_INFINITY, Vec::new(), false);
    let mut counts = vec![0usize; k];
    simplex_grid(&mut counts, 0, steps, &mut |c| {
        let w: Vec<f64> = c.iter().map(|&x| x as f64 / steps as f64).collect();
        let (v, one) = mgf_infimum(&NeighbourLaw::mix(&laws, &w));
        if v > best.0 {
            best = (v, w, one);
        }
    });
    let (value, argmax, one_sided) = best;
    let inverse_m = 1.0 / m_star;
    let boundary = (inverse_m - value).abs() <= 1e-9;
    let phase = if !boundary && inverse_m < value {
        RandEnvPhase::StronglyRecurrent
    } else {
        RandEnvPhase::Transient
    };
    Ok(RandEnvVerdict { value, inverse_m, phase, boundary, argmax, grid_step: 1.0 / steps as f64, one_sided })
}

/// Grid resolution `1/steps` keeping at most about `2·10⁵` mixtures.
fn grid_steps(k: usize) -> usize {
    if k <= 2 {
        return 1000;
    }
    let mut steps = 1000usize;
    while steps > 1 && binomial(steps + k - 1, k - 1) > 200_000.0 {
        steps -= 1;
    }
    steps
}

fn binomial(n: usize, r: usize) -> f64 {
    (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn simplex_grid(counts: &mut Vec<usize>, i: usize, left: usize, f: &mut impl FnMut(&[usize])) {
    if i + 1 == counts.len() {
        counts[i] = left;
        f(counts);
        return;
    }
    for c in 0..=left {
        counts[i] = c;
        simplex_grid(counts, i + 1, left - c, f);
    }
}
