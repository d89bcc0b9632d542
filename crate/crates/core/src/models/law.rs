use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{KernelModel, StateId, MASS_TOL};

/// Default cap on the largest offspring number.
pub const DEFAULT_SUPPORT_CAP: usize = 16;

/// Finite-support offspring distribution with `masses[k−1] = μ_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Offspring {
    masses: Vec<f64>,
    /// Set when the masses come from truncating an infinite-support law.
    #[serde(default)]
    truncated: bool,
}

impl Offspring {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        let mut masses = masses;
        while masses.len() > 1 && masses.last() == Some(&0.0) {
            masses.pop();
        }
        if masses.is_empty() {
            return Err(Error::InvalidLaw("empty offspring distribution".into()));
        }
        if masses.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidLaw("offspring masses must be nonnegative".into()));
        }
        let total: f64 = masses.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidLaw(format!(
                "offspring masses sum to {total}, expected 1 (mu_0 = 0 is implicit)"
            )));
        }
        Ok(Self { masses, truncated: false })
    }

    /// Exactly `k ≥ 1` children.
    pub fn fixed(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidLaw("zero offspring is not allowed".into()));
        }
        let mut masses = vec![0.0; k];
        masses[k - 1] = 1.0;
        Self::new(masses)
    }

    pub fn binary() -> Self {
        Self::fixed(2).expect("valid")
    }

    /// Two-point law on `⌊m⌋` and `⌊m⌋ + 1` with mean `m`.
    pub fn with_mean(m: f64) -> Result<Self> {
        if !(m >= 1.0) || !m.is_finite() {
            return Err(Error::InvalidLaw(format!("mean {m} < 1 needs mu_0 > 0")));
        }
        let k = m.floor() as usize;
        let frac = m - k as f64;
        let mut masses = vec![0.0; k + 1];
        masses[k - 1] = 1.0 - frac;
        masses[k] = frac;
        Self::new(masses)
    }

    /// Geometric masses `∝ r^{k−1}` truncated at `cap` and renormalised.
    pub fn truncated_geometric(r: f64, cap: usize) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) || cap == 0 {
            return Err(Error::InvalidLaw("geometric ratio must lie in (0,1)".into()));
        }
        let raw: Vec<f64> = (0..cap).map(|k| r.powi(k as i32)).collect();
        let total: f64 = raw.iter().sum();
        let mut law = Self::new(raw.into_iter().map(|p| p / total).collect())?;
        law.truncated = true;
        Ok(law)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// `μ_k`.
    pub fn mass(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.masses.get(k - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn max_offspring(&self) -> usize {
        self.masses.len()
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    pub fn mean(&self) -> f64 {
        self.masses.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// `Ψ(z) = Σ μ_k z^k`.
    pub fn pgf(&self, z: f64) -> f64 {
        self.masses.iter().rev().fold(0.0, |acc, p| (acc + p) * z)
    }

    /// No branching at all.
    pub fn is_trivial(&self) -> bool {
        self.masses.len() == 1
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.masses.iter().enumerate() {
            acc += p;
            if u < acc {
                return i as u32 + 1;
            }
        }
        self.masses.len() as u32
    }

    /// Total number of children of `count` independent particles.
    pub fn compound<R: Rng + ?Sized>(&self, count: u64, rng: &mut R) -> u64 {
        if self.is_trivial() {
            return count;
        }
        let mut split = Vec::with_capacity(self.masses.len());
        multinomial(count, &self.masses, rng, &mut split);
        split
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, n)| acc.saturating_add(n.saturating_mul(i as u64 + 1)))
    }
}

/// Exact multinomial split of `n` trials by sequential binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R, out: &mut Vec<u64>) {
    out.clear();
    let mut remaining = n;
    let mut rest = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            out.push(0);
            continue;
        }
        if i + 1 == probs.len() {
            out.push(remaining);
            remaining = 0;
            continue;
        }
        let q = if rest > 0.0 { (p / rest).clamp(0.0, 1.0) } else { 1.0 };
        let k = if q >= 1.0 {
            remaining
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(remaining, q).expect("valid binomial").sample(rng)
        };
        out.push(k);
        remaining -= k;
        rest -= p;
    }
}

/// Offspring distributions attached to states.
///
/// Lookup order: explicit state override, then cone-type override, then the
/// default.
#[derive(Clone, Debug, PartialEq)]
pub struct OffspringLaw {
    default: Offspring,
    by_state: BTreeMap<StateId, Offspring>,
    by_cone_type: BTreeMap<u32, Offspring>,
    support_cap: usize,
}

impl OffspringLaw {
    pub fn constant(default: Offspring) -> Self {
        Self {
            default,
            by_state: BTreeMap::new(),
            by_cone_type: BTreeMap::new(),
            support_cap: DEFAULT_SUPPORT_CAP,
        }
    }

    pub fn binary() -> Self {
        Self::constant(Offspring::binary())
    }

    /// No branching.
    pub fn trivial() -> Self {
        Self::constant(Offspring::fixed(1).expect("valid"))
    }

    pub fn with_support_cap(mut self, cap: usize) -> Result<Self> {
        self.support_cap = cap;
        self.check_cap()?;
        Ok(self)
    }

    pub fn with_state(mut self, x: StateId, law: Offspring) -> Result<Self> {
        self.by_state.insert(x, law);
        self.check_cap()?;
        Ok(self)
    }

    pub fn with_cone_type(mut self, t: u32, law: Offspring) -> Result<Self> {
        self.by_cone_type.insert(t, law);
        self.check_cap()?;
        Ok(self)
    }

    fn check_cap(&self) -> Result<()> {
        let widest = self.all().map(|o| o.max_offspring()).max().unwrap_or(0);
        if widest > self.support_cap {
            return Err(Error::InvalidLaw(format!(
                "offspring support {widest} exceeds the cap {}",
                self.support_cap
            )));
        }
        Ok(())
    }

    fn all(&self) -> impl Iterator<Item = &Offspring> {
        std::iter::once(&self.default)
            .chain(self.by_state.values())
            .chain(self.by_cone_type.values())
    }

    pub fn default_law(&self) -> &Offspring {
        &self.default
    }

    pub fn state_overrides(&self) -> &BTreeMap<StateId, Offspring> {
        &self.by_state
    }

    pub fn cone_type_overrides(&self) -> &BTreeMap<u32, Offspring> {
        &self.by_cone_type
    }

    pub fn support_cap(&self) -> usize {
        self.support_cap
    }

    pub fn has_overrides(&self) -> bool {
        !self.by_state.is_empty() || !self.by_cone_type.is_empty()
    }

    /// Distribution used at `x`.
    pub fn at(&self, model: &KernelModel, x: &StateId) -> &Offspring {
        if let Some(o) = self.by_state.get(x) {
            return o;
        }
        if !self.by_cone_type.is_empty() {
            if let Some(o) = model.cone_type(x).and_then(|t| self.by_cone_type.get(&t)) {
                return o;
            }
        }
        &self.default
    }

    pub fn mean_at(&self, model: &KernelModel, x: &StateId) -> f64 {
        self.at(model, x).mean()
    }

    /// The common mean when every distribution has the same mean.
    pub fn constant_mean(&self) -> Option<f64> {
        let m = self.default.mean();
        self.all().all(|o| (o.mean() - m).abs() <= 1e-12).then_some(m)
    }

    pub fn max_mean(&self) -> f64 {
        self.all().map(|o| o.mean()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Every particle has exactly one child everywhere.
    pub fn is_degenerate(&self) -> bool {
        self.all().all(|o| o.is_trivial())
    }

    /// Same law with every distribution replaced by the two-point law of
    /// mean `m`.
    pub fn rescaled(&self, m: f64) -> Result<Self> {
        if self.has_overrides() {
            return Err(Error::InvalidLaw(
                "mean rescaling needs a law without per-state overrides".into(),
            ));
        }
        Ok(Self { default: Offspring::with_mean(m)?, ..self.clone() })
    }

    pub fn sample<R: Rng + ?Sized>(&self, model: &KernelModel, x: &StateId, rng: &mut R) -> u32 {
        self.at(model, x).sample(rng)
    }
}

/// Single draw from the law at `x`.
pub fn offspring_sample<R: Rng + ?Sized>(
    law: &OffspringLaw,
    model: &KernelModel,
    x: &StateId,
    rng: &mut R,
) -> u32 {
    law.sample(model, x, rng)
}
