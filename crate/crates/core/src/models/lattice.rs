use crate::error::{Error, Result};

use super::{StateId, MASS_TOL};

/// Nearest-neighbour walk on Z^d with `p(x, x ± e_i) = p_i^±`.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftZd {
    p_plus: Vec<f64>,
    p_minus: Vec<f64>,
}

impl DriftZd {
    pub fn new(p_plus: Vec<f64>, p_minus: Vec<f64>) -> Result<Self> {
        if p_plus.is_empty() || p_plus.len() != p_minus.len() {
            return Err(Error::InvalidModel(
                "DriftZd needs one p+ and one p- per dimension".into(),
            ));
        }
        if p_plus.iter().chain(&p_minus).any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::InvalidModel(
                "DriftZd step probabilities must lie in (0,1) for irreducibility".into(),
            ));
        }
        let total: f64 = p_plus.iter().chain(&p_minus).sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidModel(format!("DriftZd step probabilities sum to {total}")));
        }
        Ok(Self { p_plus, p_minus })
    }

    pub fn dim(&self) -> usize {
        self.p_plus.len()
    }

    pub fn p_plus(&self) -> &[f64] {
        &self.p_plus
    }

    pub fn p_minus(&self) -> &[f64] {
        &self.p_minus
    }

    /// `2 Σ sqrt(p_i^+ p_i^-)`.
    pub fn rho(&self) -> f64 {
        2.0 * self
            .p_plus
            .iter()
            .zip(&self.p_minus)
            .map(|(a, b)| (a * b).sqrt())
            .sum::<f64>()
    }

    pub fn drift(&self) -> Vec<f64> {
        self.p_plus.iter().zip(&self.p_minus).map(|(a, b)| a - b).collect()
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        let v = match x {
            StateId::Site(v) if v.len() == self.dim() => v,
            _ => return Err(malformed("DriftZd", x)),
        };
        for i in 0..self.dim() {
            let mut up = v.clone();
            up[i] += 1;
            out.push((StateId::Site(up), self.p_plus[i]));
            let mut down = v.clone();
            down[i] -= 1;
            out.push((StateId::Site(down), self.p_minus[i]));
        }
        Ok(())
    }
}

/// Drift chain on Z with one lazy site.
///
/// Away from `seed_site` the walk steps right with probability `p_right`;
/// at the seed it uses `seed_row = [left, stay, right]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedChain {
    p_right: f64,
    seed_site: i64,
    seed_row: [f64; 3],
}

impl SeedChain {
    pub fn new(p_right: f64, seed_site: i64, seed_row: [f64; 3]) -> Result<Self> {
        if !(p_right > 0.0 && p_right < 1.0) {
            return Err(Error::InvalidModel(format!("SeedChain p_right = {p_right} not in (0,1)")));
        }
        let [l, s, r] = seed_row;
        if !(l > 0.0 && r > 0.0 && s >= 0.0) {
            return Err(Error::InvalidModel(
                "SeedChain seed row needs positive left and right moves".into(),
            ));
        }
        if (l + s + r - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidModel(format!("SeedChain seed row sums to {}", l + s + r)));
        }
        Ok(Self { p_right, seed_site, seed_row })
    }

    /// `p = (2+√3)/4` away from site 1, and `(1/8, 3/4, 1/8)` at site 1.
    pub fn weak_seed() -> Self {
        Self::new((2.0 + 3f64.sqrt()) / 4.0, 1, [0.125, 0.75, 0.125]).expect("valid preset")
    }

    pub fn p_right(&self) -> f64 {
        self.p_right
    }

    pub fn seed_site(&self) -> i64 {
        self.seed_site
    }

    pub fn seed_row(&self) -> [f64; 3] {
        self.seed_row
    }

    /// Spectral radius of the homogeneous walk away from the seed.
    pub fn rho_homogeneous(&self) -> f64 {
        2.0 * (self.p_right * (1.0 - self.p_right)).sqrt()
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        let z = match x {
            StateId::Site(v) if v.len() == 1 => v[0],
            _ => return Err(malformed("SeedChain", x)),
        };
        if z == self.seed_site {
            let [l, s, r] = self.seed_row;
            out.push((StateId::site(z - 1), l));
            if s > 0.0 {
                out.push((StateId::site(z), s));
            }
            out.push((StateId::site(z + 1), r));
        } else {
            out.push((StateId::site(z - 1), 1.0 - self.p_right));
            out.push((StateId::site(z + 1), self.p_right));
        }
        Ok(())
    }
}

/// Nearest-neighbour walk on Z in a frozen iid environment.
///
/// Site `x` uses law `laws[k]` (the probability of stepping right), where `k`
/// is drawn with probabilities `weights` by a pure hash of `(env_seed, x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Environment {
    laws: Vec<f64>,
    weights: Vec<f64>,
    env_seed: u64,
}

impl Environment {
    pub fn new(laws: Vec<f64>, weights: Vec<f64>, env_seed: u64) -> Result<Self> {
        if laws.is_empty() || laws.len() != weights.len() {
            return Err(Error::InvalidModel(
                "environment needs one weight per step law".into(),
            ));
        }
        if laws.iter().any(|p| !(*p > 0.0 && *p < 1.0)) {
            return Err(Error::InvalidModel("environment step laws must lie in (0,1)".into()));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidModel("environment weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidModel(format!("environment weights sum to {total}")));
        }
        Ok(Self { laws, weights, env_seed })
    }

    pub fn laws(&self) -> &[f64] {
        &self.laws
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn env_seed(&self) -> u64 {
        self.env_seed
    }

    /// Index of the step law used at site `x`.
    pub fn law_index(&self, x: i64) -> usize {
        let h = splitmix64(self.env_seed ^ splitmix64(x as u64));
        let u = (h >> 11) as f64 / (1u64 << 53) as f64;
        let mut acc = 0.0;
        for (k, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return k;
            }
        }
        self.weights.len() - 1
    }

    pub fn p_right_at(&self, x: i64) -> f64 {
        self.laws[self.law_index(x)]
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        let z = match x {
            StateId::Site(v) if v.len() == 1 => v[0],
            _ => return Err(malformed("TwoPointEnvironmentZ", x)),
        };
        let p = self.p_right_at(z);
        out.push((StateId::site(z - 1), 1.0 - p));
        out.push((StateId::site(z + 1), p));
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn malformed(family: &'static str, x: &StateId) -> Error {
    Error::MalformedState { family, state: x.to_string() }
}
