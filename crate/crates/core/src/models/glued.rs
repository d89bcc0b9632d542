use std::collections::BTreeMap;

use crate::error::{Error, Result};

use super::{ConeTypeTree, FiniteChain, KernelModel, StateId, MASS_TOL};

/// Chains glued at their roots.
///
/// The shared root moves into component `i` with probability
/// `α_i p_i(r, y)`; away from the root each component keeps its own kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct Glued {
    components: Vec<KernelModel>,
    weights: Vec<f64>,
}

impl Glued {
    pub fn new(components: Vec<KernelModel>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidModel("glued chain needs one weight per component".into()));
        }
        if weights.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::InvalidModel("glue weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidModel(format!("glue weights sum to {total}")));
        }
        Ok(Self { components, weights })
    }

    /// `M − 1` tree branches and a path of length two glued at the root,
    /// with simple random walk weights.
    pub fn line_tree(degree: u32) -> Result<Self> {
        if degree < 3 {
            return Err(Error::InvalidModel(format!("line tree degree {degree} < 3")));
        }
        let m = degree as f64;
        let tree = ConeTypeTree::single(degree - 1, 1.0 / m)?;
        let path = FiniteChain::path(3)?;
        Self::new(
            vec![KernelModel::ConeTypeTree(tree), KernelModel::FiniteChain(path)],
            vec![(m - 1.0) / m, 1.0 / m],
        )
    }

    pub fn components(&self) -> &[KernelModel] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Recognises the structure built by [`Glued::line_tree`].
    pub fn line_tree_degree(&self) -> Option<u32> {
        if self.components.len() != 2 {
            return None;
        }
        let (tree, path) = match (&self.components[0], &self.components[1]) {
            (KernelModel::ConeTypeTree(t), KernelModel::FiniteChain(p)) => (t, p),
            _ => return None,
        };
        if tree.types().len() != 1 {
            return None;
        }
        let ty = &tree.types()[0];
        let k = ty.children.len() as u32;
        let degree = k + 1;
        let m = degree as f64;
        let close = |a: f64, b: f64| (a - b).abs() <= MASS_TOL;
        let uniform = ty.children.iter().all(|&(_, q)| close(q, 1.0 / k as f64));
        if degree >= 3
            && uniform
            && close(ty.back, 1.0 / m)
            && *path == FiniteChain::path(3).ok()?
            && close(self.weights[0], (m - 1.0) / m)
            && close(self.weights[1], 1.0 / m)
        {
            Some(degree)
        } else {
            None
        }
    }

    /// Maps a component-local state into the glued encoding.
    pub fn embed(&self, component: usize, local: StateId) -> StateId {
        if local == self.components[component].origin() {
            StateId::Root
        } else {
            StateId::Glued { component: component as u32, local: Box::new(local) }
        }
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        let mut buf = Vec::new();
        match x {
            StateId::Root => {
                let mut acc: BTreeMap<StateId, f64> = BTreeMap::new();
                for (i, (c, a)) in self.components.iter().zip(&self.weights).enumerate() {
                    c.neighbors_into(&c.origin(), &mut buf)?;
                    for (y, p) in buf.drain(..) {
                        *acc.entry(self.embed(i, y)).or_insert(0.0) += a * p;
                    }
                }
                out.extend(acc);
            }
            StateId::Glued { component, local } => {
                let c = self
                    .components
                    .get(*component as usize)
                    .ok_or_else(|| malformed(x))?;
                if **local == c.origin() {
                    return Err(malformed(x));
                }
                c.neighbors_into(local, &mut buf).map_err(|_| malformed(x))?;
                for (y, p) in buf.drain(..) {
                    out.push((self.embed(*component as usize, y), p));
                }
            }
            _ => return Err(malformed(x)),
        }
        Ok(())
    }
}

fn malformed(x: &StateId) -> Error {
    Error::MalformedState { family: "Glued", state: x.to_string() }
}
