use crate::error::{Error, Result};

use super::{StateId, MASS_TOL};

/// Simple random walk on the `M`-regular tree.
///
/// Vertices are child-index paths from the root; the root has `M` children,
/// every other vertex `M − 1` children and a parent.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularTree {
    degree: u32,
}

impl RegularTree {
    pub fn new(degree: u32) -> Result<Self> {
        if degree < 2 {
            return Err(Error::InvalidModel(format!("RegularTree degree {degree} < 2")));
        }
        Ok(Self { degree })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// `2 sqrt(M − 1) / M`.
    pub fn rho(&self) -> f64 {
        let m = self.degree as f64;
        2.0 * (m - 1.0).sqrt() / m
    }

    /// The same walk described by cone types: type 0 is the root, type 1
    /// every other vertex.
    pub fn as_cone_tree(&self) -> ConeTypeTree {
        let m = self.degree;
        let back = 1.0 / m as f64;
        let root = ConeType { children: vec![(1, 1.0 / m as f64); m as usize], back };
        let inner = if m > 1 {
            ConeType { children: vec![(1, 1.0 / (m - 1) as f64); (m - 1) as usize], back }
        } else {
            root.clone()
        };
        ConeTypeTree { types: vec![root, inner], root_type: 0 }
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        let path = match x {
            StateId::Path(p) => p,
            _ => return Err(malformed("RegularTree", x)),
        };
        let m = self.degree;
        for (depth, &c) in path.iter().enumerate() {
            let bound = if depth == 0 { m } else { m - 1 };
            if c >= bound {
                return Err(malformed("RegularTree", x));
            }
        }
        let w = 1.0 / m as f64;
        let children = if path.is_empty() { m } else { m - 1 };
        if let Some((_, parent)) = path.split_last() {
            out.push((StateId::Path(parent.to_vec()), w));
        }
        for c in 0..children {
            let mut child = path.clone();
            child.push(c);
            out.push((StateId::Path(child), w));
        }
        Ok(())
    }
}

/// One cone type: ordered list of `(child type, q)` and the backward
/// probability `p(−i)`.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ConeType {
    pub children: Vec<(u32, f64)>,
    pub back: f64,
}

/// Nearest-neighbour walk on a tree with finitely many cone types.
///
/// A non-root vertex of type `i` moves to its parent with probability
/// `p(−i)` and to its `j`-th child with `(1 − p(−i)) q_j`. The root moves to
/// its children with the plain weights `q` of the root type.
#[derive(Clone, Debug, PartialEq)]
pub struct ConeTypeTree {
    types: Vec<ConeType>,
    root_type: u32,
}

impl ConeTypeTree {
    pub fn new(types: Vec<ConeType>, root_type: u32) -> Result<Self> {
        let n = types.len() as u32;
        if root_type >= n {
            return Err(Error::InvalidModel(format!(
                "root type {root_type} is not a node of the cone digraph"
            )));
        }
        for (i, t) in types.iter().enumerate() {
            if t.children.is_empty() {
                return Err(Error::InvalidModel(format!("cone type {i} has no children")));
            }
            if !(t.back > 0.0 && t.back < 1.0) {
                return Err(Error::InvalidModel(format!(
                    "cone type {i}: backward probability {} not in (0,1)",
                    t.back
                )));
            }
            if t.children.iter().any(|&(j, q)| j >= n || !(q > 0.0)) {
                return Err(Error::InvalidModel(format!("cone type {i}: bad child entry")));
            }
            let total: f64 = t.children.iter().map(|c| c.1).sum();
            if (total - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidModel(format!("cone type {i}: q sums to {total}")));
            }
        }
        Ok(Self { types, root_type })
    }

    /// Single cone type with `children` equally weighted children.
    pub fn single(children: u32, back: f64) -> Result<Self> {
        let q = 1.0 / children.max(1) as f64;
        Self::new(vec![ConeType { children: vec![(0, q); children as usize], back }], 0)
    }

    pub fn types(&self) -> &[ConeType] {
        &self.types
    }

    pub fn root_type(&self) -> u32 {
        self.root_type
    }

    /// Cone type of the vertex at `path`.
    pub fn type_of(&self, path: &[u32]) -> Result<u32> {
        let mut t = self.root_type;
        for &c in path {
            match self.types[t as usize].children.get(c as usize) {
                Some(&(j, _)) => t = j,
                None => {
                    return Err(Error::MalformedState {
                        family: "ConeTypeTree",
                        state: StateId::Path(path.to_vec()).to_string(),
                    })
                }
            }
        }
        Ok(t)
    }

    /// Adjacency of the cone digraph G (multi-edges collapsed).
    pub fn digraph_edges(&self) -> Vec<(u32, u32)> {
        let mut edges: Vec<(u32, u32)> = self
            .types
            .iter()
            .enumerate()
            .flat_map(|(i, t)| t.children.iter().map(move |&(j, _)| (i as u32, j)))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges
    }

    /// Types reachable from the root type by walks of length ≥ 1.
    pub fn reachable_types(&self) -> Vec<bool> {
        let n = self.types.len();
        let mut seen = vec![false; n];
        let mut stack: Vec<u32> =
            self.types[self.root_type as usize].children.iter().map(|c| c.0).collect();
        while let Some(t) = stack.pop() {
            if !seen[t as usize] {
                seen[t as usize] = true;
                stack.extend(self.types[t as usize].children.iter().map(|c| c.0));
            }
        }
        seen
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        let path = match x {
            StateId::Path(p) => p,
            _ => return Err(malformed("ConeTypeTree", x)),
        };
        let t = self.type_of(path)?;
        let ty = &self.types[t as usize];
        let forward = if path.is_empty() { 1.0 } else { 1.0 - ty.back };
        if let Some((_, parent)) = path.split_last() {
            out.push((StateId::Path(parent.to_vec()), ty.back));
        }
        for (c, &(_, q)) in ty.children.iter().enumerate() {
            let mut child = path.clone();
            child.push(c as u32);
            out.push((StateId::Path(child), forward * q));
        }
        Ok(())
    }
}

fn malformed(family: &'static str, x: &StateId) -> Error {
    Error::MalformedState { family, state: x.to_string() }
}
