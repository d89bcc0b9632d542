use std::collections::{HashMap, VecDeque};

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

use super::{ConeTypeTree, KernelModel, StateId};

/// Default cap on the number of states in a truncation.
pub const DEFAULT_NODE_CAP: usize = 2_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegionKind {
    /// Restriction of the kernel to a ball.
    Ball,
    /// Quotient of a tree ball by its symmetries; states are cone-type words.
    Lumped,
    /// Hand-assembled substochastic matrix.
    Custom,
}

/// Substochastic restriction `P_Y` of a kernel to a finite set `Y`, stored
/// as CSR with a dense state index.
#[derive(Clone, Debug)]
pub struct FiniteRegion {
    states: Vec<StateId>,
    index: HashMap<StateId, usize>,
    center: usize,
    radius: u32,
    kind: RegionKind,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl FiniteRegion {
    /// Builds a region from explicit sparse rows.
    pub fn from_rows(
        states: Vec<StateId>,
        center: usize,
        radius: u32,
        kind: RegionKind,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Result<Self> {
        if states.is_empty() || states.len() != rows.len() || center >= states.len() {
            return Err(Error::InvalidModel("region rows do not match its states".into()));
        }
        let index = states.iter().cloned().enumerate().map(|(i, s)| (s, i)).collect();
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (j, p) in row {
                if j >= states.len() || p < 0.0 {
                    return Err(Error::InvalidModel("region entry out of range".into()));
                }
                cols.push(j);
                vals.push(p);
            }
            row_ptr.push(cols.len());
        }
        Ok(Self { states, index, center, radius, kind, row_ptr, cols, vals })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    pub fn index_of(&self, x: &StateId) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn center_state(&self) -> &StateId {
        &self.states[self.center]
    }

    pub fn radius(&self) -> u32 {
        self.radius
    }

    pub fn kind(&self) -> RegionKind {
        self.kind
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Nonzero entries of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.cols[a..b].iter().copied().zip(self.vals[a..b].iter().copied())
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.row(i).filter(|&(c, _)| c == j).map(|(_, p)| p).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, p)| p).sum()
    }

    /// `out = Q v`.
    pub fn matvec(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            *o = self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&j, p)| p * v[j]).sum();
        }
    }

    /// `out = v Q`.
    pub fn vecmat(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (j, p) in self.row(i) {
                    out[j] += vi * p;
                }
            }
        }
    }

    pub fn dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            for (j, p) in self.row(i) {
                row[j] += p;
            }
        }
        m
    }

    /// Strongly connected components, each sorted by index.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut graph = DiGraph::<(), ()>::with_capacity(self.len(), self.nnz());
        let nodes: Vec<_> = (0..self.len()).map(|_| graph.add_node(())).collect();
        for i in 0..self.len() {
            for (j, p) in self.row(i) {
                if p > 0.0 {
                    graph.add_edge(nodes[i], nodes[j], ());
                }
            }
        }
        let mut comps: Vec<Vec<usize>> = kosaraju_scc(&graph)
            .into_iter()
            .map(|c| {
                let mut v: Vec<usize> = c.into_iter().map(|n| n.index()).collect();
                v.sort_unstable();
                v
            })
            .collect();
        comps.sort();
        comps
    }

    pub fn is_irreducible(&self) -> bool {
        self.components().len() == 1
    }

    /// Strongly connected component containing the center.
    pub fn center_component(&self) -> Vec<usize> {
        self.components()
            .into_iter()
            .find(|c| c.binary_search(&self.center).is_ok())
            .expect("center belongs to a component")
    }

    /// Sub-block on `keep` (sorted indices). The center moves to the first
    /// kept index if it is dropped.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        let mut pos = vec![usize::MAX; self.len()];
        for (k, &i) in keep.iter().enumerate() {
            pos[i] = k;
        }
        let states = keep.iter().map(|&i| self.states[i].clone()).collect();
        let rows = keep
            .iter()
            .map(|&i| {
                self.row(i)
                    .filter(|&(j, _)| pos[j] != usize::MAX)
                    .map(|(j, p)| (pos[j], p))
                    .collect()
            })
            .collect();
        let center = if pos[self.center] != usize::MAX { pos[self.center] } else { 0 };
        Self::from_rows(states, center, self.radius, self.kind, rows)
    }
}

/// Restriction of `model` to the ball of out-distance `radius` around
/// `center`, in breadth-first order with the center at index 0.
pub fn build_ball(
    model: &KernelModel,
    center: &StateId,
    radius: u32,
    node_cap: usize,
) -> Result<FiniteRegion> {
    if radius < 1 {
        return Err(Error::Parameter("ball radius must be at least 1".into()));
    }
    model.validate_state(center)?;
    let mut states = vec![center.clone()];
    let mut index: HashMap<StateId, usize> = HashMap::from([(center.clone(), 0)]);
    let mut dist = vec![0u32];
    let mut queue = VecDeque::from([0usize]);
    let mut raw_rows: Vec<Vec<(StateId, f64)>> = Vec::new();
    let mut buf = Vec::new();
    while let Some(i) = queue.pop_front() {
        model.neighbors_into(&states[i], &mut buf)?;
        if dist[i] < radius {
            for (y, _) in &buf {
                if !index.contains_key(y) {
                    if states.len() >= node_cap {
                        return Err(Error::ResourceLimit { cap: node_cap });
                    }
                    index.insert(y.clone(), states.len());
                    states.push(y.clone());
                    dist.push(dist[i] + 1);
                    queue.push_back(states.len() - 1);
                }
            }
        }
        if raw_rows.len() <= i {
            raw_rows.resize(i + 1, Vec::new());
        }
        raw_rows[i] = std::mem::take(&mut buf);
    }
    raw_rows.resize(states.len(), Vec::new());
    let rows = raw_rows
        .into_iter()
        .map(|row| {
            row.into_iter().filter_map(|(y, p)| index.get(&y).map(|&j| (j, p))).collect()
        })
        .collect();
    FiniteRegion::from_rows(states, 0, radius, RegionKind::Ball, rows)
}

/// Symmetry quotient of a ball in a cone-type tree.
///
/// The ball of `radius` below a vertex of type `start` is lumped by the word
/// of cone types along the path from that vertex. With `at_root` the vertex
/// is the tree root (plain root weights, no parent); otherwise its forward
/// weights carry the factor `1 − p(−start)` and its parent is excluded.
/// `allowed` restricts the descendants to a set of types. Perron roots of
/// the quotient and of the explicit ball agree.
pub fn lumped_cone_ball(
    tree: &ConeTypeTree,
    start: u32,
    at_root: bool,
    allowed: Option<&[bool]>,
    radius: u32,
    node_cap: usize,
) -> Result<FiniteRegion> {
    let types = tree.types();
    if start as usize >= types.len() {
        return Err(Error::InvalidModel(format!("cone type {start} does not exist")));
    }
    let ok = |t: u32| allowed.map_or(true, |a| a[t as usize]);
    let mut words: Vec<Vec<u32>> = vec![vec![start]];
    let mut parent: Vec<Option<usize>> = vec![None];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new()];
    let mut frontier = vec![0usize];
    for depth in 0..radius {
        let mut next = Vec::new();
        for &w in &frontier {
            let t = *words[w].last().expect("nonempty word");
            let ty = &types[t as usize];
            let forward = if depth == 0 && at_root { 1.0 } else { 1.0 - ty.back };
            let mut grouped: Vec<(u32, f64)> = Vec::new();
            for &(j, q) in &ty.children {
                if !ok(j) {
                    continue;
                }
                match grouped.iter_mut().find(|g| g.0 == j) {
                    Some(g) => g.1 += q,
                    None => grouped.push((j, q)),
                }
            }
            grouped.sort_by_key(|g| g.0);
            for (j, q) in grouped {
                if words.len() >= node_cap {
                    return Err(Error::ResourceLimit { cap: node_cap });
                }
                let mut word = words[w].clone();
                word.push(j);
                let c = words.len();
                words.push(word);
                parent.push(Some(w));
                rows.push(vec![(w, types[j as usize].back)]);
                rows[w].push((c, forward * q));
                next.push(c);
            }
        }
        frontier = next;
    }
    let states = words.into_iter().map(StateId::Path).collect();
    FiniteRegion::from_rows(states, 0, radius, RegionKind::Lumped, rows)
}
