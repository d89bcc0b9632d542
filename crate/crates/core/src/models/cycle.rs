use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;

use crate::error::{Error, Result};

use super::{check_probability_row, StateId};

/// Cycles of length `2^i` sharing one origin.
///
/// The origin enters cycle `i` with probability `2^{-i}`; along a cycle the
/// walk advances deterministically. Cycles beyond `max_cycle` are folded into
/// the last one so the kernel stays stochastic.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleGraph {
    max_cycle: u32,
}

impl Default for CycleGraph {
    fn default() -> Self {
        Self { max_cycle: 40 }
    }
}

impl CycleGraph {
    pub fn new(max_cycle: u32) -> Result<Self> {
        if !(1..=62).contains(&max_cycle) {
            return Err(Error::InvalidModel(format!("max_cycle {max_cycle} not in 1..=62")));
        }
        Ok(Self { max_cycle })
    }

    pub fn max_cycle(&self) -> u32 {
        self.max_cycle
    }

    /// Probability of entering cycle `i` from the origin.
    pub fn entry_weight(&self, i: u32) -> f64 {
        if i == 0 || i > self.max_cycle {
            0.0
        } else if i == self.max_cycle {
            0.5f64.powi(i as i32 - 1)
        } else {
            0.5f64.powi(i as i32)
        }
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        match *x {
            StateId::Root => {
                for i in 1..=self.max_cycle {
                    out.push((StateId::Cycle { cycle: i, pos: 1 }, self.entry_weight(i)));
                }
            }
            StateId::Cycle { cycle, pos } => {
                if cycle == 0 || cycle > self.max_cycle || pos == 0 || pos >= 1u64 << cycle {
                    return Err(Error::MalformedState {
                        family: "CycleGraph",
                        state: x.to_string(),
                    });
                }
                let next = if pos + 1 == 1u64 << cycle {
                    StateId::Root
                } else {
                    StateId::Cycle { cycle, pos: pos + 1 }
                };
                out.push((next, 1.0));
            }
            _ => {
                return Err(Error::MalformedState { family: "CycleGraph", state: x.to_string() })
            }
        }
        Ok(())
    }
}

/// Irreducible chain on `{0, …, n−1}` given by sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteChain {
    rows: Vec<Vec<(u32, f64)>>,
    root: u32,
}

impl FiniteChain {
    pub fn new(rows: Vec<Vec<(u32, f64)>>, root: u32) -> Result<Self> {
        let n = rows.len();
        if n == 0 || root as usize >= n {
            return Err(Error::InvalidModel("finite chain needs a root among its states".into()));
        }
        let mut graph = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
        for (i, row) in rows.iter().enumerate() {
            if row.iter().any(|&(j, _)| j as usize >= n) {
                return Err(Error::InvalidModel(format!("finite chain row {i}: target out of range")));
            }
            let as_states: Vec<(StateId, f64)> =
                row.iter().map(|&(j, p)| (StateId::Node(j), p)).collect();
            check_probability_row(&as_states, &format!("finite chain row {i}"))?;
            for &(j, _) in row {
                graph.add_edge(nodes[i], nodes[j as usize], ());
            }
        }
        if kosaraju_scc(&graph).len() != 1 {
            return Err(Error::InvalidModel("finite chain is not irreducible".into()));
        }
        Ok(Self { rows, root })
    }

    /// Simple random walk on the path `0 – 1 – … – (n−1)` rooted at 0.
    pub fn path(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidModel("path needs at least two vertices".into()));
        }
        let rows = (0..n)
            .map(|i| {
                if i == 0 {
                    vec![(1, 1.0)]
                } else if i == n - 1 {
                    vec![(i - 1, 1.0)]
                } else {
                    vec![(i - 1, 0.5), (i + 1, 0.5)]
                }
            })
            .collect();
        Self::new(rows, 0)
    }

    /// Deterministic rotation `i → i+1 mod n`.
    pub fn cycle(n: u32) -> Result<Self> {
        Self::new((0..n).map(|i| vec![((i + 1) % n, 1.0)]).collect(), 0)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn root(&self) -> u32 {
        self.root
    }

    pub fn rows(&self) -> &[Vec<(u32, f64)>] {
        &self.rows
    }

    pub(super) fn neighbors(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        match x {
            StateId::Node(i) if (*i as usize) < self.rows.len() => {
                out.extend(self.rows[*i as usize].iter().map(|&(j, p)| (StateId::Node(j), p)));
                Ok(())
            }
            _ => Err(Error::MalformedState { family: "FiniteChain", state: x.to_string() }),
        }
    }
}
