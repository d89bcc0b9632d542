//! State spaces, transition kernels and offspring laws.
//!
//! Every family exposes the same neighbor enumeration: the full support of
//! `p(x, ·)`, sorted by canonical state encoding.

mod cycle;
mod glued;
mod lattice;
mod law;
mod region;
mod tree;

pub mod config;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cycle::{CycleGraph, FiniteChain};
pub use glued::Glued;
pub use lattice::{DriftZd, Environment, SeedChain};
pub use law::{multinomial, offspring_sample, Offspring, OffspringLaw, DEFAULT_SUPPORT_CAP};
pub use region::{build_ball, lumped_cone_ball, FiniteRegion, RegionKind, DEFAULT_NODE_CAP};
pub use tree::{ConeType, ConeTypeTree, RegularTree};

/// Tolerance for row sums and probability masses.
pub const MASS_TOL: f64 = 1e-12;

/// Canonical state encoding.
///
/// `Root` is the reserved origin of glued chains and the cycle graph. Trees
/// use the empty path as root and lattice families the zero vector.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateId {
    Root,
    Site(Vec<i64>),
    Path(Vec<u32>),
    Glued { component: u32, local: Box<StateId> },
    Cycle { cycle: u32, pos: u64 },
    Node(u32),
}

impl StateId {
    pub fn site(x: i64) -> Self {
        StateId::Site(vec![x])
    }

    /// First coordinate of a lattice site.
    pub fn coordinate(&self) -> Option<i64> {
        match self {
            StateId::Site(v) if !v.is_empty() => Some(v[0]),
            _ => None,
        }
    }
}

impl fmt::Display for StateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateId::Root => write!(f, "o"),
            StateId::Site(v) if v.len() == 1 => write!(f, "{}", v[0]),
            StateId::Site(v) => {
                let parts: Vec<String> = v.iter().map(|c| c.to_string()).collect();
                write!(f, "({})", parts.join(" "))
            }
            StateId::Path(p) if p.is_empty() => write!(f, "root"),
            StateId::Path(p) => {
                let parts: Vec<String> = p.iter().map(|c| c.to_string()).collect();
                write!(f, "r.{}", parts.join("."))
            }
            StateId::Glued { component, local } => write!(f, "g{component}:{local}"),
            StateId::Cycle { cycle, pos } => write!(f, "c{cycle}:{pos}"),
            StateId::Node(i) => write!(f, "n{i}"),
        }
    }
}

/// Family tag of a kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    DriftZd,
    RegularTree,
    ConeTypeTree,
    Glued,
    SeedChain,
    CycleGraph,
    TwoPointEnvironmentZ,
    FiniteChain,
}

impl Family {
    pub fn as_str(&self) -> &'static str {
        match self {
            Family::DriftZd => "DriftZd",
            Family::RegularTree => "RegularTree",
            Family::ConeTypeTree => "ConeTypeTree",
            Family::Glued => "Glued",
            Family::SeedChain => "SeedChain",
            Family::CycleGraph => "CycleGraph",
            Family::TwoPointEnvironmentZ => "TwoPointEnvironmentZ",
            Family::FiniteChain => "FiniteChain",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A countable-state transition kernel.
#[derive(Clone, Debug, PartialEq)]
pub enum KernelModel {
    DriftZd(DriftZd),
    RegularTree(RegularTree),
    ConeTypeTree(ConeTypeTree),
    Glued(Glued),
    SeedChain(SeedChain),
    CycleGraph(CycleGraph),
    TwoPointEnvironmentZ(Environment),
    FiniteChain(FiniteChain),
}

impl KernelModel {
    pub fn family(&self) -> Family {
        match self {
            KernelModel::DriftZd(_) => Family::DriftZd,
            KernelModel::RegularTree(_) => Family::RegularTree,
            KernelModel::ConeTypeTree(_) => Family::ConeTypeTree,
            KernelModel::Glued(_) => Family::Glued,
            KernelModel::SeedChain(_) => Family::SeedChain,
            KernelModel::CycleGraph(_) => Family::CycleGraph,
            KernelModel::TwoPointEnvironmentZ(_) => Family::TwoPointEnvironmentZ,
            KernelModel::FiniteChain(_) => Family::FiniteChain,
        }
    }

    pub fn origin(&self) -> StateId {
        match self {
            KernelModel::DriftZd(m) => StateId::Site(vec![0; m.dim()]),
            KernelModel::RegularTree(_) | KernelModel::ConeTypeTree(_) => StateId::Path(Vec::new()),
            KernelModel::Glued(_) | KernelModel::CycleGraph(_) => StateId::Root,
            KernelModel::SeedChain(_) | KernelModel::TwoPointEnvironmentZ(_) => StateId::site(0),
            KernelModel::FiniteChain(m) => StateId::Node(m.root()),
        }
    }

    /// Full support of `p(x, ·)` sorted by state encoding.
    pub fn neighbors(&self, x: &StateId) -> Result<Vec<(StateId, f64)>> {
        let mut out = Vec::new();
        self.neighbors_into(x, &mut out)?;
        Ok(out)
    }

    /// Like [`neighbors`](Self::neighbors) but reuses `out`.
    pub fn neighbors_into(&self, x: &StateId, out: &mut Vec<(StateId, f64)>) -> Result<()> {
        out.clear();
        match self {
            KernelModel::DriftZd(m) => m.neighbors(x, out)?,
            KernelModel::RegularTree(m) => m.neighbors(x, out)?,
            KernelModel::ConeTypeTree(m) => m.neighbors(x, out)?,
            KernelModel::Glued(m) => m.neighbors(x, out)?,
            KernelModel::SeedChain(m) => m.neighbors(x, out)?,
            KernelModel::CycleGraph(m) => m.neighbors(x, out)?,
            KernelModel::TwoPointEnvironmentZ(m) => m.neighbors(x, out)?,
            KernelModel::FiniteChain(m) => m.neighbors(x, out)?,
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(())
    }

    /// Checks that `x` is a canonical state of this model.
    pub fn validate_state(&self, x: &StateId) -> Result<()> {
        let mut scratch = Vec::new();
        self.neighbors_into(x, &mut scratch)
    }

    pub fn malformed(&self, x: &StateId) -> Error {
        Error::MalformedState { family: self.family().as_str(), state: x.to_string() }
    }

    /// Period of the chain when it is known structurally.
    pub fn period(&self) -> Option<u32> {
        match self {
            KernelModel::DriftZd(_)
            | KernelModel::RegularTree(_)
            | KernelModel::ConeTypeTree(_)
            | KernelModel::CycleGraph(_)
            | KernelModel::TwoPointEnvironmentZ(_) => Some(2),
            KernelModel::SeedChain(m) => Some(if m.seed_row()[1] > 0.0 { 1 } else { 2 }),
            KernelModel::Glued(_) | KernelModel::FiniteChain(_) => None,
        }
    }

    /// Lattice dimension for the integer-lattice families.
    pub fn lattice_dim(&self) -> Option<usize> {
        match self {
            KernelModel::DriftZd(m) => Some(m.dim()),
            KernelModel::SeedChain(_) | KernelModel::TwoPointEnvironmentZ(_) => Some(1),
            _ => None,
        }
    }

    /// Cone type of a tree vertex.
    pub fn cone_type(&self, x: &StateId) -> Option<u32> {
        match (self, x) {
            (KernelModel::ConeTypeTree(t), StateId::Path(p)) => t.type_of(p).ok(),
            _ => None,
        }
    }

    /// Whether `p(x,y) > 0` implies `p(y,x) > 0`.
    pub fn has_symmetric_support(&self) -> bool {
        !matches!(self, KernelModel::CycleGraph(_) | KernelModel::FiniteChain(_))
    }

    /// Largest graph-distance jump of a single step.
    pub fn max_jump(&self) -> u32 {
        1
    }

    /// Short human-readable identifier.
    pub fn label(&self) -> String {
        match self {
            KernelModel::DriftZd(m) => {
                let ps: Vec<String> = m.p_plus().iter().map(|p| format!("{p}")).collect();
                format!("DriftZd(d={},p+={})", m.dim(), ps.join("/"))
            }
            KernelModel::RegularTree(m) => format!("RegularTree(M={})", m.degree()),
            KernelModel::ConeTypeTree(m) => format!("ConeTypeTree(types={})", m.types().len()),
            KernelModel::Glued(m) => match m.line_tree_degree() {
                Some(deg) => format!("LineTree(M={deg})"),
                None => format!("Glued(k={})", m.components().len()),
            },
            KernelModel::SeedChain(m) => format!("SeedChain(p={})", m.p_right()),
            KernelModel::CycleGraph(m) => format!("CycleGraph(max={})", m.max_cycle()),
            KernelModel::TwoPointEnvironmentZ(m) => {
                format!("Environment(laws={},seed={})", m.laws().len(), m.env_seed())
            }
            KernelModel::FiniteChain(m) => format!("FiniteChain(n={})", m.len()),
        }
    }

    pub fn drift_zd(p_plus: Vec<f64>, p_minus: Vec<f64>) -> Result<Self> {
        Ok(KernelModel::DriftZd(DriftZd::new(p_plus, p_minus)?))
    }

    /// Nearest-neighbour walk on Z with `p(x, x+1) = p`.
    pub fn walk_z(p: f64) -> Result<Self> {
        Self::drift_zd(vec![p], vec![1.0 - p])
    }

    pub fn regular_tree(degree: u32) -> Result<Self> {
        Ok(KernelModel::RegularTree(RegularTree::new(degree)?))
    }

    /// The seeded drift chain on Z with a lazy site at 1.
    pub fn seed_chain() -> Self {
        KernelModel::SeedChain(SeedChain::weak_seed())
    }

    pub fn cycle_graph() -> Self {
        KernelModel::CycleGraph(CycleGraph::default())
    }

    /// Simple random walk on a tree whose root carries `degree − 1` tree
    /// branches and a path of length two.
    pub fn line_tree(degree: u32) -> Result<Self> {
        Ok(KernelModel::Glued(Glued::line_tree(degree)?))
    }
}

pub(crate) fn check_probability_row(row: &[(StateId, f64)], what: &str) -> Result<()> {
    let sum: f64 = row.iter().map(|(_, p)| p).sum();
    if row.iter().any(|(_, p)| !(*p > 0.0)) {
        return Err(Error::InvalidModel(format!("{what}: non-positive transition probability")));
    }
    if (sum - 1.0).abs() > MASS_TOL {
        return Err(Error::InvalidModel(format!("{what}: row sums to {sum}")));
    }
    Ok(())
}
