use std::collections::{BTreeSet, VecDeque};

use petgraph::algo::kosaraju_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{
    ConeTypeTree, Environment, FiniteRegion, KernelModel, RegionKind, StateId,
};

use super::{
    irreducible_ball, lumped_estimate, rho_estimate, rho_finite_with, SpectralEstimate,
    SpectralOptions, Variant,
};

/// Cap on the number of local-type representatives per radius.
const MAX_REPRESENTATIVES: usize = 20_000;

/// Result of [`rho_variant`].
#[derive(Clone, Debug, Serialize)]
pub struct VariantReport {
    pub estimate: SpectralEstimate,
    /// Labelled contributions: glue components, cone classes or local types.
    pub parts: Vec<(String, SpectralEstimate)>,
    /// Index into `parts` of the minimiser.
    pub argmin: Option<usize>,
    /// Whether the infimum is a minimum over a finite list.
    pub attained: Option<bool>,
    /// Per-radius values (local-type minimum).
    pub sequence: Vec<SpectralEstimate>,
}

fn tag(mut e: SpectralEstimate, v: Variant) -> SpectralEstimate {
    e.variant = v;
    e
}

fn minimum(parts: Vec<(String, SpectralEstimate)>, variant: Variant) -> Result<VariantReport> {
    let (argmin, best) = parts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.value.total_cmp(&b.1 .1.value))
        .map(|(i, p)| (i, p.1.clone()))
        .ok_or_else(|| Error::InvalidModel("no part to minimise over".into()))?;
    Ok(VariantReport {
        estimate: tag(best, variant),
        parts,
        argmin: Some(argmin),
        attained: Some(true),
        sequence: Vec::new(),
    })
}

fn unsupported(variant: Variant, model: &KernelModel) -> Error {
    Error::UnsupportedVariant { variant: variant.as_str().into(), family: model.family().as_str() }
}

/// ρ, ϱ, ρ̃ or ρ̌ of `model`.
///
/// * ϱ: minimum of the component radii of a glued chain.
/// * ρ̃: minimum over the non-trivial strongly connected classes of the cone
///   digraph of the radius of the class cover; equal to ϱ for glued chains.
/// * ρ̌: minimum over local ball types at a fixed radius, swept up to
///   `opts.radius` or the node cap.
pub fn rho_variant(
    model: &KernelModel,
    variant: Variant,
    opts: &SpectralOptions,
) -> Result<VariantReport> {
    match variant {
        Variant::Rho => {
            let e = rho_estimate(model, opts)?;
            Ok(VariantReport {
                parts: vec![(model.label(), e.clone())],
                estimate: e,
                argmin: Some(0),
                attained: None,
                sequence: Vec::new(),
            })
        }
        Variant::Varrho | Variant::TildeRho if matches!(model, KernelModel::Glued(_)) => {
            let KernelModel::Glued(g) = model else { unreachable!() };
            let parts = g
                .components()
                .iter()
                .map(|c| Ok((c.label(), rho_estimate(c, opts)?)))
                .collect::<Result<Vec<_>>>()?;
            minimum(parts, variant)
        }
        Variant::TildeRho => {
            let tree = match model {
                KernelModel::ConeTypeTree(t) => t.clone(),
                KernelModel::RegularTree(t) => t.as_cone_tree(),
                _ => return Err(unsupported(variant, model)),
            };
            let parts = cone_classes(&tree)
                .into_iter()
                .map(|class| {
                    let mut allowed = vec![false; tree.types().len()];
                    class.iter().for_each(|&t| allowed[t as usize] = true);
                    let est = lumped_estimate(&tree, class[0], false, Some(&allowed), opts)?;
                    Ok((format!("class{class:?}"), est))
                })
                .collect::<Result<Vec<_>>>()?;
            minimum(parts, variant)
        }
        Variant::CheckRho => check_rho(model, opts),
        Variant::Varrho => Err(unsupported(variant, model)),
    }
}

/// Non-trivial strongly connected classes of the cone digraph that occur
/// below the root, each sorted.
pub fn cone_classes(tree: &ConeTypeTree) -> Vec<Vec<u32>> {
    let n = tree.types().len();
    let mut graph = DiGraph::<(), ()>::new();
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    let edges = tree.digraph_edges();
    for &(a, b) in &edges {
        graph.add_edge(nodes[a as usize], nodes[b as usize], ());
    }
    let reachable = tree.reachable_types();
    let mut classes: Vec<Vec<u32>> = kosaraju_scc(&graph)
        .into_iter()
        .map(|c| {
            let mut v: Vec<u32> = c.into_iter().map(|x| x.index() as u32).collect();
            v.sort_unstable();
            v
        })
        .filter(|c| {
            let cyclic = c.len() > 1 || edges.binary_search(&(c[0], c[0])).is_ok();
            cyclic && reachable[c[0] as usize]
        })
        .collect();
    classes.sort();
    classes
}

fn check_rho(model: &KernelModel, opts: &SpectralOptions) -> Result<VariantReport> {
    let mut sequence: Vec<SpectralEstimate> = Vec::new();
    let mut last_parts = Vec::new();
    for n in 1..=opts.radius.max(1) {
        let step = match model {
            KernelModel::TwoPointEnvironmentZ(env) => environment_types(env, n, opts),
            _ => local_type_representatives(model, n).and_then(|reps| {
                reps.iter()
                    .map(|x| {
                        let region = irreducible_ball(model, x, n, opts.node_cap)?;
                        Ok((x.to_string(), rho_finite_with(&region, opts.tol, opts.max_iter)?))
                    })
                    .collect::<Result<Vec<_>>>()
            }),
        };
        match step {
            Ok(parts) => {
                let mut best = parts
                    .iter()
                    .map(|p| p.1.clone())
                    .min_by(|a, b| a.value.total_cmp(&b.value))
                    .ok_or_else(|| Error::InvalidModel("no local types".into()))?;
                best.variant = Variant::CheckRho;
                best.radius = Some(n);
                best.gap = sequence.last().map(|p| best.value - p.value);
                sequence.push(best);
                last_parts = parts;
            }
            Err(Error::ResourceLimit { .. }) if !sequence.is_empty() => break,
            Err(e) => return Err(e),
        }
    }
    let estimate = sequence.last().cloned().expect("at least one radius");
    let argmin = last_parts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.value.total_cmp(&b.1 .1.value))
        .map(|(i, _)| i);
    Ok(VariantReport { estimate, parts: last_parts, argmin, attained: None, sequence })
}

/// One state of each isomorphism type of radius-`n` balls.
pub fn local_type_representatives(model: &KernelModel, n: u32) -> Result<Vec<StateId>> {
    let reps = match model {
        KernelModel::DriftZd(_) | KernelModel::RegularTree(_) => vec![model.origin()],
        KernelModel::SeedChain(s) => {
            let r = n as i64 + 1;
            (s.seed_site() - r..=s.seed_site() + r).map(StateId::site).collect()
        }
        KernelModel::FiniteChain(c) => (0..c.len() as u32).map(StateId::Node).collect(),
        KernelModel::CycleGraph(g) => {
            let c = g.max_cycle();
            let len = 1u64 << c;
            let far = (n as u64 + 1).min(len - 1);
            std::iter::once(StateId::Root)
                .chain((1..=far).map(|j| StateId::Cycle { cycle: c, pos: len - j }))
                .collect()
        }
        KernelModel::ConeTypeTree(t) => cone_tree_representatives(t, n)?,
        KernelModel::Glued(g) => {
            let mut set = BTreeSet::from([StateId::Root]);
            for (i, c) in g.components().iter().enumerate() {
                for r in rooted_representatives(c, n + 1)? {
                    set.insert(g.embed(i, r));
                }
            }
            set.into_iter().collect()
        }
        KernelModel::TwoPointEnvironmentZ(_) => {
            return Err(Error::Unsupported(
                "environment ball types are enumerated as words, not states".into(),
            ))
        }
    };
    if reps.len() > MAX_REPRESENTATIVES {
        return Err(Error::ResourceLimit { cap: MAX_REPRESENTATIVES });
    }
    Ok(reps)
}

/// Representatives when the origin is a distinguished vertex.
fn rooted_representatives(model: &KernelModel, n: u32) -> Result<Vec<StateId>> {
    match model {
        KernelModel::DriftZd(m) => {
            let d = m.dim();
            let r = n as i64;
            let mut out = Vec::new();
            let mut x = vec![-r; d];
            loop {
                if x.iter().map(|c| c.abs()).sum::<i64>() <= r {
                    out.push(StateId::Site(x.clone()));
                }
                let mut k = 0;
                while k < d && x[k] == r {
                    x[k] = -r;
                    k += 1;
                }
                if k == d {
                    break;
                }
                x[k] += 1;
                if out.len() > MAX_REPRESENTATIVES {
                    return Err(Error::ResourceLimit { cap: MAX_REPRESENTATIVES });
                }
            }
            Ok(out)
        }
        KernelModel::RegularTree(t) => cone_tree_representatives(&t.as_cone_tree(), n),
        KernelModel::ConeTypeTree(t) => cone_tree_representatives(t, n),
        KernelModel::FiniteChain(c) => Ok((0..c.len() as u32).map(StateId::Node).collect()),
        other => Err(Error::Unsupported(format!(
            "local types of a glued {} component",
            other.family()
        ))),
    }
}

/// Vertices of every distinct type word of length ≤ `n` from the root, and
/// for each type reachable below the root every type word of length `n`
/// hanging below its shallowest occurrence.
fn cone_tree_representatives(tree: &ConeTypeTree, n: u32) -> Result<Vec<StateId>> {
    let types = tree.types();
    let distinct_children = |t: u32| -> Vec<(u32, u32)> {
        let mut seen: Vec<(u32, u32)> = Vec::new();
        for (idx, &(j, _)) in types[t as usize].children.iter().enumerate() {
            if !seen.iter().any(|s| s.1 == j) {
                seen.push((idx as u32, j));
            }
        }
        seen
    };
    let words_below = |path: Vec<u32>, t: u32, depth: u32, out: &mut BTreeSet<StateId>| -> Result<()> {
        let mut layer = vec![(path, t)];
        out.insert(StateId::Path(layer[0].0.clone()));
        for _ in 0..depth {
            let mut next = Vec::new();
            for (p, t) in &layer {
                for (idx, j) in distinct_children(*t) {
                    let mut q = p.clone();
                    q.push(idx);
                    out.insert(StateId::Path(q.clone()));
                    next.push((q, j));
                }
            }
            if out.len() > MAX_REPRESENTATIVES {
                return Err(Error::ResourceLimit { cap: MAX_REPRESENTATIVES });
            }
            layer = next;
        }
        Ok(())
    };
    let mut out = BTreeSet::new();
    words_below(Vec::new(), tree.root_type(), n, &mut out)?;
    // shallowest occurrence of each type at depth ≥ 1
    let mut first: Vec<Option<Vec<u32>>> = vec![None; types.len()];
    let mut queue: VecDeque<(Vec<u32>, u32)> = distinct_children(tree.root_type())
        .into_iter()
        .map(|(idx, j)| (vec![idx], j))
        .collect();
    while let Some((p, t)) = queue.pop_front() {
        if first[t as usize].is_some() {
            continue;
        }
        for (idx, j) in distinct_children(t) {
            let mut q = p.clone();
            q.push(idx);
            queue.push_back((q, j));
        }
        first[t as usize] = Some(p);
    }
    for (t, p) in first.into_iter().enumerate() {
        if let Some(p) = p {
            let mut deep = BTreeSet::new();
            words_below(p, t as u32, n, &mut deep)?;
            out.extend(deep.into_iter().filter(|s| match s {
                StateId::Path(q) => q.len() as u32 > n,
                _ => false,
            }));
        }
    }
    Ok(out.into_iter().collect())
}

/// Ball types of an environment: all words of step laws on `2n + 1` sites.
fn environment_types(
    env: &Environment,
    n: u32,
    opts: &SpectralOptions,
) -> Result<Vec<(String, SpectralEstimate)>> {
    let k = env.laws().len();
    let sites = 2 * n as usize + 1;
    let count = (k as f64).powi(sites as i32);
    if count > MAX_REPRESENTATIVES as f64 {
        return Err(Error::ResourceLimit { cap: MAX_REPRESENTATIVES });
    }
    let mut out = Vec::new();
    let mut word = vec![0usize; sites];
    loop {
        let states = (0..sites).map(|i| StateId::site(i as i64 - n as i64)).collect();
        let rows = (0..sites)
            .map(|i| {
                let p = env.laws()[word[i]];
                let mut row = Vec::new();
                if i > 0 {
                    row.push((i - 1, 1.0 - p));
                }
                if i + 1 < sites {
                    row.push((i + 1, p));
                }
                row
            })
            .collect();
        let region = FiniteRegion::from_rows(states, n as usize, n, RegionKind::Custom, rows)?;
        let label: String = word.iter().map(|w| w.to_string()).collect();
        out.push((label, rho_finite_with(&region, opts.tol, opts.max_iter)?));
        let mut i = 0;
        while i < sites && word[i] + 1 == k {
            word[i] = 0;
            i += 1;
        }
        if i == sites {
            break;
        }
        word[i] += 1;
    }
    Ok(out)
}

/// Perron root of `P` restricted to the members of a candidate subset
/// inside the ball of `radius` around `center`.
pub fn evaluate_candidate_subset(
    model: &KernelModel,
    center: &StateId,
    radius: u32,
    member: &dyn Fn(&StateId) -> bool,
    opts: &SpectralOptions,
) -> Result<SpectralEstimate> {
    if !member(center) {
        return Err(Error::Parameter("center is not in the candidate subset".into()));
    }
    let ball = crate::models::build_ball(model, center, radius, opts.node_cap)?;
    let keep: Vec<usize> = (0..ball.len()).filter(|&i| member(&ball.states()[i])).collect();
    let sub = ball.restrict(&keep)?;
    let core = sub.restrict(&sub.center_component())?;
    let mut est = rho_finite_with(&core, opts.tol, opts.max_iter)?;
    est.variant = Variant::TildeRho;
    Ok(est)
}
