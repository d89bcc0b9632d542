//! Monte Carlo simulation of branching Markov chains.
//!
//! Particles sharing a state are stored as one count, so a generation costs
//! time proportional to the number of occupied states. Offspring totals are
//! drawn as exact multinomials of the per-state count and then split over the
//! kernel row by another multinomial.

mod stats;
mod estimators;

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::{multinomial, KernelModel, OffspringLaw, StateId};

pub use estimators::{
    SimParams, SpeedPoint, CI_LEVEL,
    estimate_alpha_proxy, estimate_frozen_mean, estimate_min_speed, estimate_return_time,
    AlphaParams, Estimate, Estimator, SimulationSummary, SummaryRecord, TailFit, TailPoint,
};
pub use stats::{clopper_pearson, kaplan_meier, normal_interval, tail_fit, CiMethod};

/// Environment variable overriding the number of replica worker threads.
pub const WORKERS_ENV: &str = "BMC_WORKERS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Horizon,
    PopCap,
    /// No live particles remain; in BMC* every particle froze.
    Extinct,
    TargetHit,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Horizon => "horizon",
            StopReason::PopCap => "pop_cap",
            StopReason::Extinct => "extinct",
            StopReason::TargetHit => "target_hit",
        }
    }
}

/// First time a particle sits at the target, or the time observation
/// stopped without one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HitTime {
    At(u64),
    Censored(u64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CapPolicy {
    /// Stop the replica when the live population exceeds the cap.
    Stop,
    /// Remove particles from the rightmost occupied states first.
    PruneRight,
}

/// Occupation counts at one time.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ParticleFrame {
    pub time: u64,
    pub counts: BTreeMap<StateId, u64>,
    pub frozen: u64,
}

impl ParticleFrame {
    pub fn population(&self) -> u64 {
        self.counts.values().sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaResult {
    pub replica: u64,
    pub stop: StopReason,
    /// Number of generations simulated.
    pub steps: u64,
    /// Frozen count at the origin (BMC* only).
    pub nu: Option<u64>,
    /// `nu` is only a lower bound: live particles remained at the end.
    pub nu_lower_bound: bool,
    /// First return to the start.
    pub hit: HitTime,
    /// Times `n ≥ 1` at which the start was occupied.
    pub returns: u64,
    /// Live population `η(n)` for `n = 0..=steps`.
    pub population: Vec<u64>,
    /// Frozen count per time (BMC* only).
    pub frozen: Vec<u64>,
    /// Leftmost first coordinate per time, for lattice models.
    pub min_position: Vec<i64>,
    /// Particles removed by the cap policy.
    pub pruned: u64,
    pub final_frame: ParticleFrame,
}

/// Settings shared by the simulation entry points.
#[derive(Clone, Debug)]
pub struct RunSpec<'a> {
    pub model: &'a KernelModel,
    pub law: &'a OffspringLaw,
    pub start: StateId,
    pub initial: u64,
    pub horizon: u64,
    pub pop_cap: u64,
    /// Arrivals here after time 0 stop moving and branching.
    pub freeze: Option<StateId>,
    /// End the run at the first return to the start.
    pub stop_on_return: bool,
    /// End the run once this many particles have frozen.
    pub frozen_target: Option<u64>,
    pub cap_policy: CapPolicy,
}

impl<'a> RunSpec<'a> {
    pub fn new(model: &'a KernelModel, law: &'a OffspringLaw, start: StateId, horizon: u64, pop_cap: u64) -> Self {
        Self {
            model,
            law,
            start,
            initial: 1,
            horizon,
            pop_cap,
            freeze: None,
            stop_on_return: false,
            frozen_target: None,
            cap_policy: CapPolicy::Stop,
        }
    }
}

/// One replica of the branch-then-move dynamics.
pub fn simulate<R: rand::Rng + ?Sized>(spec: &RunSpec<'_>, replica: u64, rng: &mut R) -> Result<ReplicaResult> {
    if spec.horizon < 1 || spec.pop_cap < 1 || spec.initial < 1 {
        return Err(Error::Parameter("horizon, pop_cap and initial count must be at least 1".into()));
    }
    let model = spec.model;
    model.validate_state(&spec.start)?;
    if let Some(o) = &spec.freeze {
        model.validate_state(o)?;
    }
    let lattice = model.lattice_dim().is_some();
    let mut live: BTreeMap<StateId, u64> = BTreeMap::from([(spec.start.clone(), spec.initial)]);
    let mut frozen = 0u64;
    let mut population = vec![spec.initial];
    let mut frozen_trace = Vec::new();
    let mut min_position = Vec::new();
    if spec.freeze.is_some() {
        frozen_trace.push(0);
    }
    if lattice {
        min_position.push(spec.start.coordinate().unwrap_or(0));
    }
    let mut hit = None;
    let mut returns = 0;
    let mut pruned = 0;
    let mut stop = StopReason::Horizon;
    let mut buf = Vec::new();
    let mut probs = Vec::new();
    let mut split = Vec::new();
    let mut n = 0;
    while n < spec.horizon {
        n += 1;
        let mut next: BTreeMap<StateId, u64> = BTreeMap::new();
        for (x, &c) in &live {
            let kids = spec.law.at(model, x).compound(c, rng);
            model.neighbors_into(x, &mut buf)?;
            probs.clear();
            probs.extend(buf.iter().map(|e| e.1));
            multinomial(kids, &probs, rng, &mut split);
            for ((y, _), &k) in buf.iter().zip(&split) {
                if k == 0 {
                    continue;
                }
                if spec.freeze.as_ref() == Some(y) {
                    frozen = frozen.saturating_add(k);
                } else {
                    let e = next.entry(y.clone()).or_insert(0);
                    *e = e.saturating_add(k);
                }
            }
        }
        live = next;
        let returned = live.contains_key(&spec.start) || spec.freeze.as_ref().is_some_and(|o| {
            *o == spec.start && frozen > *frozen_trace.last().unwrap_or(&0)
        });
        if returned {
            returns += 1;
            hit.get_or_insert(n);
        }
        let mut eta: u64 = live.values().fold(0u64, |a, &b| a.saturating_add(b));
        if eta > spec.pop_cap && spec.cap_policy == CapPolicy::PruneRight {
            let mut excess = eta - spec.pop_cap;
            while excess > 0 {
                let mut last = live.last_entry().expect("population above cap");
                let take = excess.min(*last.get());
                *last.get_mut() -= take;
                if *last.get() == 0 {
                    last.remove();
                }
                excess -= take;
                pruned += take;
            }
            eta = spec.pop_cap;
        }
        population.push(eta);
        if spec.freeze.is_some() {
            frozen_trace.push(frozen);
        }
        if lattice {
            let m = live.keys().next().and_then(|x| x.coordinate());
            min_position.push(m.unwrap_or(*min_position.last().unwrap_or(&0)));
        }
        if returned && spec.stop_on_return {
            stop = StopReason::TargetHit;
            break;
        }
        if spec.frozen_target.is_some_and(|t| frozen >= t) {
            stop = StopReason::TargetHit;
            break;
        }
        if live.is_empty() {
            stop = StopReason::Extinct;
            break;
        }
        if eta > spec.pop_cap {
            stop = StopReason::PopCap;
            break;
        }
    }
    let nu = spec.freeze.as_ref().map(|_| frozen);
    Ok(ReplicaResult {
        replica,
        stop,
        steps: n,
        nu,
        nu_lower_bound: nu.is_some() && !live.is_empty(),
        hit: hit.map_or(HitTime::Censored(n), HitTime::At),
        returns,
        population,
        frozen: frozen_trace,
        min_position,
        pruned,
        final_frame: ParticleFrame { time: n, counts: live, frozen },
    })
}

/// Branching Markov chain from one particle at `start`.
pub fn run_bmc<R: rand::Rng + ?Sized>(
    model: &KernelModel,
    law: &OffspringLaw,
    start: &StateId,
    horizon: u64,
    pop_cap: u64,
    rng: &mut R,
) -> Result<ReplicaResult> {
    simulate(&RunSpec::new(model, law, start.clone(), horizon, pop_cap), 0, rng)
}

/// BMC* from one particle at `start`: particles reaching `origin` at a time
/// `n ≥ 1` freeze there.
pub fn run_bmc_star<R: rand::Rng + ?Sized>(
    model: &KernelModel,
    law: &OffspringLaw,
    origin: &StateId,
    start: &StateId,
    horizon: u64,
    pop_cap: u64,
    rng: &mut R,
) -> Result<ReplicaResult> {
    let mut spec = RunSpec::new(model, law, start.clone(), horizon, pop_cap);
    spec.freeze = Some(origin.clone());
    simulate(&spec, 0, rng)
}

/// Independent stream `replica` of the master seed.
pub fn replica_rng(master: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(replica);
    rng
}

/// Runs `f` for replicas `0..count` in parallel and returns the results in
/// replica order. `BMC_WORKERS` caps the worker count.
pub fn run_replicas<T, F>(count: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync + Send,
{
    let run = || (0..count).into_par_iter().map(&f).collect::<Result<Vec<T>>>();
    match std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0) {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Parameter(format!("cannot start {n} workers: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Replicas of `spec` under the master seed.
pub fn run_many(spec: &RunSpec<'_>, replicas: u64, seed: u64) -> Result<Vec<ReplicaResult>> {
    run_replicas(replicas, |r| simulate(spec, r, &mut replica_rng(seed, r)))
}
