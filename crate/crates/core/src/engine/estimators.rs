use serde::{Deserialize, Serialize};

use super::stats::{clopper_pearson, kaplan_meier, normal_interval, quantile_with_ci, tail_fit, CiMethod};
use super::{replica_rng, run_replicas, simulate, CapPolicy, HitTime, ReplicaResult, RunSpec, StopReason};
use crate::error::{Error, Result};
use crate::models::{KernelModel, OffspringLaw, StateId};

pub const CI_LEVEL: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    FrozenMean,
    AlphaProxy,
    ReturnTime,
    MinSpeed,
}

impl Estimator {
    pub fn as_str(&self) -> &'static str {
        match self {
            Estimator::FrozenMean => "frozen_mean",
            Estimator::AlphaProxy => "alpha_proxy",
            Estimator::ReturnTime => "return_time",
            Estimator::MinSpeed => "min_speed",
        }
    }
}

/// Replica count, horizon, population cap and master seed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimParams {
    pub replicas: u64,
    pub horizon: u64,
    pub pop_cap: u64,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self { replicas: 1000, horizon: 150, pop_cap: 1_000_000, seed: 0 }
    }
}

/// Parameters of the iterated BMC* visit-count proxy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AlphaParams {
    /// Frozen arrivals needed to count a replica as recurrent.
    pub k: u64,
    pub sim: SimParams,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub name: &'static str,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub method: CiMethod,
    pub samples: u64,
}

impl Estimate {
    fn mean(name: &'static str, samples: &[f64]) -> Self {
        let (value, ci_low, ci_high) = normal_interval(samples, CI_LEVEL);
        Self { name, value, ci_low, ci_high, method: CiMethod::Normal, samples: samples.len() as u64 }
    }

    /// Proportion `k/n`; exact interval below 100 samples.
    fn proportion(name: &'static str, k: u64, n: u64) -> Self {
        let value = if n == 0 { f64::NAN } else { k as f64 / n as f64 };
        let (ci_low, ci_high, method) = if n == 0 {
            (f64::NAN, f64::NAN, CiMethod::None)
        } else if n < 100 {
            let (lo, hi) = clopper_pearson(k, n, CI_LEVEL);
            (lo, hi, CiMethod::ClopperPearson)
        } else {
            let flags: Vec<f64> = (0..n).map(|i| if i < k { 1.0 } else { 0.0 }).collect();
            let (_, lo, hi) = normal_interval(&flags, CI_LEVEL);
            (lo.max(0.0), hi.min(1.0), CiMethod::Normal)
        };
        Self { name, value, ci_low, ci_high, method, samples: n }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailPoint {
    pub n: u64,
    pub survival: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpeedPoint {
    pub n: u64,
    pub mean: f64,
    pub quantile_05: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SimulationSummary {
    pub estimator: Estimator,
    pub replicas: u64,
    pub seed: u64,
    pub horizon: u64,
    pub pop_cap: u64,
    pub level: f64,
    pub estimates: Vec<Estimate>,
    /// Kaplan–Meier `P(T > n)` (return times only).
    pub tail: Vec<TailPoint>,
    pub tail_fit: Option<TailFit>,
    /// `M_n/n` by time (speed only).
    pub speed_trace: Vec<SpeedPoint>,
    pub k: Option<u64>,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub results: Vec<ReplicaResult>,
}

/// One CSV row per estimate.
#[derive(Clone, Debug, Serialize)]
pub struct SummaryRecord {
    pub model_id: String,
    pub law_id: String,
    pub estimator: String,
    pub value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_method: &'static str,
    pub r: u64,
    pub horizon: u64,
    pub pop_cap: u64,
    pub seed: u64,
}

impl SimulationSummary {
    fn new(estimator: Estimator, p: &SimParams, results: Vec<ReplicaResult>) -> Self {
        Self {
            estimator,
            replicas: p.replicas,
            seed: p.seed,
            horizon: p.horizon,
            pop_cap: p.pop_cap,
            level: CI_LEVEL,
            estimates: Vec::new(),
            tail: Vec::new(),
            tail_fit: None,
            speed_trace: Vec::new(),
            k: None,
            notes: Vec::new(),
            results,
        }
    }

    pub fn get(&self, name: &str) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.name == name)
    }

    /// The first estimate, which carries the estimator's main quantity.
    pub fn headline(&self) -> &Estimate {
        &self.estimates[0]
    }

    pub fn records(&self, model_id: &str, law_id: &str) -> Vec<SummaryRecord> {
        self.estimates
            .iter()
            .map(|e| SummaryRecord {
                model_id: model_id.to_string(),
                law_id: law_id.to_string(),
                estimator: format!("{}.{}", self.estimator.as_str(), e.name),
                value: e.value,
                ci_low: e.ci_low,
                ci_high: e.ci_high,
                ci_method: e.method.as_str(),
                r: self.replicas,
                horizon: self.horizon,
                pop_cap: self.pop_cap,
                seed: self.seed,
            })
            .collect()
    }
}

fn check_params(p: &SimParams) -> Result<()> {
    if p.replicas < 1 || p.horizon < 1 || p.pop_cap < 1 {
        return Err(Error::Parameter("replicas, horizon and pop_cap must be at least 1".into()));
    }
    Ok(())
}

/// `E_x ν(x)` from BMC* replicas started and frozen at `x`.
pub fn estimate_frozen_mean(
    model: &KernelModel,
    law: &OffspringLaw,
    x: &StateId,
    p: &SimParams,
) -> Result<SimulationSummary> {
    check_params(p)?;
    let mut spec = RunSpec::new(model, law, x.clone(), p.horizon, p.pop_cap);
    spec.freeze = Some(x.clone());
    let results = run_replicas(p.replicas, |r| simulate(&spec, r, &mut replica_rng(p.seed, r)))?;
    let nu: Vec<f64> = results.iter().map(|r| r.nu.unwrap_or(0) as f64).collect();
    let lower = results.iter().filter(|r| r.nu_lower_bound).count() as u64;
    let capped = results.iter().filter(|r| r.stop == StopReason::PopCap).count() as u64;
    let mut s = SimulationSummary::new(Estimator::FrozenMean, p, results);
    s.estimates.push(Estimate::mean("mean", &nu));
    s.estimates.push(Estimate::proportion("lower_bound_fraction", lower, p.replicas));
    s.estimates.push(Estimate::proportion("pop_cap_fraction", capped, p.replicas));
    if lower > 0 {
        s.notes.push(format!("{lower} replicas ended with live particles; their nu is a lower bound"));
    }
    Ok(s)
}

/// Fraction of replicas in which iterated BMC* rounds at `x` accumulate
/// at least `k` frozen arrivals.
///
/// Each round releases the previous round's frozen cohort from `x` as fresh
/// BMC* roots. A replica fails when a round freezes nobody.
pub fn estimate_alpha_proxy(
    model: &KernelModel,
    law: &OffspringLaw,
    x: &StateId,
    params: &AlphaParams,
) -> Result<SimulationSummary> {
    let p = &params.sim;
    check_params(p)?;
    if params.k < 2 {
        return Err(Error::Parameter(format!("alpha proxy needs K >= 2, got {}", params.k)));
    }
    let outcomes = run_replicas(p.replicas, |r| {
        let mut rng = replica_rng(p.seed, r);
        let mut total = 0u64;
        let mut cohort = 1u64;
        let mut rounds = 0u64;
        let mut last = None;
        while total < params.k {
            let mut spec = RunSpec::new(model, law, x.clone(), p.horizon, p.pop_cap);
            spec.initial = cohort;
            spec.freeze = Some(x.clone());
            spec.frozen_target = Some(params.k - total);
            let res = simulate(&spec, r, &mut rng)?;
            rounds += 1;
            let nu = res.nu.unwrap_or(0);
            last = Some(res);
            if nu == 0 {
                break;
            }
            total += nu;
            cohort = nu;
        }
        Ok((total >= params.k, rounds, last.expect("at least one round")))
    })?;
    let hits = outcomes.iter().filter(|o| o.0).count() as u64;
    let rounds: Vec<f64> = outcomes.iter().map(|o| o.1 as f64).collect();
    let results = outcomes.into_iter().map(|o| o.2).collect();
    let mut s = SimulationSummary::new(Estimator::AlphaProxy, p, results);
    s.k = Some(params.k);
    s.estimates.push(Estimate::proportion("alpha", hits, p.replicas));
    s.estimates.push(Estimate::mean("rounds", &rounds));
    s.notes.push(format!("proxy event: at least {} frozen arrivals, horizon {} per round", params.k, p.horizon));
    Ok(s)
}

/// First time any particle of a BMC started at `x` returns to `x`.
pub fn estimate_return_time(
    model: &KernelModel,
    law: &OffspringLaw,
    x: &StateId,
    p: &SimParams,
) -> Result<SimulationSummary> {
    check_params(p)?;
    if p.replicas < 100 {
        return Err(Error::Parameter(format!("return times need R >= 100, got {}", p.replicas)));
    }
    let mut spec = RunSpec::new(model, law, x.clone(), p.horizon, p.pop_cap);
    spec.stop_on_return = true;
    let results = run_replicas(p.replicas, |r| simulate(&spec, r, &mut replica_rng(p.seed, r)))?;
    let events: Vec<(u64, bool)> = results
        .iter()
        .map(|r| match r.hit {
            HitTime::At(t) => (t, true),
            HitTime::Censored(t) => (t, false),
        })
        .collect();
    let observed: Vec<f64> = events.iter().filter(|e| e.1).map(|e| e.0 as f64).collect();
    let censored = events.iter().filter(|e| !e.1).count() as u64;
    let cap_censored =
        results.iter().filter(|r| r.stop == StopReason::PopCap).count() as u64;
    let max_time = events.iter().map(|e| e.0).max().unwrap_or(0);
    let survival = kaplan_meier(&events, max_time);
    let mut s = SimulationSummary::new(Estimator::ReturnTime, p, results);
    s.estimates.push(Estimate::mean("mean_uncensored", &observed));
    s.estimates.push(Estimate::proportion("censored_fraction", censored, p.replicas));
    s.estimates.push(Estimate::proportion("pop_cap_censored_fraction", cap_censored, p.replicas));
    s.tail_fit = tail_fit(&survival).map(|(slope, intercept, r2)| TailFit { slope, intercept, r2 });
    s.tail = survival.into_iter().enumerate().map(|(n, survival)| TailPoint { n: n as u64, survival }).collect();
    if cap_censored > 0 {
        s.notes.push(format!("{cap_censored} replicas censored by the population cap before the horizon"));
    }
    Ok(s)
}

/// `M_n/n` for a branching walk on `Z` started at the origin.
///
/// Above the population cap the rightmost particles are removed, which
/// leaves the leftmost particle's law nearly untouched.
pub fn estimate_min_speed(
    model: &KernelModel,
    law: &OffspringLaw,
    n: u64,
    p: &SimParams,
) -> Result<SimulationSummary> {
    check_params(p)?;
    if model.lattice_dim() != Some(1) {
        return Err(Error::Unsupported(format!("minimal speed needs a model on Z, got {}", model.label())));
    }
    if n < 50 {
        return Err(Error::Parameter(format!("minimal speed needs n >= 50, got {n}")));
    }
    let mut spec = RunSpec::new(model, law, model.origin(), n, p.pop_cap);
    spec.cap_policy = CapPolicy::PruneRight;
    let results = run_replicas(p.replicas, |r| simulate(&spec, r, &mut replica_rng(p.seed, r)))?;
    let speeds = |t: usize| -> Vec<f64> {
        let mut v: Vec<f64> = results
            .iter()
            .map(|r| r.min_position.get(t).copied().unwrap_or(*r.min_position.last().unwrap()) as f64 / t as f64)
            .collect();
        v.sort_by(f64::total_cmp);
        v
    };
    let last = speeds(n as usize);
    let (q, lo, hi) = quantile_with_ci(&last, 0.05, CI_LEVEL);
    let pruned = results.iter().filter(|r| r.pruned > 0).count() as u64;
    let trace = (1..=n)
        .map(|t| {
            let v = speeds(t as usize);
            SpeedPoint { n: t, mean: v.iter().sum::<f64>() / v.len() as f64, quantile_05: quantile_with_ci(&v, 0.05, CI_LEVEL).0 }
        })
        .collect();
    let mut s = SimulationSummary::new(Estimator::MinSpeed, &SimParams { horizon: n, ..*p }, results);
    s.estimates.push(Estimate {
        name: "quantile_05",
        value: q,
        ci_low: lo,
        ci_high: hi,
        method: CiMethod::OrderStatistic,
        samples: p.replicas,
    });
    s.estimates.push(Estimate::mean("mean", &last));
    s.estimates.push(Estimate::proportion("pruned_fraction", pruned, p.replicas));
    s.speed_trace = trace;
    if pruned > 0 {
        s.notes.push(format!("{pruned} replicas pruned from the right at the population cap"));
    }
    Ok(s)
}
