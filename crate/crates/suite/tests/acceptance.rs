use std::fs;
use std::path::Path;
use std::time::Instant;

use bmc_cli::{parse_scenario, run_scenario};
use bmc_core::classify::{analytic_verdict, Phase, THRESHOLD_TOL};
use bmc_core::engine::{
    estimate_alpha_proxy, estimate_frozen_mean, estimate_min_speed, estimate_return_time, AlphaParams,
    SimParams, SimulationSummary, WORKERS_ENV,
};
use bmc_core::genfun::{first_return_coefficients, green_coefficients, gw_extinction, rho_from_u, GwLaw};
use bmc_core::ldp::{rate, rho_from_ldp, speed_threshold, RateFunction, StepLaw};
use bmc_core::models::{Environment, KernelModel, Offspring, OffspringLaw, StateId};
use bmc_core::spectral::{rho_truncation_sequence, SpectralOptions};
use bmc_suite::{criterion, Checks, Outcome};
use rand::{Rng, SeedableRng};

type Check = Result<(bool, String), String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn with_mean(m: f64) -> OffspringLaw {
    OffspringLaw::constant(Offspring::with_mean(m).expect("valid mean"))
}

fn sim(replicas: u64, horizon: u64, seed: u64) -> SimParams {
    SimParams { replicas, horizon, pop_cap: 1_000_000, seed }
}

fn half_width(s: &SimulationSummary, name: &str) -> f64 {
    let e = s.get(name).expect("estimate present");
    (e.ci_high - e.ci_low) / 2.0
}

fn c1() -> Check {
    let start = Instant::now();
    let walk = KernelModel::walk_z(0.75).map_err(err)?;
    let seq = rho_truncation_sequence(&walk, &StateId::site(0), 60, &SpectralOptions::default())
        .map_err(|e| err(e.source))?;
    let secs = start.elapsed().as_secs_f64();
    let target = 3f64.sqrt() / 2.0;
    let last = seq.last().expect("60 radii").value;
    let monotone = seq.windows(2).all(|w| w[1].value >= w[0].value);
    let mut c = Checks::default();
    c.add((last - target).abs() <= 1e-3, format!("rho_60 = {last:.6}, target {target:.6}"))
        .add(monotone, "monotone nondecreasing")
        .add(secs < 5.0, format!("{secs:.2}s < 5s"));
    c.finish()
}

fn c2() -> Check {
    let start = Instant::now();
    let tree = KernelModel::regular_tree(4).map_err(err)?;
    let seq = rho_truncation_sequence(&tree, &StateId::Path(vec![]), 10, &SpectralOptions::default())
        .map_err(|e| err(e.source))?;
    let secs = start.elapsed().as_secs_f64();
    let target = 3f64.sqrt() / 2.0;
    let last = seq.last().expect("10 depths").value;
    let below = seq.iter().all(|e| e.value <= target + 1e-12);
    let mut c = Checks::default();
    c.add((last - target).abs() <= 1e-2, format!("depth 10 gives {last:.6}, target {target:.6}, gap {:.4}", target - last))
        .add(below, "no truncation exceeds the limit")
        .add(secs < 60.0, format!("{secs:.2}s < 60s"));
    c.finish()
}

/// Coefficients of `1 − √(1 − 4pq z²)`.
fn first_return_oracle(p: f64, n: usize) -> Vec<f64> {
    let pq = p * (1.0 - p);
    let mut out = vec![0.0; n + 1];
    let mut central = 1.0;
    for k in 1..=n / 2 {
        central *= (2 * k) as f64 * (2 * k - 1) as f64 / (k * k) as f64 * pq;
        out[2 * k] = central / (2 * k - 1) as f64;
    }
    out
}

fn c3() -> Check {
    let p = 0.75;
    let walk = KernelModel::walk_z(p).map_err(err)?;
    let table = first_return_coefficients(&walk, &StateId::site(0), 200, 100).map_err(err)?;
    let oracle = first_return_oracle(p, 200);
    let worst = table
        .coefficients
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).abs() / b.abs().max(1e-300))
        .filter(|r| r.is_finite())
        .fold(0.0f64, f64::max);
    let root = rho_from_u(&table).map_err(err)?;
    let oracle_root = 1.0 / (2.0 * (p * (1.0 - p)).sqrt());
    let mut c = Checks::default();
    c.add(worst <= 1e-10, format!("coefficients match the closed form, worst relative error {worst:.1e}"))
        .add(
            (root.z_star - oracle_root).abs() <= 2e-2,
            format!("z* = {:.5}, oracle root {oracle_root:.5}", root.z_star),
        );
    c.finish()
}

fn c4() -> Check {
    let models: Vec<(&str, KernelModel, StateId)> = vec![
        ("walk p=3/4", KernelModel::walk_z(0.75).map_err(err)?, StateId::site(0)),
        ("walk p=1/2", KernelModel::walk_z(0.5).map_err(err)?, StateId::site(0)),
        (
            "planar drift",
            KernelModel::drift_zd(vec![0.3, 0.3], vec![0.2, 0.2]).map_err(err)?,
            StateId::Site(vec![0, 0]),
        ),
        ("seed chain at the seed", KernelModel::seed_chain(), StateId::site(1)),
        (
            "two-point environment",
            KernelModel::TwoPointEnvironmentZ(Environment::new(vec![0.75, 0.4], vec![0.5, 0.5], 9).map_err(err)?),
            StateId::site(0),
        ),
    ];
    let mut c = Checks::default();
    for (name, model, x) in &models {
        let g = green_coefficients(model, x, 200, 100).map_err(err)?.coefficients;
        let u = first_return_coefficients(model, x, 200, 100).map_err(err)?.coefficients;
        let worst = (1..=200)
            .map(|n| (g[n] - (1..=n).map(|k| u[k] * g[n - k]).sum::<f64>()).abs())
            .fold((g[0] - 1.0).abs(), f64::max);
        c.add(worst <= 1e-10, format!("{name}: {worst:.1e}"));
    }
    c.finish()
}

fn c5() -> Check {
    let quad = GwLaw::new(vec![1.0 / 16.0, 6.0 / 16.0, 9.0 / 16.0]).map_err(err)?;
    let q = gw_extinction(&quad);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let len = rng.random_range(2..7);
        let raw: Vec<f64> = (0..len).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let mut masses: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let mean: f64 = masses.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
        if mean >= 1.0 {
            let keep = rng.random_range(0.5..0.99) / mean;
            masses.iter_mut().for_each(|p| *p *= keep);
            masses[0] += 1.0 - keep;
        }
        let law = GwLaw::new(masses).map_err(err)?;
        assert!(law.mean() < 1.0);
        worst = worst.max((gw_extinction(&law) - 1.0).abs());
    }
    let mut c = Checks::default();
    c.add((q - 1.0 / 9.0).abs() <= 1e-10, format!("q = {q:.12}"))
        .add(worst <= 1e-10, format!("20 subcritical laws, worst |q - 1| = {worst:.1e}"));
    c.finish()
}

fn bernoulli_rate(p: f64, a: f64) -> f64 {
    let term = |w: f64, base: f64| if w == 0.0 { 0.0 } else { w * (w / base).ln() };
    term((1.0 + a) / 2.0, p) + term((1.0 - a) / 2.0, 1.0 - p)
}

fn c6() -> Check {
    let mut c = Checks::default();
    for p in [0.6, 0.75, 0.9] {
        let rf = RateFunction::new(StepLaw::bernoulli(p).map_err(err)?);
        let worst = (0..=40)
            .map(|i| {
                let a = -1.0 + 0.05 * i as f64;
                (rate(&rf, a) - bernoulli_rate(p, a)).abs()
            })
            .fold(0.0f64, f64::max);
        let ldp = rho_from_ldp(&rf).value;
        let closed = 2.0 * (p * (1.0 - p)).sqrt();
        c.add(worst <= 1e-8, format!("p={p}: grid error {worst:.1e}"))
            .add((ldp - closed).abs() <= 1e-10, format!("p={p}: |rho_ldp - 2sqrt(pq)| = {:.1e}", (ldp - closed).abs()));
    }
    c.finish()
}

fn c7() -> Check {
    let start = Instant::now();
    let walk = KernelModel::walk_z(0.75).map_err(err)?;
    let o = StateId::site(0);
    let low = estimate_frozen_mean(&walk, &with_mean(1.05), &o, &sim(2000, 150, 7)).map_err(err)?;
    let high = estimate_frozen_mean(&walk, &with_mean(1.3), &o, &sim(2000, 150, 8)).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let (a, b) = (low.headline(), high.headline());
    let mut c = Checks::default();
    c.add(a.ci_high <= 1.02, format!("m=1.05: E nu in [{:.4}, {:.4}]", a.ci_low, a.ci_high))
        .add(b.ci_low > 1.0, format!("m=1.3: E nu in [{:.1}, {:.1}]", b.ci_low, b.ci_high))
        .add(secs < 120.0, format!("{secs:.1}s < 120s"));
    c.finish()
}

fn c8() -> Check {
    let binary = OffspringLaw::binary();
    let seed = KernelModel::seed_chain();
    let alpha = |model: &KernelModel, x: i64, horizon: u64, s: u64| -> Result<f64, String> {
        let p = AlphaParams { k: 50, sim: sim(400, horizon, s) };
        Ok(estimate_alpha_proxy(model, &binary, &StateId::site(x), &p).map_err(err)?.headline().value)
    };
    let a1 = alpha(&seed, 0, 100, 31)?;
    let a2 = alpha(&seed, 0, 200, 31)?;
    let aside = alpha(&seed, 2, 100, 31)?;
    let drift = alpha(&KernelModel::walk_z(0.75).map_err(err)?, 0, 100, 32)?;
    let inside = |a: f64| (0.05..=0.95).contains(&a);
    let mut c = Checks::default();
    c.add(inside(a1) && inside(a2), format!("seed chain x=0: alpha {a1:.4} (H=100), {a2:.4} (H=200)"))
        .add((a1 - a2).abs() <= 0.05, format!("horizon doubling moves alpha by {:.4}", (a1 - a2).abs()))
        .add(drift >= 0.95, format!("drift walk: alpha {drift:.4}"))
        .add(true, format!("diagnostic, seed chain x=2: alpha {aside:.4}"));
    c.finish()
}

fn c9() -> Check {
    let weak = KernelModel::walk_z((2.0 + 3f64.sqrt()) / 4.0).map_err(err)?;
    let s1 = estimate_min_speed(&weak, &OffspringLaw::binary(), 100, &sim(500, 100, 41)).map_err(err)?;
    let q1 = s1.headline().value;
    let walk = KernelModel::walk_z(0.75).map_err(err)?;
    let s2 = estimate_min_speed(&walk, &with_mean(1.5), 100, &sim(500, 100, 42)).map_err(err)?;
    let q2 = s2.headline().value;
    let rf = RateFunction::new(StepLaw::from_model(&walk).map_err(err)?);
    let target = speed_threshold(&rf, 1.5).map_err(err)?.value;
    let mut c = Checks::default();
    c.add(q1.abs() <= 0.1, format!("p=(2+sqrt3)/4, m=2: q05 = {q1:.3}"))
        .add((q2 - target).abs() <= 0.1, format!("p=3/4, m=1.5: q05 = {q2:.3}, threshold {target:.4}"));
    c.finish()
}

fn c10() -> Check {
    let cycles = KernelModel::cycle_graph();
    let pos_rec = OffspringLaw::constant(Offspring::fixed(2).map_err(err)?)
        .with_state(StateId::Root, Offspring::new(vec![0.5, 0.0, 0.5]).map_err(err)?)
        .map_err(err)?;
    let mut c = Checks::default();
    for h in [1024, 2048] {
        let s = estimate_return_time(&cycles, &pos_rec, &StateId::Root, &sim(1000, h, 51)).map_err(err)?;
        let cf = s.get("censored_fraction").expect("estimate").value;
        let cap = s.get("pop_cap_censored_fraction").expect("estimate").value;
        c.add(cf >= 0.2, format!("cycles H={h}: censored {cf:.3} (pop cap {cap:.3})"));
    }
    let walk = KernelModel::walk_z(0.75).map_err(err)?;
    let binary = OffspringLaw::binary();
    let a = estimate_return_time(&walk, &binary, &StateId::site(0), &sim(1000, 1024, 52)).map_err(err)?;
    let b = estimate_return_time(&walk, &binary, &StateId::site(0), &sim(1000, 2048, 53)).map_err(err)?;
    let r2 = a.tail_fit.map(|f| f.r2).unwrap_or(f64::NAN);
    let (ma, mb) = (a.headline().value, b.headline().value);
    let tol = half_width(&a, "mean_uncensored").hypot(half_width(&b, "mean_uncensored"));
    c.add(r2 > 0.9, format!("drift walk m=2: tail R2 = {r2:.3}"))
        .add((ma - mb).abs() <= tol, format!("mean T {ma:.3} (H=1024), {mb:.3} (H=2048), allowed {tol:.3}"));
    c.finish()
}

fn c11() -> Check {
    let model = KernelModel::line_tree(5).map_err(err)?;
    let mut c = Checks::default();
    let expected = [(1.20, Phase::Transient), (1.23, Phase::WeaklyRecurrent), (1.30, Phase::StronglyRecurrent)];
    let mut thresholds = (f64::NAN, f64::NAN);
    for (m, want) in expected {
        let v = analytic_verdict(&model, &with_mean(m), THRESHOLD_TOL).map_err(err)?;
        thresholds = (
            v.threshold("1/rho").map(|t| t.value).unwrap_or(f64::NAN),
            v.threshold("1/varrho").map(|t| t.value).unwrap_or(f64::NAN),
        );
        c.add(v.phase == want, format!("m={m}: {}", v.phase.as_str()));
    }
    c.add((thresholds.0 - 1.5f64.sqrt()).abs() < 1e-12, format!("1/rho = {:.5}", thresholds.0))
        .add((thresholds.1 - 1.25).abs() < 1e-12, format!("1/varrho = {:.5}", thresholds.1));
    c.finish()
}

const DETERMINISM_SCENARIO: &str = r#"{
  "seed": 424242,
  "model": {"family": "DriftZd", "id": "walk", "params": {"p_plus": [0.75], "p_minus": [0.25]}},
  "law": {"default": {"mean": 1.3}},
  "tasks": [
    {"kind": "spectral", "id": "rho", "params": {"max_radius": 20}},
    {"kind": "series", "id": "series", "params": {"order": 60}},
    {"kind": "classify", "id": "phase"},
    {"kind": "simulate", "id": "nu", "params": {"replicas": 300, "horizon": 80, "pop_cap": 100000}},
    {"kind": "simulate", "id": "ret", "params": {"estimator": "return_time", "replicas": 200, "horizon": 128, "pop_cap": 100000}},
    {"kind": "simulate", "id": "alpha", "params": {"estimator": "alpha_proxy", "replicas": 100, "horizon": 60, "pop_cap": 100000, "k": 10}},
    {"kind": "speed", "id": "speed", "params": {"n": 60, "replicas": 100, "pop_cap": 100000}},
    {"kind": "sweep", "id": "sweep", "params": {"m_range": {"from": 1.05, "to": 1.5, "points": 10}}}
  ]
}"#;

fn csv_files(dir: &Path, base: &Path, out: &mut Vec<(String, Vec<u8>)>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.path());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            csv_files(&p, base, out)?;
        } else if p.extension().is_some_and(|x| x == "csv") {
            out.push((p.strip_prefix(base).expect("inside").display().to_string(), fs::read(&p)?));
        }
    }
    Ok(())
}

fn c12() -> Check {
    let s = parse_scenario(DETERMINISM_SCENARIO, true).map_err(err)?;
    let (a, b) = (tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?);
    std::env::remove_var(WORKERS_ENV);
    let ra = run_scenario(&s, a.path()).map_err(err)?;
    std::env::set_var(WORKERS_ENV, "1");
    let rb = run_scenario(&s, b.path()).map_err(err)?;
    std::env::remove_var(WORKERS_ENV);
    let (mut fa, mut fb) = (Vec::new(), Vec::new());
    csv_files(a.path(), a.path(), &mut fa).map_err(err)?;
    csv_files(b.path(), b.path(), &mut fb).map_err(err)?;
    let mut c = Checks::default();
    c.add(!ra.failed() && !rb.failed(), "all tasks ran")
        .add(fa.len() >= 10 && fa == fb, format!("{} CSV files byte-identical across reruns (pool vs 1 worker)", fa.len()));
    c.finish()
}

fn main() {
    let criteria: Vec<(u32, &'static str, fn() -> Check)> = vec![
        (1, "spectral closed-form recovery", c1),
        (2, "tree spectral radius", c2),
        (3, "rho from U", c3),
        (4, "renewal identity", c4),
        (5, "Galton-Watson extinction", c5),
        (6, "rate function duality", c6),
        (7, "frozen-mean phase split", c7),
        (8, "weak vs strong recurrence", c8),
        (9, "speed law", c9),
        (10, "positive vs null recurrence", c10),
        (11, "three-band phase diagram", c11),
        (12, "determinism", c12),
    ];
    let outcomes: Vec<Outcome> = criteria
        .into_iter()
        .map(|(id, title, f)| {
            let o = criterion(id, title, f);
            println!("{}", o.line());
            o
        })
        .collect();
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| format!("C{}", o.id)).collect();
    println!("acceptance: {} of {} criteria pass", outcomes.len() - failed.len(), outcomes.len());
    if !failed.is_empty() {
        println!("failing: {}", failed.join(" "));
        std::process::exit(1);
    }
}
