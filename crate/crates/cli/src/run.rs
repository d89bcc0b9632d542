//! Task execution, CSV output and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bmc_core::classify::{analytic_verdict, PhaseVerdict, VerdictRow};
use bmc_core::engine::{
    estimate_alpha_proxy, estimate_frozen_mean, estimate_min_speed, estimate_return_time, AlphaParams,
    Estimator, SimulationSummary,
};
use bmc_core::genfun::{first_return_coefficients, green_coefficients, rho_from_u, SeriesRow, URoot};
use bmc_core::ldp::{rate_curve, speed_threshold, RateFunction, RatePoint, SpeedThreshold, StepLaw};
use bmc_core::models::KernelModel;
use bmc_core::spectral::{rho_truncation_sequence, rho_variant, SpectralOptions, Variant};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::plot::emit_plotdata;
use crate::scenario::{Scenario, SpectralTask, SpeedTask, Task, TaskKind};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, Serialize)]
pub struct SpectralRow {
    pub model_id: String,
    pub center: String,
    pub variant: &'static str,
    pub radius: Option<u32>,
    pub value: f64,
    pub lower_bound: bool,
    pub residual: f64,
    pub states: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct RootRow {
    pub model_id: String,
    pub center: String,
    pub order: usize,
    pub z_star: f64,
    pub rho: f64,
    pub exact_coefficients: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpeedRow {
    pub model_id: String,
    pub law_id: String,
    pub m: f64,
    pub n: u64,
    pub analytic_speed: f64,
    pub analytic_clamped: bool,
    pub empirical_quantile_05: f64,
    pub quantile_ci_low: f64,
    pub quantile_ci_high: f64,
    pub empirical_mean: f64,
    pub pruned_fraction: f64,
    pub replicas: u64,
    pub seed: u64,
}

/// In-memory result of one task.
#[derive(Clone, Debug)]
pub enum TaskOutput {
    Spectral(Vec<SpectralRow>),
    Series { rows: Vec<SeriesRow>, root: Option<URoot> },
    Classify(PhaseVerdict),
    Simulate(SimulationSummary),
    Speed { threshold: SpeedThreshold, summary: SimulationSummary, curve: Vec<RatePoint> },
    Sweep(Vec<PhaseVerdict>),
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskEntry {
    pub id: String,
    pub kind: &'static str,
    pub status: &'static str,
    pub error: Option<String>,
    pub files: Vec<String>,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub seed: u64,
    pub model_id: String,
    pub law_id: String,
    pub versions: Versions,
    pub workers: Option<String>,
    pub wall_seconds: f64,
    pub warnings: Vec<String>,
    pub tasks: Vec<TaskEntry>,
    pub files: Vec<FileEntry>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub bmc_core: &'static str,
    pub bmc_cli: &'static str,
}

pub struct RunReport {
    pub manifest: Manifest,
    pub outputs: Vec<(String, TaskOutput)>,
}

impl RunReport {
    pub fn failed(&self) -> bool {
        self.manifest.tasks.iter().any(|t| t.error.is_some())
    }
}

/// Runs every task in order, writing `<id>.csv` files, plot data under
/// `plot/` and `manifest.json` into `out`. Task failures are recorded and
/// the remaining tasks still run.
pub fn run_scenario(s: &Scenario, out: &Path) -> anyhow::Result<RunReport> {
    fs::create_dir_all(out)?;
    let start = Instant::now();
    let mut tasks = Vec::new();
    let mut outputs = Vec::new();
    let mut written = Vec::new();
    for task in &s.tasks {
        let t0 = Instant::now();
        let result = execute(s, task).and_then(|o| {
            let files = write_task(s, task, &o, out)?;
            Ok((o, files))
        });
        let (status, error, files) = match result {
            Ok((o, files)) => {
                outputs.push((task.id.clone(), o));
                ("ok", None, files)
            }
            Err(e) => ("error", Some(format!("{e:#}")), Vec::new()),
        };
        written.extend(files.iter().cloned());
        tasks.push(TaskEntry {
            id: task.id.clone(),
            kind: task.kind.tag().as_str(),
            status,
            error,
            files: files.iter().map(|p| relative(out, p)).collect(),
            wall_seconds: t0.elapsed().as_secs_f64(),
        });
    }
    written.extend(emit_plotdata(s, &outputs, &out.join("plot"))?);
    let files = written
        .iter()
        .map(|p| digest(p).map(|(sha256, bytes)| FileEntry { path: relative(out, p), sha256, bytes }))
        .collect::<std::io::Result<Vec<_>>>()?;
    let manifest = Manifest {
        seed: s.seed,
        model_id: s.model.id.clone(),
        law_id: s.law_id().to_string(),
        versions: Versions { bmc_core: bmc_core::VERSION, bmc_cli: env!("CARGO_PKG_VERSION") },
        workers: std::env::var(bmc_core::engine::WORKERS_ENV).ok(),
        wall_seconds: start.elapsed().as_secs_f64(),
        warnings: s.warnings.clone(),
        tasks,
        files,
    };
    fs::write(out.join(MANIFEST), serde_json::to_string_pretty(&manifest)?)?;
    Ok(RunReport { manifest, outputs })
}

fn relative(base: &Path, p: &Path) -> String {
    p.strip_prefix(base).unwrap_or(p).to_string_lossy().replace('\\', "/")
}

fn digest(p: &Path) -> std::io::Result<(String, u64)> {
    let bytes = fs::read(p)?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Computes one task without touching the file system.
pub fn execute(s: &Scenario, task: &Task) -> anyhow::Result<TaskOutput> {
    let model = &s.model.model;
    Ok(match &task.kind {
        TaskKind::Spectral(t) => TaskOutput::Spectral(spectral_rows(&s.model.id, model, t)?),
        TaskKind::Series(t) => {
            let green = green_coefficients(model, &t.center, t.order, t.radius)?;
            let first = first_return_coefficients(model, &t.center, t.order, t.radius)?;
            let root = if t.root { Some(rho_from_u(&first)?) } else { None };
            let mut rows = green.rows(&s.model.id);
            rows.extend(first.rows(&s.model.id));
            TaskOutput::Series { rows, root }
        }
        TaskKind::Classify(t) => TaskOutput::Classify(
            analytic_verdict(model, &t.law.law, t.tol)?.with_ids(&s.model.id, &t.law.id),
        ),
        TaskKind::Simulate(t) => {
            let law = &s.law.as_ref().expect("validated").law;
            TaskOutput::Simulate(match t.estimator {
                Estimator::FrozenMean => estimate_frozen_mean(model, law, &t.start, &t.sim)?,
                Estimator::AlphaProxy => {
                    estimate_alpha_proxy(model, law, &t.start, &AlphaParams { k: t.k, sim: t.sim })?
                }
                Estimator::ReturnTime => estimate_return_time(model, law, &t.start, &t.sim)?,
                Estimator::MinSpeed => estimate_min_speed(model, law, t.sim.horizon, &t.sim)?,
            })
        }
        TaskKind::Speed(t) => speed(s, t)?,
        TaskKind::Sweep(t) => TaskOutput::Sweep(
            t.points
                .iter()
                .map(|p| Ok(analytic_verdict(model, &p.law.law, p.tol)?.with_ids(&s.model.id, &p.law.id)))
                .collect::<anyhow::Result<Vec<_>>>()?,
        ),
    })
}

fn spectral_rows(model_id: &str, model: &KernelModel, t: &SpectralTask) -> anyhow::Result<Vec<SpectralRow>> {
    let opts = SpectralOptions { tol: t.tol, radius: t.max_radius, ..SpectralOptions::default() };
    let center = t.center.to_string();
    let row = |e: &bmc_core::spectral::SpectralEstimate, variant: &'static str| SpectralRow {
        model_id: model_id.to_string(),
        center: center.clone(),
        variant,
        radius: e.radius,
        value: e.value,
        lower_bound: e.lower_bound,
        residual: e.residual,
        states: e.states,
    };
    if t.variant == Variant::Rho {
        let seq = rho_truncation_sequence(model, &t.center, t.max_radius, &opts).map_err(|e| e.source)?;
        return Ok(seq.iter().map(|e| row(e, "rho")).collect());
    }
    let report = rho_variant(model, t.variant, &opts)?;
    let mut rows: Vec<SpectralRow> = report.sequence.iter().map(|e| row(e, t.variant.as_str())).collect();
    rows.push(row(&report.estimate, t.variant.as_str()));
    Ok(rows)
}

fn speed(s: &Scenario, t: &SpeedTask) -> anyhow::Result<TaskOutput> {
    let model = &s.model.model;
    let law = &s.law.as_ref().expect("validated").law;
    let m = law.constant_mean().expect("validated");
    let rf = RateFunction::new(StepLaw::from_model(model)?);
    let threshold = speed_threshold(&rf, m)?;
    let summary = estimate_min_speed(model, law, t.n, &t.sim)?;
    let curve = rate_curve(&rf, t.grid.lo, t.grid.hi, t.grid.step)?;
    Ok(TaskOutput::Speed { threshold, summary, curve })
}

fn write_task(s: &Scenario, task: &Task, o: &TaskOutput, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let path = out.join(format!("{}.csv", task.id));
    let mut files = vec![path.clone()];
    match o {
        TaskOutput::Spectral(rows) => write_csv(&path, rows)?,
        TaskOutput::Series { rows, root } => {
            write_csv(&path, rows)?;
            if let (Some(r), TaskKind::Series(t)) = (root, &task.kind) {
                let root_path = out.join(format!("{}_root.csv", task.id));
                write_csv(
                    &root_path,
                    &[RootRow {
                        model_id: s.model.id.clone(),
                        center: t.center.to_string(),
                        order: t.order,
                        z_star: r.z_star,
                        rho: r.estimate.value,
                        exact_coefficients: 2 * t.radius as u64 >= t.order as u64 * s.model.model.max_jump() as u64,
                    }],
                )?;
                files.push(root_path);
            }
        }
        TaskOutput::Classify(v) => write_csv(&path, &[v.row()])?,
        TaskOutput::Simulate(summary) => write_csv(&path, &summary.records(&s.model.id, s.law_id()))?,
        TaskOutput::Speed { threshold, summary, .. } => {
            let q = summary.get("quantile_05").expect("speed estimate");
            let get = |name| summary.get(name).map(|e| e.value).unwrap_or(f64::NAN);
            write_csv(
                &path,
                &[SpeedRow {
                    model_id: s.model.id.clone(),
                    law_id: s.law_id().to_string(),
                    m: s.law.as_ref().and_then(|l| l.law.constant_mean()).unwrap_or(f64::NAN),
                    n: summary.horizon,
                    analytic_speed: threshold.value,
                    analytic_clamped: threshold.clamped,
                    empirical_quantile_05: q.value,
                    quantile_ci_low: q.ci_low,
                    quantile_ci_high: q.ci_high,
                    empirical_mean: get("mean"),
                    pruned_fraction: get("pruned_fraction"),
                    replicas: summary.replicas,
                    seed: summary.seed,
                }],
            )?;
        }
        TaskOutput::Sweep(vs) => {
            let rows: Vec<VerdictRow> = vs.iter().map(|v| v.row()).collect();
            write_csv(&path, &rows)?;
        }
    }
    Ok(files)
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
