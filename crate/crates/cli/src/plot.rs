//! Tidy plot-ready CSVs, one observation per row.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::run::{write_csv, TaskOutput};
use crate::scenario::Scenario;

#[derive(Serialize)]
struct RadiusPoint<'a> {
    task: &'a str,
    variant: &'static str,
    radius: Option<u32>,
    rho: f64,
}

#[derive(Serialize)]
struct PhasePoint<'a> {
    task: &'a str,
    m: f64,
    phase: &'static str,
    band: i32,
}

#[derive(Serialize)]
struct RatePoint<'a> {
    task: &'a str,
    a: f64,
    rate: f64,
}

#[derive(Serialize)]
struct TailPoint<'a> {
    task: &'a str,
    n: u64,
    survival: f64,
}

#[derive(Serialize)]
struct SpeedPoint<'a> {
    task: &'a str,
    n: u64,
    mean: f64,
    quantile_05: f64,
}

/// Band index of a phase in the diagram, `-1` when undecided.
fn band(phase: &str) -> i32 {
    match phase {
        "Transient" => 0,
        "WeaklyRecurrent" => 1,
        "StronglyRecurrent" | "PositiveRecurrent" => 2,
        _ => -1,
    }
}

/// Writes `rho_vs_radius.csv`, `phase_diagram.csv`, `rate_function.csv`,
/// `return_tail.csv` and `speed_trace.csv` for the outputs that carry them.
pub fn emit_plotdata(
    _s: &Scenario,
    outputs: &[(String, TaskOutput)],
    dir: &Path,
) -> anyhow::Result<Vec<PathBuf>> {
    let mut radius = Vec::new();
    let mut phases = Vec::new();
    let mut rates = Vec::new();
    let mut tails = Vec::new();
    let mut speeds = Vec::new();
    for (id, o) in outputs {
        match o {
            TaskOutput::Spectral(rows) => radius.extend(
                rows.iter().map(|r| RadiusPoint { task: id, variant: r.variant, radius: r.radius, rho: r.value }),
            ),
            TaskOutput::Classify(v) => {
                let phase = v.phase.as_str();
                phases.push(PhasePoint { task: id, m: v.m.unwrap_or(f64::NAN), phase, band: band(phase) });
            }
            TaskOutput::Sweep(vs) => phases.extend(vs.iter().map(|v| {
                let phase = v.phase.as_str();
                PhasePoint { task: id, m: v.m.unwrap_or(f64::NAN), phase, band: band(phase) }
            })),
            TaskOutput::Speed { summary, curve, .. } => {
                rates.extend(curve.iter().map(|p| RatePoint { task: id, a: p.a, rate: p.rate }));
                speeds.extend(summary.speed_trace.iter().map(|p| SpeedPoint {
                    task: id,
                    n: p.n,
                    mean: p.mean,
                    quantile_05: p.quantile_05,
                }));
            }
            TaskOutput::Simulate(summary) => {
                tails.extend(summary.tail.iter().map(|p| TailPoint { task: id, n: p.n, survival: p.survival }));
                speeds.extend(summary.speed_trace.iter().map(|p| SpeedPoint {
                    task: id,
                    n: p.n,
                    mean: p.mean,
                    quantile_05: p.quantile_05,
                }));
            }
            TaskOutput::Series { .. } => {}
        }
    }
    let mut files = Vec::new();
    let mut emit = |name: &str, write: &dyn Fn(&Path) -> anyhow::Result<()>, empty: bool| -> anyhow::Result<()> {
        if !empty {
            let path = dir.join(name);
            write(&path)?;
            files.push(path);
        }
        Ok(())
    };
    emit("rho_vs_radius.csv", &|p| write_csv(p, &radius), radius.is_empty())?;
    emit("phase_diagram.csv", &|p| write_csv(p, &phases), phases.is_empty())?;
    emit("rate_function.csv", &|p| write_csv(p, &rates), rates.is_empty())?;
    emit("return_tail.csv", &|p| write_csv(p, &tails), tails.is_empty())?;
    emit("speed_trace.csv", &|p| write_csv(p, &speeds), speeds.is_empty())?;
    Ok(files)
}
