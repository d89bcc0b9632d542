//! Scenario runner for branching Markov chain experiments.
//!
//! A scenario names one model, one offspring law and a list of tasks. Each
//! task writes a CSV, plot data lands in `plot/`, and `manifest.json` lists
//! every file with its SHA-256 digest.

pub mod plot;
pub mod run;
pub mod scenario;

pub use plot::emit_plotdata;
pub use run::{execute, run_scenario, Manifest, RunReport, TaskOutput, MANIFEST};
pub use scenario::{parse_scenario, parse_scenario_with, Overrides, Scenario, ScenarioError, Task, TaskKind, TaskKindTag};
