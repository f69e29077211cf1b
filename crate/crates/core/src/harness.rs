//! Experiment harness: declarative plans, resumable multi-threaded runs,
//! and cross-cell aggregation.
//!
//! A plan names circuits, schemes, palettes, and key widths; the harness
//! expands the cross product into cells, locks `seeds` instances per cell,
//! holds instance 0 out as the attack target, trains on the siblings, and
//! writes one metrics row per cell plus a plan-ordered `summary.csv`.

pub mod plan;
pub mod run;
pub mod summary;

pub use plan::{CellScheme, CellSpec, ExperimentPlan};
pub use run::{load_netlist, run_plan, RunOptions};
pub use summary::{summarize, CellRow, Summary};
