//! Benchmark cases, the simulation driver and its outputs.

pub mod cases;
pub mod config;
pub mod driver;
pub mod output;
pub mod report;

pub use cases::{build_case, build_case_dambreak_2d, build_case_dambreak_3d_obstacle, BuiltCase};
pub use config::{CaseConfig, ConfigError, PolicyKind};
pub use driver::{build_solver, run_simulation, RunError, RunOutcome};
pub use output::{gpips_plot, runtime_plot, write_snapshot, ProbeSeries};
pub use report::{compute_gpips, RunReport};
