//! Problem files, command dispatch and reports for the `procdisc` binary.

pub mod problem;
pub mod report;
pub mod runner;

pub use problem::{parse_problem, ClassSpec, Problem, ProblemFile, SolverSettings, SCHEMA_VERSION};
pub use report::{emit_report, Format, Report};
pub use runner::{run, Command};
