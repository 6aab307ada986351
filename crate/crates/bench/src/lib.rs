//! Benchmark suites: synthetic instance generation, scaling transforms, the
//! suite runner and the offline Monte-Carlo coverage simulation.

pub mod generate;
pub mod montecarlo;
pub mod run;
pub mod transform;

pub use generate::{gen_instance, gen_synthetic_suite, write_suite, SpecError, SuiteInstance, SuiteMetadata, SuiteSpec};
pub use montecarlo::{monte_carlo_coverage, read_attempts, write_attempts, AttemptRow, McConfig, McReport};
pub use run::{coverage, discover, run_suite, CoverageRow, PlannerConfig, ResultWriter, RunOptions, RunRecord, SuiteEntry};
pub use transform::{apply_transform, Transform};
