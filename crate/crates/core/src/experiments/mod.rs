//! Reproducible experiment runs with CSV reports.

mod config;
mod report;
mod runs;

pub use config::{ExperimentConfig, ExperimentKind, RadiusGridSpec, SubordinationTuple, DEFAULT_TUPLES};
pub use report::{CheckOutcome, ExperimentReport, ReportRow, CSV_COLUMNS};
pub use runs::{
    delta_exponent, run, run_convergence, run_delta_scaling, run_identity_suite, run_theorem_ratio, run_trace_decay,
    synthesis_summary, theorem_hypothesis, SynthesisSummary,
};
