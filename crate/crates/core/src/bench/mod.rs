//! Experiment runner: trace → oracle → sketch → report → metrics, single
//! runs and parameter sweeps, with CSV/JSON output.

mod config;
mod emit;
mod runner;

pub use config::{Algorithm, ExperimentConfig, TraceSource};
pub use emit::{emit, to_csv, OutputFormat, CSV_HEADER};
pub use runner::{
    build_sketch, build_trace, run_grid, run_lambda_sweep, run_memory_sweep, run_single, AnySketch,
    ResultRow, DEFAULT_LAMBDAS, DEFAULT_MEMORIES_KB,
};
