//! Front end of the `masgraph-mc` tool: single runs, the benchmark matrix,
//! and abstract-model file emission.

pub mod bench;
pub mod emit;
pub mod run;

pub use bench::{bench_matrix, markdown, write_csv, BenchSpec};
pub use run::{exit_code, run, AbstractionSource, ModelSource, Mode, QuerySource, Report, Row, RunError, RunSpec};
