//! Independent correctness machinery: a dense-matrix operator oracle,
//! manufactured-solution convergence studies and twin-run experiments.

mod mms;
mod oracle;
mod twin;

pub use mms::{mms_level, mms_run, ConvergenceReport, MmsConfig, MmsLevel, MmsProfile, MmsSolution, FIELD_NAMES, MIN_FINEST_ORDER};
pub use oracle::{dense_oracle_check, OracleCheck, OracleReport, MAX_ORACLE_CELLS};
pub use twin::{twin_run, twin_runs, TwinConfig, TwinRunReport};
