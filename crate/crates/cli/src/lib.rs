//! Command-line front end: instance generation, solving, verification,
//! robust prices, gross-substitutes checks and oracle-call benchmarks.

pub mod commands;
pub mod error;
pub mod format;

pub use commands::{run, BUDGET_VAR, EXIT_ERROR, EXIT_NEGATIVE, EXIT_OK};
pub use error::{CliError, Result};
pub use format::{parse_instance, parse_rational, parse_result, InstanceFile, ResultFile};
