//! Configuration parsing, artifact output and the verification suite behind
//! the `fracpme` binary.

pub mod config;
pub mod dispatch;
pub mod snapshot;
pub mod suite;

pub use config::{parse_config, parse_config_with, ConfigError, Mode, RunConfig};
pub use dispatch::{dispatch, DispatchError, Outcome, Status};
