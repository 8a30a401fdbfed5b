//! Run orchestration, configuration and verification for the `glvortex` CLI.

pub mod config;
pub mod error;
pub mod io;
pub mod runs;
pub mod criteria;
