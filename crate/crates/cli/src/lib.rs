//! Command-line driver for shortcut-forge scenarios: run a configured
//! protocol, compare two runs and sweep a configuration parameter.

pub mod artifacts;
pub mod compare;
pub mod config;
pub mod error;
pub mod scenario;
pub mod sweep;
