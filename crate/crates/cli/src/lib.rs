//! Library half of the `dglm` binary, kept separate so tests can drive the
//! commands without spawning a process.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
