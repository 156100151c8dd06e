//! Configuration, path persistence, reports and the command-line runner for
//! the `extito-core` engine.

pub mod cli;
pub mod config;
pub mod parse;
pub mod report;
pub mod store;
