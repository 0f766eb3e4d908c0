//! Library side of the `normkit` command: config parsing, run/sweep
//! execution, metrics emission, and curve rendering, kept separate from the
//! binary so the whole pipeline is testable in-process.

#![forbid(unsafe_code)]

pub mod config;
pub mod report;
pub mod runner;
pub mod svg;
