//! Scenario-file parsing, run orchestration and artifact emission for the
//! `zeno` command-line tool.

pub mod emit;
pub mod runner;
pub mod scenario;
