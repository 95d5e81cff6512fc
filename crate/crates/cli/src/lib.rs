//! Library side of the experiment CLI: property-suite verification, training
//! orchestration, linear probing, hyperparameter sweeps, and
//! feature-distribution analysis, all emitting deterministic CSV reports.

pub mod analyze;
pub mod probe;
pub mod report;
pub mod runner;
pub mod specfile;
pub mod sweep;
pub mod verify;
