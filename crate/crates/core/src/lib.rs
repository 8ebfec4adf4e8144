//! Scheduling jobs with family setups and run-length windows on parallel
//! machines: data model, exact and heuristic solvers, instance generation
//! and benchmark metrics.

pub mod bench;
pub mod heuristic;
pub mod instgen;
pub mod model;
pub mod oracle;
pub mod solver;
