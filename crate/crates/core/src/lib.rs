//! Optimal alignments between object-centric process executions and
//! accepting object-centric Petri nets.

pub mod alignment;
pub mod bench;
pub mod dot;
pub mod engine;
pub mod flatten;
pub mod generate;
pub mod ids;
pub mod model;
pub mod oracle;
pub mod petri;
pub mod product;
pub mod search;
pub mod synth;
