//! Experiment harness, file formats and command-line plumbing around
//! [`hmm_core`].

pub mod experiments;
pub mod functional;
pub mod output;
pub mod problem;
pub mod report;
pub mod stats;
pub mod validation;

pub use hmm_core;
