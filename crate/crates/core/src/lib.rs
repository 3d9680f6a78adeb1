//! Self-consistency verification of long-form model generations.

pub mod annotation;
pub mod consistency;
pub mod eval;
pub mod gateway;
pub mod metrics;
pub mod parallel;
pub mod text;

/// Consistency scores and the statistics computed over them.
pub type Score = f64;
