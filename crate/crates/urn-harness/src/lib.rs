//! Seeded Monte Carlo harness: exact small-instance enumeration, replicate
//! statistics, tail-bound and coverage checks, asymptotic tables and the
//! acceptance suite.

pub mod acceptance;
pub mod enumerate;
pub mod experiments;
pub mod mc;
pub mod stats;

pub use acceptance::{run_all, run_criterion, AcceptanceConfig, CriterionOutcome};
pub use stats::Verdict;
