//! Infinite urn scheme toolkit: frequency models, exact samplers, certified
//! moment computations, concentration bounds for occupancy counts and the
//! missing mass, and Good–Turing / regular-variation estimators.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod freq_models;
pub mod moments;
pub mod quadrature;
pub mod sampler;
pub mod special;

pub use error::{Result, UrnError};
pub use freq_models::{FrequencyModel, ModelKind, RvMeta, SlowlyVarying};
