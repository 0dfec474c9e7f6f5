//! Sparse linear contextual bandits with forced-sampling Lasso policies.

pub mod diagnostics;
pub mod environment;
pub mod harness;
pub mod lasso;
pub mod policies;
pub mod streams;
