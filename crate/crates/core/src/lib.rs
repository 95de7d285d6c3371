//! Diversity of permutation orders measured on the permutohedron: swap
//! distances, entropy, null models, significance tests, power bounds and
//! spectral checks.

pub mod cli;
pub mod datasets;
pub mod error;
pub mod hypothesis;
pub mod measures;
pub mod nullmodels;
pub mod permutohedron;
pub mod powerbound;
pub mod spectral;

pub use error::{Error, Result};
pub use measures::OrderDistribution;
pub use nullmodels::{NullModel, NullSampler, Score};
pub use permutohedron::{Permutation, Permutohedron};
