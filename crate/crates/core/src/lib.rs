//! Exact and Monte-Carlo tools for cokernels and coranks of products of
//! random matrices over the integers and the p-adics.

pub mod arith;
pub mod error;
pub mod hl;
pub mod limits;
pub mod matrix;
pub mod montecarlo;
pub mod partition;
pub mod pgroup;
pub mod seq;

pub use error::{Error, Result};
pub use partition::Partition;
pub use pgroup::GroupType;
