//! Byzantine-resilient, information-theoretically private secure aggregation
//! for federated learning.

pub mod adversary;
pub mod config;
pub mod error;
pub mod field;
pub mod fl;
pub mod lcc;
pub mod net;
pub mod protocol;
pub mod quant;
pub mod relu;
pub mod rng;
pub mod rs;
pub mod vss;
pub mod wire;

pub use error::{Error, Result};
pub use field::{FieldElement, FieldPoly, PrimeField};
