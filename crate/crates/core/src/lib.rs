//! Teleportation of a qubit through a two-qubit decoherence-free subspace
//! when the sender's pair and the receiver's qubit dephase under
//! non-Markovian baths.

pub mod channels;
pub mod error;
pub mod experiments;
pub mod metrics;
pub mod noise;
pub mod optimizer;
pub mod protocol;
pub mod qlinalg;
pub mod quadrature;

pub use error::{Error, Result};
