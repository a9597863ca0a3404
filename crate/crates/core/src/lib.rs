pub mod ansatz;
pub mod circuit;
pub mod cost;
pub mod error;
pub mod hamiltonian;
pub mod linalg;
pub mod mps;
pub mod optimizer;
pub mod pipeline;
pub mod statevector;
pub mod trotter;

pub use error::{Error, Result};
pub use mps::{Mps, TruncationPolicy};
