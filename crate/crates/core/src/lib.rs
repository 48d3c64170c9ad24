//! Stochastic Mirror-Prox (SMP) for stochastic monotone variational inequalities.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] – counter-based random streams used by every stochastic oracle.
//! * [`symmat`] – block-diagonal symmetric matrices, Jacobi eigensolver, matrix entropy map.
//! * [`geometry`] – distance-generating functions, Bregman divergences and prox-mappings
//!   (Euclidean ball, simplex, spectahedron and their product).
//! * [`vi`] – problems, stochastic oracles and error measures.
//! * [`solver`] – the SMP iteration, the robust mirror SA baseline and bound calculators.
//! * [`composite`] – stochastic composite / matrix minimax builders and semidefinite feasibility scaling.
//! * [`eigopt`] – eigenvalue minimisation over the simplex with a randomized oracle.
//! * [`instance`] – instance generators and the JSON instance format.
//! * [`bench`] – experiment configuration, replication, statistics and CSV/JSON output.

pub mod bench;
pub mod composite;
pub mod eigopt;
pub mod error;
pub mod geometry;
pub mod instance;
pub mod rng;
pub mod solver;
pub mod symmat;
pub mod vi;

pub use error::{Error, Result};
pub use geometry::{Point, ProxSetup};
pub use rng::RandomStream;
pub use symmat::{BlockStructure, BlockSymMatrix, SymMatrix};

/// Library version echoed into experiment sidecars.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
