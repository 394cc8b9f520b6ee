//! Stationary equilibrium of a commodity market with a dominant producer
//! (cartel), a competitive fringe and competitive storage arbitrageurs.
//!
//! The cartel's value `U(k, z)` and the arbitrage-free price `p(k, z)` solve a
//! coupled Hamilton-Jacobi-Bellman / transport system on storage level
//! `k in [k_min, k_max]` and fringe output `z in [z_min, z_max]`, with state
//! constraint boundary conditions at empty and full storage. The crate
//! provides the monotone finite-difference scheme, an explicit long-time
//! solver, and the downstream analysis (policy, trajectories, limit cycle,
//! invariant measure, boundary asymptotics).

pub mod analysis;
pub mod config;
pub mod error;
pub mod field;
pub mod flux;
pub mod grid;
pub mod hamiltonian;
pub mod io;
pub mod oned;
pub mod params;
pub mod scheme;
pub mod solver;
pub mod validation;

pub use error::{Error, Result};
pub use field::FieldPair;
pub use grid::Grid2D;
pub use params::ModelParams;
pub use solver::{SolveReport, SolveSettings};
