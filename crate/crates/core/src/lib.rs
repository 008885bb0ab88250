//! Model-order reduction toolkit for linear dynamical systems with a
//! quadratic output `y = x^T M x` (LD_QO systems).
//!
//! The crate provides:
//! - dense Lyapunov/Sylvester kernels over the real Schur form ([`linalg`]),
//! - the LD_QO model object with its LD and quadratic-bilinear rewritings
//!   and file I/O ([`systems`]),
//! - controllability and quadratic-output observability Gramians
//!   ([`gramians`]),
//! - structure-preserving balanced truncation plus the two rewriting-based
//!   baselines ([`balancing`], [`qbmor`]),
//! - H2 norms, inner products and output error bounds ([`metrics`]),
//! - signal generators, RK4 simulation, benchmark models and experiment
//!   sweeps ([`harness`]).

pub mod balancing;
pub mod error;
pub mod gramians;
pub mod harness;
pub mod systems;
pub mod linalg;
pub mod metrics;
pub mod qbmor;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::DenseMatrix;
pub use systems::{LdSystem, LdqoSystem, QbSystem};
