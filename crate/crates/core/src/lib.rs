//! Shallow ReLU^k network solutions of elliptic Dirichlet problems.
//!
//! The boundary condition is enforced by a sequence of penalized problems
//! (augmented-Lagrangian Uzawa iteration); each penalized problem is solved
//! by the orthogonal greedy algorithm over a finite grid of ridge neurons.
//!
//! - [`problem`]: model problems and manufactured solutions
//! - [`quadrature`]: composite Gauss rules on the box and its boundary
//! - [`dictionary`]: ReLU^k neurons and the candidate grid
//! - [`forms`]: energy form, load functional, Gram assembly
//! - [`oga`]: greedy selection and Galerkin projection
//! - [`uzawa`]: penalty parameter choice, multiplier updates, full pipeline
//! - [`metrics`]: error norms and rates
//! - [`config`] / [`experiment`]: run configuration, sweeps and output files

pub mod config;
pub mod dictionary;
pub mod error;
pub mod experiment;
pub mod forms;
pub mod linalg;
pub mod metrics;
pub mod oga;
pub mod problem;
pub mod quadrature;
pub mod scan;
pub mod uzawa;

pub use error::{Error, Result};
