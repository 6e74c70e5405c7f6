//! Truncation-approximation solver for singular p-Laplacian Dirichlet
//! problems `-Delta_p u = f(x) h(u) + g(x) k(u)` on intervals and
//! rectangles, with numerical certificates for comparison, uniqueness,
//! energy thresholds and boundary behaviour.

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod expr;
pub mod linalg;
pub mod mesh;
pub mod nonlinearity;
pub mod plap;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
pub use mesh::{Field, Mesh};
pub use nonlinearity::{ProblemDocument, ProblemSpec, TruncationLevel};
pub use solver::{outer_solve, SolveReport, SolverConfig};
