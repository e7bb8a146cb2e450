//! Equitable colourings of dense random graphs: first and second moments of
//! the number of equitable colourings, the `n_j` subsequence, exact solvers
//! and seeded sampling.

pub mod cli;
pub mod error;
pub mod graphs;
pub mod moments;
pub mod numerics;
pub mod partitions;
pub mod secondmoment;
pub mod solver;
pub mod subsequence;

pub use error::{Error, Result};
