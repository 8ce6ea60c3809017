//! Factorization of pattern-avoiding permutations into short products of
//! separable permutations, together with the supporting machinery:
//! separating trees, delayed structured trees, mixed partitions, grid and
//! mixed minors of 0/1 matrices, and path systems of factor lists.

pub mod delayed;
pub mod error;
pub mod factor;
pub mod minor;
pub mod mixed;
pub mod pathsys;
pub mod perm;
pub mod rmq;
pub mod separable;

pub use error::{Error, Result};
pub use perm::{Biorder, Permutation};
