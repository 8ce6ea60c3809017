//! Error type shared by every module of the library.

use thiserror::Error;

/// Errors produced by construction, factorization and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("permutation must have at least one element")]
    Empty,

    #[error("sequence of length {len} is not a permutation of 1..={len}: {reason}")]
    NotAPermutation { len: usize, reason: String },

    #[error("size mismatch: left operand has {left} elements, right operand has {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("element {element} out of range 1..={n}")]
    OutOfRange { element: usize, n: usize },

    #[error("subset must be non-empty")]
    EmptySubset,

    #[error("range {lo}..={hi} invalid for structure over 1..={n}")]
    BadRange { lo: usize, hi: usize, n: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("malformed tree: {0}")]
    MalformedTree(String),

    #[error("tree has {leaves} leaves but {expected} were expected")]
    LeafCountMismatch { leaves: usize, expected: usize },

    #[error("node with {children} children carries a permutation of size {perm}")]
    ArityMismatch { children: usize, perm: usize },

    #[error("permutation is not separable; smallest non-mergeable stack has {stack} intervals")]
    NotSeparable { stack: usize },

    #[error("delayed tree is not well formed: {0}")]
    NotWellFormed(String),

    #[error("induced grandchild relation is not a total order: elements {a}, {b}, {c} form a cycle")]
    NotTotalOrder { a: usize, b: usize, c: usize },

    #[error("interval set {set} is an order-2 interval; no outside element splits it")]
    NoOutsideSplit { set: String },

    #[error("partition parts must be disjoint and non-empty")]
    BadPartition,

    #[error("partition contains a mixed pair of parts ({a}, {b})")]
    MixedPairFound { a: usize, b: usize },

    #[error("search space of {estimate} divisions exceeds cap {cap}")]
    CapExceeded { estimate: u128, cap: u128 },

    #[error("oracle supports n <= {cap}, got n = {n}")]
    OracleCap { n: usize, cap: usize },

    #[error("bound parameter k = {k} must be at least 2")]
    BadBound { k: usize },

    #[error("input is not {k}-almost-mixed-free as claimed: {detail}")]
    NotAlmostMixedFree { k: usize, detail: String },

    #[error("input contains the forbidden pattern at positions {positions:?}")]
    PatternPresent { positions: Vec<usize> },

    #[error("certificate invalid: {0}")]
    BadCertificate(String),

    #[error("graph error: {0}")]
    Graph(String),
}

pub type Result<T> = std::result::Result<T, Error>;
