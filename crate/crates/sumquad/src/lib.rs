//! Optimal summation and integration under three models of computation.
//!
//! This crate implements and empirically verifies optimal algorithms for two
//! problems: computing the mean of a finite sequence, and integrating a
//! function over the unit cube. Each problem is attacked in three settings —
//! deterministic, randomized (Monte Carlo), and quantum (simulated at the
//! query level) — and the measured worst-case errors are fitted against the
//! known optimal convergence exponents.
//!
//! Module map:
//!
//! - [`problem`] — sequences, function classes (`L_p` balls, Hölder, Sobolev),
//!   evaluation-counting function handles, and fooling families used as
//!   empirical surrogates for worst-case suprema.
//! - [`classical`] — deterministic partial means, Mathé's optimal randomized
//!   subset estimator, plain and truncated Monte Carlo, composite
//!   Gauss–Legendre quadrature, and control-variate Monte Carlo integration.
//! - [`quantum`] — executable semantics of the quantum query model: states,
//!   queries, gate lists, algorithm tuples, measurement, and exact output
//!   distributions.
//! - [`qae`] — amplitude estimation for quantum mean computation and the
//!   interpolate-then-quantum-sum integration scheme built on it.
//! - [`oracles`] — independent exact verifiers: closed-form worst-case errors
//!   for small instances and empirical worst-case drivers.
//! - [`harness`] — experiment sweeps, log-log exponent fitting, CSV output,
//!   and the claimed-vs-measured comparison table.

pub mod classical;
pub mod harness;
pub mod oracles;
pub mod problem;
pub mod qae;
pub mod quantum;
pub mod rng;
pub mod util;

use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A precondition on an argument was violated.
    InvalidArgument(String),
    /// An evaluation or query budget is too small for the requested method.
    BudgetTooSmall { needed: u64, got: u64 },
    /// The requested combination has no implemented algorithm.
    NotImplemented(String),
    /// Dense simulation would exceed the qubit cap.
    QubitCapExceeded { qubits: usize, cap: usize },
    /// A query's value encoding produced a word outside its register range.
    InvalidBeta { value: u64, width: usize },
    /// A dense operator failed the unitarity check (max deviation reported).
    NotUnitary(f64),
    /// Operator and state dimensions do not match.
    DimensionMismatch { expected: usize, got: usize },
    /// A fooling-family member failed its class membership check.
    ClassMembership(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::BudgetTooSmall { needed, got } => {
                write!(f, "budget too small: need at least {needed}, got {got}")
            }
            Error::NotImplemented(msg) => write!(f, "not implemented: {msg}"),
            Error::QubitCapExceeded { qubits, cap } => {
                write!(f, "dense simulation of {qubits} qubits exceeds cap {cap}")
            }
            Error::InvalidBeta { value, width } => {
                write!(f, "beta produced {value}, outside the {width}-bit value register")
            }
            Error::NotUnitary(dev) => write!(f, "matrix is not unitary (max deviation {dev:.3e})"),
            Error::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Error::ClassMembership(msg) => write!(f, "class membership violated: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
