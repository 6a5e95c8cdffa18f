//! Variational Monte Carlo engine for 1D quantum spin chains.
//!
//! Ground states and frequency-resolved Green's functions of the J1-J2
//! Heisenberg chain are encoded as complex-parameter restricted Boltzmann
//! machines. Ground states are optimized by stochastic reconfiguration;
//! correction vectors `(z - H)^-1 A|psi>` are solved by natural gradient
//! descent on the Fubini-Study angle, and the resulting spectra are
//! regularized by combining the `Q` and `Q^dagger` solutions so that
//! first- and second-order representation errors cancel. An exact
//! diagonalization oracle validates every stage at small sizes.

pub mod basis;
pub mod cg;
pub mod checkpoint;
pub mod config;
pub mod cv;
pub mod ed;
pub mod greens;
pub mod ground_state;
pub mod model;
pub mod pipeline;
pub mod rbm;
pub mod sampler;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("site index {index} out of range for chain of length {length}")]
    SiteOutOfRange { index: usize, length: usize },

    #[error("sector basis has {size} states, exceeding the oracle cap of {cap}")]
    OracleCapExceeded { size: usize, cap: usize },

    #[error("insufficient samples: got {got}, need at least {need}")]
    InsufficientSamples { got: usize, need: usize },

    #[error("{tally} of {total} estimator evaluations were rejected (limit {limit})")]
    TooManyRejectedSamples {
        tally: usize,
        total: usize,
        limit: usize,
    },

    #[error("degenerate estimate: {0}")]
    DegenerateEstimate(String),

    #[error("conjugate gradient failed to converge twice (residual {residual:.3e} after {iterations} iterations)")]
    CgFailure { residual: f64, iterations: usize },

    #[error("optimization diverged: energy {energy:.6} from initial {initial:.6} at step {step}")]
    Diverged { energy: f64, initial: f64, step: usize },

    #[error("correction vector start is orthogonal to the source (x = {x:.3e})")]
    OrthogonalStart { x: f64 },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("non-finite value produced in {0}")]
    NonFinite(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
