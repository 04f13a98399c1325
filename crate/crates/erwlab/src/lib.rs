//! erwlab: a laboratory for the elephant random walk with random step sizes.
//!
//! The crate provides:
//! - [`process`]: the walk model, two distribution-equal simulators (literal
//!   history sampling and the collapsed Markov chain), and a deterministic
//!   parallel replica harness on counter-based random streams;
//! - [`exact`]: the deterministic oracle layer — coefficient sequences
//!   gamma_n, a_n, v_n, exact moment recursions, martingale variance, and
//!   the exact lattice law of the position by dynamic programming;
//! - [`metrics`]: Kolmogorov, Wasserstein-r, zeta_1 and zeta_2 distances to
//!   the standard normal (or between samples), with DKW confidence bands;
//! - [`experiments`]: convergence-rate fits, iterated-logarithm envelope
//!   scans, and superdiffusive-regime diagnostics;
//! - [`cli`]: the run configuration, file schemas and command dispatcher
//!   behind the `erwlab` binary.

pub mod cli;
pub mod exact;
pub mod experiments;
pub mod metrics;
pub mod process;
pub mod rng;
pub mod special;
pub mod util;
