//! Numerical laboratory for laws of large numbers over random pre-channel
//! semigroups on finite-dimensional Schatten classes.
//!
//! A *pre-channel* here is any bounded linear map on d-by-d complex matrices:
//! no trace preservation and no positivity is assumed. The crate represents
//! such maps concretely as d²-by-d² matrices acting on column-stacked
//! operators, takes finite-support distributions over them, and studies the
//! sampled products
//!
//! ```text
//! W_n(t) = exp(A_1 t/n) exp(A_2 t/n) ... exp(A_n t/n),   A_i i.i.d.
//! ```
//!
//! against the limit semigroup `exp(E[A] t)`, uniformly over a time grid and
//! measured on a fixed direction in Schatten norm. Around that sit exact
//! verifiers for the expectation identities the limit rests on (linearity,
//! adjoints, independence factorization, the variance tail bound, and the
//! diagonal second-moment expansion), an exact product-formula error, and
//! Monte-Carlo sweeps with deterministic, worker-count-independent output.
//!
//! Modules:
//! - [`operator`]: matrices with Schatten-p norms and the trace pairing.
//! - [`superop`]: pre-channels, vectorization, adjoints, induced norms.
//! - [`prob`]: finite-support ensembles, expectations, variance, sampling,
//!   and the Chebyshev-style tail bound.
//! - [`families`]: shipped ensemble generators.
//! - [`semigroup`]: matrix exponentials, time grids, sampled products, and
//!   the mean-power product error.
//! - [`experiments`]: sweeps, probes, lemma verifiers, rate fits.
//! - [`config`]: JSON configuration and its resolution.
//!
//! All randomness is counter-based: draws are pure functions of (seed, trial,
//! position) labels, so every result is reproducible bit-for-bit at any
//! parallelism level.

pub mod config;
pub mod error;
pub mod experiments;
pub mod families;
mod linalg;
pub mod operator;
pub mod prob;
pub mod semigroup;
mod stream;
pub mod superop;

pub use error::{Error, Result};
pub use operator::{Op, SchattenExponent};
pub use prob::{Ensemble, SeedSpec};
pub use semigroup::TimeGrid;
pub use superop::PreChannel;

#[cfg(test)]
pub(crate) mod testutil;
