//! Estimation of conditional-independence graphs over nodes that carry
//! vector-valued attributes.
//!
//! The model is a jointly Gaussian vector stacked from per-node attribute
//! vectors. Two nodes are conditionally independent given the rest exactly
//! when the corresponding off-diagonal block of the precision matrix is
//! zero, so the graph is recovered by minimizing the negative log-likelihood
//! penalized by the sum of Frobenius norms of all precision blocks. The
//! [`solver`] module implements the blockwise proximal-descent solver with a
//! duality-gap termination test, [`screening`] decomposes the problem into
//! connected components before solving, [`select`] adds the BIC path and
//! stability selection, [`interpret`] quantifies recovered edges through
//! partial canonical correlations, and [`simgen`], [`theory`], and [`bench`]
//! provide synthetic ground truth, recovery-condition diagnostics, and the
//! simulation harness used for calibration runs.
//!
//! The crate is `no_std`-compatible (requires `alloc`; enable the `libm`
//! feature when building without `std`). File formats and the command-line
//! front end live in the companion `magnet` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod blockmat;
pub mod data;
mod error;
pub mod graph;
pub mod interpret;
pub mod layout;
pub mod rng;
pub mod screening;
pub mod select;
pub mod simgen;
pub mod solver;
pub mod theory;

#[cfg(feature = "std")]
pub mod bench;
#[cfg(feature = "std")]
pub mod par;

pub use error::{Error, Result};
pub use layout::AttributeLayout;