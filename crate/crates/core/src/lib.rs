//! Arboreal gas on finite graphs and tori, together with its fermionic
//! H^{0|2} representation and the free (K = 0) renormalisation-group flow.
//!
//! The crate is organised bottom-up:
//!
//! - [`lattice`]: tori and weighted graphs, ghost amendment, edge-list IO.
//! - [`forest`]: forest states with dynamic connectivity and tree weights.
//! - [`exact`]: brute-force forest enumeration and exact observables.
//! - [`grassmann`]: sparse Grassmann algebra, Berezin integral, H^{0|2}
//!   expectations and fermionic Gaussian convolution.
//! - [`freefield`]: FFT Green functions on tori and Z^d reference values.
//! - [`frd`]: finite-range decomposition of the massive Green function.
//! - [`rgflow`]: bulk and observable coupling flows, zero-mode formulas.
//! - [`mcmc`]: single-edge Metropolis sampler and estimators.

pub mod error;
pub mod exact;
pub mod forest;
pub mod frd;
pub mod freefield;
pub mod grassmann;
pub mod lattice;
pub mod mcmc;
pub mod numeric;
pub mod rgflow;

pub use error::{Error, Result};
