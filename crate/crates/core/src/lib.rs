//! Adaptive surrogate-based Bayesian inversion for groundwater models.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: random log-conductivity fields, finite-difference flow and
//! transport solvers, sparse polynomial chaos and Gaussian-process
//! surrogates, surrogate-error treatments, a DREAM(ZS)-style sampler and the
//! adaptive refinement loop that ties them together. File formats and the
//! command-line driver live in the `surrogate-mcmc` crate.
//!
//! Enable the `parallel` feature to evaluate chain candidates and new design
//! points concurrently with rayon; results are identical either way because
//! every chain draws from its own random substream.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![no_std]

extern crate alloc;
#[cfg(feature = "parallel")]
extern crate std;

#[allow(unused_imports)]
mod prelude {
    pub use alloc::boxed::Box;
    pub use alloc::format;
    pub use alloc::string::{String, ToString};
    pub use alloc::vec;
    pub use alloc::vec::Vec;
    pub use num_traits::Float;
}

pub mod adaptive;
pub mod error;
pub mod fields;
pub mod forward;
pub mod gp;
pub mod linalg;
pub mod mcmc;
pub mod optim;
mod par;
pub mod pce;
pub mod rng;
pub mod strategy;
pub mod surrogate;

pub use error::{Error, Result};
