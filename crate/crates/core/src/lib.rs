//! Kernel memory networks.
//!
//! Hetero- and auto-associative memories whose weights come from training
//! every neuron as a kernel classifier (maximum margin) or a kernel
//! interpolator (minimum norm). The crate covers:
//!
//! * pattern ensembles on the hypercube, in Gaussian space and on the sphere ([`patterns`]),
//! * kernels, including the sparse distributed memory (SDM) kernels ([`kernels`]),
//! * explicit feature maps ([`features`]),
//! * learning rules: hard-margin dual, Kernel-Adatron, stochastic batch
//!   perceptron, one-shot Hebbian and (generalized) pseudoinverse ([`training`]),
//! * recall dynamics and attractor certification ([`dynamics`]),
//! * closed-form noise and capacity predictions ([`theory`]),
//! * seeded Monte Carlo experiments with CSV/JSON reports ([`experiments`], [`io`]).
//!
//! All randomness is derived from explicit `u64` seeds through [`rng`], so
//! every result is reproducible regardless of thread count.

pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod features;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod patterns;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod theory;
pub mod training;

pub use error::{Error, Result};
pub use features::FeatureMap;
pub use kernels::KernelSpec;
pub use patterns::{Geometry, NoiseSpec, PatternSet};
pub use training::{NetworkMode, SolverConfig, TrainedNetwork};

/// `sgn` with the convention `sgn(0) = +1`.
#[inline]
pub fn sgn(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}
