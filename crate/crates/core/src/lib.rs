//! Point cloud denoising along straight, constant-velocity flows.
//!
//! Noisy points are modelled as intermediate states on a straight line
//! between a high-noise variant of a surface patch and its clean
//! counterpart. A stack of coupled graph-network velocity modules infers a
//! constant per-point velocity that transports patch points back towards
//! the surface, and a distance head produces a scalar in (0,1) that scales
//! the Euler steps so points converge instead of overshooting.
//!
//! The crate is organized around the pipeline:
//!
//! - [`geometry`]: clouds, kNN queries, farthest point sampling, patch
//!   extraction/normalization and stitching filtered patches back together.
//! - [`nn`]: a minimal dense/graph network substrate with exact
//!   reverse-mode gradients, Adam, and a binary model codec.
//! - [`flow`]: state interpolation, the coupled Euler integrator, and
//!   trajectory diagnostics.
//! - [`train`]: sample synthesis and the three-stage optimization
//!   (single-module pretraining, coupled finetuning, distance calibration).
//! - [`metrics`]: Chamfer distance, analytic point-to-surface error, and
//!   the noise generators used for evaluation.
//! - [`shapes`]: procedural clean-surface samplers for training and
//!   evaluation.
//!
//! Everything is `f64`, single-threaded and bitwise deterministic for a
//! given seed. The crate is `no_std`-compatible (with `alloc`); the `std`
//! feature (default) only adds wall-clock timing in stage reports.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod error;
pub(crate) mod fx;
pub mod geometry;
pub mod mat;
pub mod metrics;
pub mod nn;
pub mod shapes;
pub(crate) mod vec3;

pub mod flow;
pub mod train;

pub use error::Error;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Deterministic RNG used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate-wide RNG from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
