//! Complexity-regularized Gaussian-mixture quantization for nonlinear
//! dimensionality reduction.
//!
//! A codebook of Gaussians is fitted to high-dimensional samples with an
//! entropy-constrained Lloyd descent whose distortion carries a kernel-weighted
//! relative-entropy penalty between neighbouring components. The fitted
//! codebook then drives:
//!
//! - [`nldr`]: a hard-partition local-PCA encoder/decoder pair,
//! - [`manifold`]: a chart atlas, a smooth partition of unity and the
//!   Riemannian metric it induces on the reduced coordinates,
//! - [`diagnostics`]: Monte-Carlo divergence estimates, the index of
//!   resolvability and the associated finite-sample loss bounds.
//!
//! [`synth`] provides Gaussian chart-embedding generators with an exactly
//! computable density for testing all of the above.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod codebook;
pub mod diagnostics;
mod error;
pub mod gaussmodel;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod lloyd;
pub mod manifold;
pub mod nldr;
pub mod synth;

pub use codebook::{Codebook, Component};
pub use error::{Error, Result};
pub use gaussmodel::GaussianModel;
pub use kernels::{BumpProfile, KernelSpec};
pub use lloyd::{fit, FitConfig, FitReport, InitScheme};

/// A point in the ambient or reduced space.
pub type Point = nalgebra::DVector<f64>;

/// The seeded generator used by every sampling routine in the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's deterministic generator from a user seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
