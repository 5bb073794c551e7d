//! Kernel-based conditional independence testing.
//!
//! The test regresses kernel embeddings of X and of Y on Z, forms the Gram
//! matrices of the centred residuals, and compares the quadratic statistic
//! T_n against a weighted chi-square null distribution estimated from the
//! eigenvalues of the residual product matrix.
//!
//! Everything reduces to dense Gram-matrix algebra: both regressors (kernel
//! ridge regression and output-kernel random forests) are represented by an
//! n-by-n weight matrix W with fitted values F̂(z_i) = Σ_j W_ij φ(x_j), so the
//! engine never materialises feature vectors.
//!
//! Modules:
//! - [`data`]: datasets, CSV ingestion, standardization.
//! - [`kernels`]: kernel families, Gram matrices, median heuristic, random
//!   Fourier features.
//! - [`krr`]: RKHS-valued kernel ridge regression with leave-one-out tuning.
//! - [`forest`]: output-kernel random forests with variance-reduction splits.
//! - [`engine`]: residual Grams, the statistic, the test drivers.
//! - [`nulldist`]: tail probabilities of weighted sums of chi-square(1).
//! - [`simbench`]: scenario generators and the rejection-rate campaign runner.

pub mod data;
pub mod engine;
pub mod error;
pub mod forest;
pub mod kernels;
pub mod krr;
pub mod nulldist;
pub mod seed;
pub mod simbench;

mod linalg;

pub use error::{Error, Result};
