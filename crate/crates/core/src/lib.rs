//! Laplace approximation fitting and total-variation error diagnostics.
//!
//! The crate fits the Gaussian (Laplace) approximation `N(x̂, H_V⁻¹)` to a
//! posterior `π ∝ exp(-n·v)` and computes tight, computable diagnostics for
//! the TV distance between the two: a Monte Carlo estimate of the leading
//! error term `L`, the closed-form coefficient `c̃₃`, multistart estimates of
//! the weighted operator norms `c₃` and `c₄(R)`, and the assembled error
//! interval. Low-dimensional brute-force TV oracles and tail-bound checks
//! provide independent ground truth.

pub mod dataset;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod format;
pub mod hermite;
pub mod laplace;
pub mod logistic;
pub mod mc;
pub mod model;
pub mod moments;
pub mod opnorm;
pub mod oracle;
pub mod population;
pub mod quad;
pub mod quartic;
pub mod sigmoid;
pub mod tensor;

pub use dataset::Dataset;
pub use diagnostics::DiagnosticsReport;
pub use error::{Error, Result};
pub use laplace::LaplaceFit;
pub use model::PotentialModel;
pub use tensor::{SymTensor3, SymTensor4};

/// Runs `f` on a dedicated rayon pool with `workers` threads (0 = one per core).
///
/// All parallel loops in this crate partition work into fixed-size blocks and
/// reduce them in block order, so results are identical for any worker count.
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> T {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build thread pool");
    pool.install(f)
}
