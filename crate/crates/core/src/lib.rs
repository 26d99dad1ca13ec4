//! Kernel methods and regularization in reproducing kernel Hilbert spaces.
//!
//! * [`kernel`]: kernels, Gram matrices, null-space bases, kernel distances.
//! * [`solvers`]: penalized square, Bernoulli and hinge-loss fits by the
//!   representer theorem, the multicategory SVM, and the LASSO.
//! * [`tuning`]: influence matrices, GCV, leave-one-out and randomized
//!   estimates of the degrees of freedom for signal.
//! * [`ss_anova`]: smoothing-spline ANOVA decompositions.
//! * [`rke`]: regularized kernel estimation and embeddings.
//! * [`dcor`]: distance correlation and its permutation test.
//!
//! ```
//! use rkhskit::kernel::{gram, KernelSpec, NullSpace};
//! use rkhskit::solvers::fit_penalized_ls;
//!
//! let points: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0]).collect();
//! let y: Vec<f64> = points.iter().map(|p| (6.0 * p[0]).sin()).collect();
//! let kernel = KernelSpec::Spline { order: 2 };
//! let k = gram(&kernel, &points)?;
//! let t = NullSpace::Polynomial { order: 2 }.basis(&points)?;
//! let fit = fit_penalized_ls(&k, &t, &y, 1e-4)?;
//! assert_eq!(fit.c.len(), 8);
//! # Ok::<(), rkhskit::Error>(())
//! ```

pub mod dcor;
mod error;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod rke;
pub mod rng;
pub mod solvers;
pub mod ss_anova;
pub mod tuning;

pub use error::{Error, Result};

/// Library version, recorded in CLI manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
