//! Zero-mean ANOVA kernels for Gaussian process surrogates, with closed-form
//! functional ANOVA terms and Sobol indices of the fitted predictor.
//!
//! The pipeline, bottom-up:
//!
//! 1. [`quadrature`]: a discrete probability measure per input.
//! 2. [`zero_mean`]: split a kernel `k = k0 + k1` so that `k0` integrates to
//!    zero against that measure.
//! 3. [`anova_kernel`]: the product `σ² Π (1 + k0^i)`.
//! 4. [`gp_model`]: interpolating or regularized predictor and its submodels.
//! 5. [`sobol`]: sensitivity indices as quadratic forms in `α`.
//!
//! [`oracle`] and [`verify`] recompute the same quantities by brute force on
//! tensor grids; [`testbed`] holds the analytic test functions and designs;
//! [`experiments`] and [`cli`] drive the `zanova` binary.

pub mod anova_kernel;
pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod gp_model;
pub mod kernels;
pub mod linalg;
pub mod oracle;
pub mod quadrature;
pub mod sobol;
pub mod subset;
pub mod testbed;
pub mod verify;
pub mod zero_mean;

pub use anova_kernel::{AnovaKernel, AnovaMode};
pub use error::{Error, Result};
pub use gp_model::{fit, Design, FittedModel};
pub use kernels::UnivariateKernel;
pub use quadrature::{Measure, QuadratureRule};
pub use sobol::{sobol_indices, SensitivityReport, Selection};
pub use subset::Subset;
pub use zero_mean::{decompose, ZeroMeanKernel};
