//! Correlation and partial-correlation screening for a fixed number of
//! samples `n` and many variables `p`.
//!
//! The crate thresholds sample correlation and partial-correlation matrices,
//! counts high-degree vertices and stars in the resulting graphs, and
//! evaluates the compound Poisson laws that approximate those counts, both
//! at finite `p` and in the `p -> infinity` limit. A seeded simulation
//! engine checks the approximations empirically.
//!
//! ```
//! use corrmine::params::{analytic_alpha, lambda_finite, rho_threshold};
//!
//! let rho = rho_threshold(100, 4, 1, 1.0).unwrap();
//! assert!((rho - 0.9999).abs() < 1e-12);
//! let alpha = analytic_alpha(4, 1).unwrap();
//! let lambda = lambda_finite(100, 4, 1, rho, &alpha).unwrap();
//! assert!((lambda - 0.495).abs() < 1e-9);
//! ```

// `!(x > 0.0)` style guards deliberately reject NaN along with bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cpois;
pub mod error;
pub mod geometry;
pub mod graphs;
pub mod io;
pub mod params;
pub mod scores;
pub mod sim;
pub mod sparsity;

pub use cpois::{cp_moments, cp_pmf, cp_tv_bound, tv_distance, CompoundPoisson, DiscreteDist, IncrementDist};
pub use error::{Error, Result};
pub use geometry::{cap_constants, cap_radius, pn, pn_bounds, pseudo_dist, CapConstants, SimRng};
pub use graphs::{count_statistics, count_universal, threshold_graph, CountStatistics, SimpleGraph, Statistic};
pub use params::{AlphaEstimate, CpParams};
pub use scores::{DataMatrix, ScoreMatrix, SymmetricMatrix};
pub use sparsity::CovarianceSpec;
