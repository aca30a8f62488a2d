//! Two-stage estimation, the correlation parametrization and the benchmark
//! calibrators.

pub mod angles;
pub mod ifm;
pub mod limit;
pub mod nelder_mead;
pub mod spearman;
pub mod zero_mixed;

pub use angles::{angles_from_correlation, correlation_from_angles, CorrelationParam};
pub use ifm::{fit_correlation, fit_ifm, FitOptions, FitReport, ParameterInterval};
pub use limit::{limit_loglik, LimitLogLik};
pub use nelder_mead::{minimize, NelderMeadOptions, NelderMeadResult};
pub use spearman::{spearman_bounds, spearman_rho, spearman_transform, SpearmanBounds};
pub use zero_mixed::{zero_mixed_fit, ZeroMixedReport};
