//! Gaussian primitives: scalar normal functions, correlation matrices and
//! multivariate normal cdf/pdf.

pub mod bivariate;
pub mod matrix;
pub mod normal;
pub mod qmc;
pub mod trivariate;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bivariate::bvn_cdf;
pub use matrix::{cholesky, cholesky_lower, partition, CorrelationMatrix, LowerTriangular, PartitionedCorrelation};
pub use normal::{ndtri, norm_cdf, norm_pdf, norm_quantile, std_normal, NormalFn};
pub use trivariate::tvn_cdf;

/// Default absolute accuracy of multivariate normal probabilities.
pub const DEFAULT_MVN_TOL: f64 = 1e-7;

/// Accuracy and randomization controls for [`mvn_cdf`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MvnOptions {
    /// Absolute error target.
    pub tol: f64,
    /// Seed for the randomized lattice shifts (only used for d >= 4).
    pub seed: u64,
    /// Evaluation budget for the lattice rule.
    pub max_evals: usize,
    /// Fixed number of lattice points per shift instead of adaptive growth.
    pub fixed_points: Option<usize>,
}

impl Default for MvnOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_MVN_TOL,
            seed: 0,
            max_evals: 20_000_000,
            fixed_points: None,
        }
    }
}

impl MvnOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Probability with its error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnEstimate {
    pub value: f64,
    pub error: f64,
}

/// `P(Z <= z)` for `Z ~ N(0, R)`.
pub fn mvn_cdf(z: &[f64], r: &CorrelationMatrix, opts: &MvnOptions) -> Result<f64> {
    mvn_cdf_estimate(z, r, opts).map(|e| e.value)
}

pub fn mvn_cdf_estimate(z: &[f64], r: &CorrelationMatrix, opts: &MvnOptions) -> Result<MvnEstimate> {
    if z.len() != r.dim() {
        return Err(Error::Shape(format!(
            "point has length {} but correlation is {}x{}",
            z.len(),
            r.dim(),
            r.dim()
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::Domain(format!("mvn tolerance must be positive, got {}", opts.tol)));
    }
    if z.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in mvn_cdf argument".into()));
    }
    if z.contains(&f64::NEG_INFINITY) {
        return Ok(MvnEstimate { value: 0.0, error: 0.0 });
    }
    // +inf coordinates integrate out
    let keep: Vec<usize> = (0..z.len()).filter(|&i| z[i] != f64::INFINITY).collect();
    if keep.is_empty() {
        return Ok(MvnEstimate { value: 1.0, error: 0.0 });
    }
    if keep.len() < z.len() {
        let zk: Vec<f64> = keep.iter().map(|&i| z[i]).collect();
        return mvn_cdf_finite(&zk, &r.submatrix(&keep), opts);
    }
    mvn_cdf_finite(z, r, opts)
}

fn mvn_cdf_finite(z: &[f64], r: &CorrelationMatrix, opts: &MvnOptions) -> Result<MvnEstimate> {
    let exact = |value| Ok(MvnEstimate { value, error: 0.0 });
    match z.len() {
        1 => exact(norm_cdf(z[0])),
        2 => exact(bvn_cdf(z[0], z[1], r.get(0, 1))),
        3 => exact(tvn_cdf(
            [z[0], z[1], z[2]],
            r.get(0, 1),
            r.get(0, 2),
            r.get(1, 2),
            opts.tol,
        )),
        _ => {
            let est = qmc::sov_cdf(
                z,
                &r.cholesky(),
                opts.tol,
                opts.seed,
                opts.max_evals,
                opts.fixed_points,
            );
            Ok(MvnEstimate {
                value: est.value,
                error: 3.0 * est.std_error,
            })
        }
    }
}

/// `P(Y <= b)` for `Y ~ N(0, cov)` with a general positive-definite covariance.
/// The problem is rescaled to unit variances first.
pub fn mvn_cdf_cov(b: &[f64], cov: &DMatrix<f64>, opts: &MvnOptions) -> Result<f64> {
    let k = b.len();
    if cov.nrows() != k || cov.ncols() != k {
        return Err(Error::Shape(format!(
            "bound has length {k} but covariance is {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if k == 0 {
        return Ok(1.0);
    }
    let sd: Vec<f64> = (0..k).map(|i| cov[(i, i)].sqrt()).collect();
    if let Some(i) = sd.iter().position(|s| !(*s > 0.0)) {
        return Err(Error::Factorization {
            pivot: i,
            value: cov[(i, i)],
        });
    }
    let corr = DMatrix::from_fn(k, k, |i, j| {
        if i == j {
            1.0
        } else {
            cov[(i, j)] / (sd[i] * sd[j])
        }
    });
    let z: Vec<f64> = b.iter().zip(&sd).map(|(v, s)| v / s).collect();
    let r = CorrelationMatrix::new(corr)?;
    mvn_cdf(&z, &r, opts)
}

/// Log-density of `N(0, R)` at `z`.
pub fn mvn_ln_pdf(z: &[f64], r: &CorrelationMatrix) -> Result<f64> {
    if z.len() != r.dim() {
        return Err(Error::Shape(format!(
            "point has length {} but correlation is {}x{}",
            z.len(),
            r.dim(),
            r.dim()
        )));
    }
    let l = r.cholesky();
    Ok(ln_pdf_with_factor(z, &l))
}

pub(crate) fn ln_pdf_with_factor(z: &[f64], l: &LowerTriangular) -> f64 {
    let y = l.solve_lower(z);
    let quad: f64 = y.iter().map(|v| v * v).sum();
    -0.5 * quad - 0.5 * l.log_det() - z.len() as f64 * normal::LN_SQRT_2PI
}

/// Density of `N(0, R)` at `z`.
pub fn mvn_pdf(z: &[f64], r: &CorrelationMatrix) -> Result<f64> {
    mvn_ln_pdf(z, r).map(f64::exp)
}
