//! Cholesky-angle coordinates for correlation matrices.
//!
//! Row `i` of the Cholesky factor is a unit vector written in spherical
//! coordinates: `L_i0 = cos θ_i0`, `L_ij = cos θ_ij Π_{k<j} sin θ_ik` and
//! `L_ii = Π_{k<i} sin θ_ik`. Angles in `(0, π)` give every positive-definite
//! correlation matrix exactly once.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mvn::CorrelationMatrix;

/// Angles ordered row by row: `θ_10, θ_20, θ_21, θ_30, ...`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationParam {
    pub angles: Vec<f64>,
}

impl CorrelationParam {
    pub fn new(angles: Vec<f64>) -> Result<Self> {
        dim_from_len(angles.len())?;
        Ok(Self { angles })
    }

    /// All angles `π/2`: the identity matrix.
    pub fn identity(d: usize) -> Self {
        Self {
            angles: vec![PI / 2.0; d * (d - 1) / 2],
        }
    }

    pub fn dim(&self) -> usize {
        dim_from_len(self.angles.len()).expect("validated at construction")
    }
}

/// Dimension `d` with `d(d-1)/2 = len`.
pub fn dim_from_len(len: usize) -> Result<usize> {
    let d = ((1.0 + (1.0 + 8.0 * len as f64).sqrt()) / 2.0).round() as usize;
    if d * (d - 1) / 2 != len {
        return Err(Error::Shape(format!("{len} is not a triangular number of angles")));
    }
    Ok(d)
}

/// Lower-triangular factor with unit-norm rows; no range check on the angles.
pub(crate) fn factor_from_angles(angles: &[f64], d: usize) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(d, d);
    l[(0, 0)] = 1.0;
    let mut k = 0;
    for i in 1..d {
        let mut prod = 1.0;
        for j in 0..i {
            let t = angles[k];
            k += 1;
            l[(i, j)] = t.cos() * prod;
            prod *= t.sin();
        }
        l[(i, i)] = prod;
    }
    l
}

/// Correlation matrix `L Lᵀ` induced by the angles.
pub fn correlation_from_angles(param: &CorrelationParam) -> Result<CorrelationMatrix> {
    if let Some(t) = param.angles.iter().find(|&&t| !(t > 0.0 && t < PI)) {
        return Err(Error::Domain(format!("angle {t} is outside the open interval (0, π)")));
    }
    let d = param.dim();
    let l = factor_from_angles(&param.angles, d);
    let mut r = &l * l.transpose();
    for i in 0..d {
        r[(i, i)] = 1.0;
    }
    CorrelationMatrix::new(r)
}

/// Inverse map, computed with `atan2` on the Cholesky factor's rows.
pub fn angles_from_correlation(r: &CorrelationMatrix) -> CorrelationParam {
    let d = r.dim();
    let l = r.cholesky();
    let mut angles = Vec::with_capacity(d * (d - 1) / 2);
    for i in 1..d {
        // rows of a correlation factor have unit norm; use the computed norm anyway
        let row: Vec<f64> = (0..=i).map(|j| l.get(i, j)).collect();
        for j in 0..i {
            let tail: f64 = row[j + 1..].iter().map(|v| v * v).sum::<f64>().sqrt();
            angles.push(tail.atan2(row[j]));
        }
    }
    CorrelationParam { angles }
}
