use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivots at or below this value reject the factorization.
pub const PIVOT_TOL: f64 = 1e-12;

const SYMMETRY_TOL: f64 = 1e-10;

/// Symmetric positive-definite matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct CorrelationMatrix {
    m: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validate and wrap a matrix. Tiny asymmetry is symmetrized; the diagonal
    /// must equal one to within `1e-10`.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        let d = m.nrows();
        if d == 0 || m.ncols() != d {
            return Err(Error::Shape(format!(
                "correlation matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let mut m = m;
        for i in 0..d {
            if !m[(i, i)].is_finite() || (m[(i, i)] - 1.0).abs() > SYMMETRY_TOL {
                return Err(Error::Domain(format!(
                    "diagonal entry {i} is {} (must be 1)",
                    m[(i, i)]
                )));
            }
            m[(i, i)] = 1.0;
            for j in 0..i {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || !b.is_finite() || (a - b).abs() > SYMMETRY_TOL {
                    return Err(Error::Domain(format!(
                        "entries ({i},{j}) and ({j},{i}) differ: {a} vs {b}"
                    )));
                }
                let avg = 0.5 * (a + b);
                m[(i, j)] = avg;
                m[(j, i)] = avg;
            }
        }
        cholesky_lower(&m)?;
        for i in 0..d {
            for j in 0..i {
                if m[(i, j)].abs() >= 1.0 {
                    return Err(Error::Domain(format!(
                        "off-diagonal ({i},{j}) = {} outside (-1, 1)",
                        m[(i, j)]
                    )));
                }
            }
        }
        Ok(Self { m })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::Shape("correlation rows must form a square matrix".into()));
        }
        Self::new(DMatrix::from_fn(d, d, |i, j| rows[i][j]))
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    /// Equicorrelation matrix with common off-diagonal `rho`.
    pub fn equicorrelated(d: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho }))
    }

    pub fn bivariate(rho: f64) -> Result<Self> {
        Self::equicorrelated(2, rho)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.m[(i, j)]).collect())
            .collect()
    }

    /// Strict upper-triangle entries in row order: `(0,1), (0,2), ..., (d-2,d-1)`.
    pub fn upper_entries(&self) -> Vec<f64> {
        let d = self.dim();
        let mut out = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }

    pub fn cholesky(&self) -> LowerTriangular {
        // validated at construction
        cholesky_lower(&self.m).expect("correlation matrix validated as positive definite")
    }

    /// Principal sub-matrix on `indices` (in the given order).
    pub fn submatrix(&self, indices: &[usize]) -> CorrelationMatrix {
        let k = indices.len();
        CorrelationMatrix {
            m: DMatrix::from_fn(k, k, |a, b| self.m[(indices[a], indices[b])]),
        }
    }

    pub fn is_identity(&self) -> bool {
        let d = self.dim();
        (0..d).all(|i| (0..i).all(|j| self.m[(i, j)] == 0.0))
    }
}

impl TryFrom<Vec<Vec<f64>>> for CorrelationMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<CorrelationMatrix> for Vec<Vec<f64>> {
    fn from(value: CorrelationMatrix) -> Self {
        value.to_rows()
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    l: DMatrix<f64>,
}

impl LowerTriangular {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.l[(i, j)]
    }

    /// `ln det(A) = 2 Σ ln L_ii`.
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }

    /// Solve `L y = b` by forward substitution.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = b[i];
            for (j, yj) in y.iter().enumerate().take(i) {
                s -= self.l[(i, j)] * yj;
            }
            y[i] = s / self.l[(i, i)];
        }
        y
    }

    /// Solve `A x = b` with `A = L Lᵀ`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = self.solve_lower(b);
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in i + 1..n {
                s -= self.l[(j, i)] * x[j];
            }
            x[i] = s / self.l[(i, i)];
        }
        x
    }

    /// `L x`, using only the lower triangle.
    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.l[(i, j)] * x[j];
            }
            out[i] = s;
        }
    }
}

/// Cholesky factorization of a symmetric matrix; fails on the first pivot `<= 1e-12`.
pub fn cholesky_lower(a: &DMatrix<f64>) -> Result<LowerTriangular> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Shape(format!("{}x{} is not square", n, a.ncols())));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag -= l[(j, k)] * l[(j, k)];
        }
        if !(diag > PIVOT_TOL) {
            return Err(Error::Factorization {
                pivot: j,
                value: diag,
            });
        }
        let ljj = diag.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(LowerTriangular { l })
}

/// Check the correlation-matrix contract on a raw matrix and factor it.
pub fn cholesky(r: &CorrelationMatrix) -> LowerTriangular {
    r.cholesky()
}

/// Block layout of `R` with respect to an active index set `S` and its complement `T`.
#[derive(Debug, Clone)]
pub struct PartitionedCorrelation {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    pub r_ss: DMatrix<f64>,
    pub r_st: DMatrix<f64>,
    pub r_ts: DMatrix<f64>,
    pub r_tt: DMatrix<f64>,
    /// `R_TS R_SS⁻¹`, the regression of `Z_T` on `Z_S`.
    pub shift: DMatrix<f64>,
    /// `R_TT − R_TS R_SS⁻¹ R_ST`, the conditional covariance of `Z_T` given `Z_S`.
    pub schur: DMatrix<f64>,
    /// Cholesky factor of `R_SS` (empty when `S = ∅`).
    pub chol_ss: Option<LowerTriangular>,
}

/// Partition `R` by the index set `active`. Indices are 0-based; order is kept.
pub fn partition(r: &CorrelationMatrix, active: &[usize]) -> Result<PartitionedCorrelation> {
    let d = r.dim();
    let mut seen = vec![false; d];
    for &i in active {
        if i >= d || seen[i] {
            return Err(Error::Domain(format!(
                "active index {i} is out of range or repeated (d = {d})"
            )));
        }
        seen[i] = true;
    }
    let inactive: Vec<usize> = (0..d).filter(|&i| !seen[i]).collect();
    let m = r.matrix();
    let block = |rows: &[usize], cols: &[usize]| {
        DMatrix::from_fn(rows.len(), cols.len(), |a, b| m[(rows[a], cols[b])])
    };
    let r_ss = block(active, active);
    let r_st = block(active, &inactive);
    let r_ts = block(&inactive, active);
    let r_tt = block(&inactive, &inactive);

    let (shift, schur, chol_ss) = if active.is_empty() {
        (
            DMatrix::zeros(inactive.len(), 0),
            r_tt.clone(),
            None,
        )
    } else {
        let chol = cholesky_lower(&r_ss)?;
        // shift = R_TS R_SS⁻¹, computed row by row through the factor.
        let mut shift = DMatrix::zeros(inactive.len(), active.len());
        for t in 0..inactive.len() {
            let row: Vec<f64> = (0..active.len()).map(|s| r_ts[(t, s)]).collect();
            let sol = chol.solve(&row);
            for (s, v) in sol.into_iter().enumerate() {
                shift[(t, s)] = v;
            }
        }
        let mut schur = &r_tt - &shift * &r_st;
        // enforce exact symmetry
        for i in 0..schur.nrows() {
            for j in 0..i {
                let avg = 0.5 * (schur[(i, j)] + schur[(j, i)]);
                schur[(i, j)] = avg;
                schur[(j, i)] = avg;
            }
        }
        (shift, schur, Some(chol))
    };

    Ok(PartitionedCorrelation {
        active: active.to_vec(),
        inactive,
        r_ss,
        r_st,
        r_ts,
        r_tt,
        shift,
        schur,
        chol_ss,
    })
}

impl PartitionedCorrelation {
    /// Conditional mean of `Z_T` given `Z_S = z_s`.
    pub fn conditional_mean(&self, z_s: &[f64]) -> DVector<f64> {
        &self.shift * DVector::from_column_slice(z_s)
    }
}
