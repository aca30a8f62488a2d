//! Gaussian copula: cdf, density, restricted survival copula, mixed partial
//! derivatives and sampling. Student-t sampling is provided for timing runs.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::mvn::normal::{ndtri, norm_cdf, norm_sf};
use crate::mvn::{
    bvn_cdf, mvn_cdf, partition, tvn_cdf, CorrelationMatrix, LowerTriangular, MvnOptions,
};
use crate::rng::{derive_seed, rng_from_seed};

/// Uniforms are kept inside `[U_CLAMP, 1 - U_CLAMP]` before the normal quantile
/// on likelihood paths.
pub const U_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianCopula {
    pub correlation: CorrelationMatrix,
    pub mvn: MvnOptions,
}

impl GaussianCopula {
    pub fn new(correlation: CorrelationMatrix) -> Self {
        Self {
            correlation,
            mvn: MvnOptions::default(),
        }
    }

    pub fn with_options(correlation: CorrelationMatrix, mvn: MvnOptions) -> Result<Self> {
        if !(mvn.tol > 0.0) {
            return Err(Error::Parameter(format!("mvn tolerance must be positive, got {}", mvn.tol)));
        }
        Ok(Self { correlation, mvn })
    }

    pub fn dim(&self) -> usize {
        self.correlation.dim()
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::Shape(format!(
                "copula has dimension {} but argument has length {}",
                self.dim(),
                u.len()
            )));
        }
        Ok(())
    }

    /// `C(u)`. Coordinates equal to one are marginalized out; any zero gives zero.
    pub fn cdf(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        if u.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::Domain(format!("copula argument outside [0,1]: {u:?}")));
        }
        if u.contains(&0.0) {
            return Ok(0.0);
        }
        let z: Vec<f64> = u.iter().map(|&v| ndtri(v)).collect();
        mvn_cdf(&z, &self.correlation, &self.mvn)
    }

    /// Copula density `c(u) = φ_d(z; R) / Π φ(z_i)` with `z = Φ⁻¹(u)`.
    pub fn density(&self, u: &[f64]) -> Result<f64> {
        self.ln_density(u).map(f64::exp)
    }

    pub fn ln_density(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        let z = interior_scores(u)?;
        Ok(ln_density_ratio(&z, &self.correlation.cholesky()))
    }

    /// `P(U_j > 1 - v_j for all j in J)`, which equals `Φ_|J|(Φ⁻¹(v_J); R_JJ)`
    /// by radial symmetry of the Gaussian copula.
    pub fn survival_restricted(&self, indices: &[usize], v: &[f64]) -> Result<f64> {
        if indices.is_empty() {
            return Err(Error::Domain("restricted survival copula needs a non-empty index set".into()));
        }
        if indices.len() != v.len() {
            return Err(Error::Shape(format!(
                "{} indices but {} arguments",
                indices.len(),
                v.len()
            )));
        }
        if indices.iter().any(|&i| i >= self.dim()) {
            return Err(Error::Domain(format!("index out of range in {indices:?}")));
        }
        let sub = GaussianCopula {
            correlation: self.correlation.submatrix(indices),
            mvn: self.mvn,
        };
        sub.cdf(v)
    }

    /// `∂^s C / Π_{i∈S} ∂u_i` at an interior point.
    pub fn mixed_partial(&self, active: &[usize], u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        if active.is_empty() {
            return Err(Error::Domain("mixed partial needs a non-empty active set".into()));
        }
        let z = interior_scores(u)?;
        let block = ConditionalBlock::new(&self.correlation, active)?;
        let (ln_ratio, prob) = block.evaluate(&z, &self.mvn)?;
        Ok(ln_ratio.exp() * prob)
    }

    /// `n` draws `u = Φ(L ε)`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        sample_scores(&self.correlation.cholesky(), n, seed)
            .into_iter()
            .map(|y| y.into_iter().map(norm_cdf).collect())
            .collect()
    }
}

fn interior_scores(u: &[f64]) -> Result<Vec<f64>> {
    if let Some(v) = u.iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Domain(format!("copula argument {v} is not in the open unit interval")));
    }
    Ok(u.iter().map(|&v| ndtri(v)).collect())
}

/// Rows per independently seeded simulation block.
pub const SIM_BLOCK: usize = 2048;

/// Normal scores `y = L ε` for `n` rows.
///
/// Rows are produced in blocks of [`SIM_BLOCK`], block `b` drawing from a
/// generator seeded with `derive_seed(seed, b)`, so the output does not depend
/// on the number of worker threads.
pub fn sample_scores(chol: &LowerTriangular, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let d = chol.dim();
    let blocks = n.div_ceil(SIM_BLOCK);
    (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let rows = SIM_BLOCK.min(n - b * SIM_BLOCK);
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            let mut eps = vec![0.0; d];
            (0..rows)
                .map(|_| {
                    for e in eps.iter_mut() {
                        *e = rng.sample(StandardNormal);
                    }
                    let mut y = vec![0.0; d];
                    chol.mul_vec(&eps, &mut y);
                    y
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Student-t copula draws: `u_i = T_ν(y_i / √(W/ν))` with `y = L ε` and
/// `W ~ χ²(ν)`.
pub fn sample_student_t(r: &CorrelationMatrix, nu: f64, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    if !(nu > 2.0) {
        return Err(Error::Parameter(format!("degrees of freedom must exceed 2, got {nu}")));
    }
    let t = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::Parameter(e.to_string()))?;
    let chi = ChiSquared::new(nu).map_err(|e| Error::Parameter(e.to_string()))?;
    let chol = r.cholesky();
    let d = r.dim();
    let mut rng = rng_from_seed(seed);
    let mut eps = vec![0.0; d];
    let mut y = vec![0.0; d];
    Ok((0..n)
        .map(|_| {
            for e in eps.iter_mut() {
                *e = rng.sample(StandardNormal);
            }
            chol.mul_vec(&eps, &mut y);
            let w: f64 = chi.sample(&mut rng);
            let scale = (w / nu).sqrt();
            y.iter().map(|&v| t.cdf(v / scale)).collect()
        })
        .collect())
}

/// Copula family used by the simulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CopulaFamily {
    Gaussian,
    StudentT { nu: f64 },
}

/// Draws exceedance probabilities `1 − u` one row at a time from a Gaussian
/// or Student-t copula with correlation `R`.
#[derive(Debug, Clone)]
pub struct ExceedanceSampler {
    chol: LowerTriangular,
    t: Option<(f64, StudentsT, ChiSquared<f64>)>,
    eps: Vec<f64>,
    y: Vec<f64>,
}

impl ExceedanceSampler {
    pub fn new(r: &CorrelationMatrix, family: CopulaFamily) -> Result<Self> {
        let t = match family {
            CopulaFamily::Gaussian => None,
            CopulaFamily::StudentT { nu } => {
                if !(nu > 2.0) {
                    return Err(Error::Parameter(format!("degrees of freedom must exceed 2, got {nu}")));
                }
                let t = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::Parameter(e.to_string()))?;
                let chi = ChiSquared::new(nu).map_err(|e| Error::Parameter(e.to_string()))?;
                Some((nu, t, chi))
            }
        };
        let d = r.dim();
        Ok(Self {
            chol: r.cholesky(),
            t,
            eps: vec![0.0; d],
            y: vec![0.0; d],
        })
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    /// Fills `out` with one row. The Gaussian case consumes the generator
    /// exactly like [`sample_scores`].
    pub fn draw<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        self.draw_scores(rng);
        self.exceedances(out);
    }

    /// Draws one row of scores, kept internally; the exceedance of component
    /// `i` falls below `p` exactly when score `i` exceeds `upper_threshold(p)`.
    pub fn draw_scores<R: Rng + ?Sized>(&mut self, rng: &mut R) -> &[f64] {
        for e in self.eps.iter_mut() {
            *e = rng.sample(StandardNormal);
        }
        self.chol.mul_vec(&self.eps, &mut self.y);
        if let Some((nu, _, chi)) = &self.t {
            let w: f64 = chi.sample(rng);
            let scale = (w / nu).sqrt();
            for v in self.y.iter_mut() {
                *v /= scale;
            }
        }
        &self.y
    }

    /// Exceedance probabilities of the last drawn scores.
    pub fn exceedances(&self, out: &mut [f64]) {
        match &self.t {
            None => {
                for (o, &v) in out.iter_mut().zip(&self.y) {
                    *o = norm_sf(v);
                }
            }
            Some((_, t, _)) => {
                for (o, &v) in out.iter_mut().zip(&self.y) {
                    *o = t.cdf(-v);
                }
            }
        }
    }

    /// Score level exceeded with probability `p`.
    pub fn upper_threshold(&self, p: f64) -> f64 {
        match &self.t {
            None => -ndtri(p),
            Some((_, t, _)) => -t.inverse_cdf(p),
        }
    }
}

/// `ln φ_d(z; R) − Σ ln φ(z_i)` from the Cholesky factor of `R`.
pub(crate) fn ln_density_ratio(z: &[f64], chol: &LowerTriangular) -> f64 {
    let y = chol.solve_lower(z);
    let quad: f64 = y.iter().map(|v| v * v).sum();
    let indep: f64 = z.iter().map(|v| v * v).sum();
    -0.5 * (quad - indep) - 0.5 * chol.log_det()
}

/// Precomputed pieces of the mixed partial for one active set `S`:
/// the factor of `R_SS`, the regression `R_TS R_SS⁻¹` and the standardized
/// conditional covariance of `Z_T`.
#[derive(Debug, Clone)]
pub struct ConditionalBlock {
    pub active: Vec<usize>,
    pub inactive: Vec<usize>,
    chol_ss: Option<LowerTriangular>,
    shift: DMatrix<f64>,
    cond_sd: Vec<f64>,
    cond_corr: Option<CorrelationMatrix>,
}

impl ConditionalBlock {
    pub fn new(r: &CorrelationMatrix, active: &[usize]) -> Result<Self> {
        let part = partition(r, active)?;
        let t = part.inactive.len();
        let cond_sd: Vec<f64> = (0..t).map(|i| part.schur[(i, i)].sqrt()).collect();
        if let Some(i) = cond_sd.iter().position(|s| !(*s > 0.0)) {
            return Err(Error::Factorization {
                pivot: i,
                value: part.schur[(i, i)],
            });
        }
        let cond_corr = if t == 0 {
            None
        } else {
            let c = DMatrix::from_fn(t, t, |i, j| {
                if i == j {
                    1.0
                } else {
                    part.schur[(i, j)] / (cond_sd[i] * cond_sd[j])
                }
            });
            Some(CorrelationMatrix::new(c)?)
        };
        Ok(Self {
            active: part.active,
            inactive: part.inactive,
            chol_ss: part.chol_ss,
            shift: part.shift,
            cond_sd,
            cond_corr,
        })
    }

    /// Returns `(ln[φ_s(z_S; R_SS)/φ_s(z_S; I)], Φ_{d−s}(conditional bounds))`
    /// for a full score vector `z`.
    pub fn evaluate(&self, z: &[f64], opts: &MvnOptions) -> Result<(f64, f64)> {
        let z_s: Vec<f64> = self.active.iter().map(|&i| z[i]).collect();
        let ln_ratio = match &self.chol_ss {
            Some(l) => ln_density_ratio(&z_s, l),
            None => 0.0,
        };
        let t = self.inactive.len();
        if t == 0 {
            return Ok((ln_ratio, 1.0));
        }
        let mut b = vec![0.0; t];
        for (k, &i) in self.inactive.iter().enumerate() {
            let mut m = 0.0;
            for (s, zs) in z_s.iter().enumerate() {
                m += self.shift[(k, s)] * zs;
            }
            b[k] = (z[i] - m) / self.cond_sd[k];
        }
        let corr = self.cond_corr.as_ref().expect("non-empty complement has a correlation");
        let prob = match t {
            1 => norm_cdf(b[0]),
            2 => bvn_cdf(b[0], b[1], corr.get(0, 1)),
            3 => tvn_cdf([b[0], b[1], b[2]], corr.get(0, 1), corr.get(0, 2), corr.get(1, 2), opts.tol),
            _ => mvn_cdf(&b, corr, opts)?,
        };
        Ok((ln_ratio, prob))
    }
}
