//! Mixed marginals: an atom at zero plus a continuous severity on `(0, ∞)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mvn::normal::{ndtri, norm_cdf, norm_sf, LN_SQRT_2PI};

/// Continuous claim-size law on `(0, ∞)`.
pub trait SeverityDistribution {
    fn ln_pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    /// `1 - cdf(x)`, computed without cancellation.
    fn survival(&self, x: f64) -> f64;
    fn quantile(&self, q: f64) -> f64;
    /// Quantile from an upper-tail probability: `x` with `survival(x) = q`.
    fn quantile_upper(&self, q: f64) -> f64;
    fn params(&self) -> Vec<f64>;

    fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }
}

/// Lognormal severity: `ln X ~ N(mu, sigma²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LognormalSeverity {
    pub mu: f64,
    pub sigma: f64,
}

impl LognormalSeverity {
    pub fn new(mu: f64, sigma: f64) -> Result<Self> {
        if !mu.is_finite() || !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Parameter(format!(
                "lognormal needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
            )));
        }
        Ok(Self { mu, sigma })
    }

    /// `(ln x - mu) / sigma`.
    #[inline]
    pub fn score(&self, x: f64) -> f64 {
        (x.ln() - self.mu) / self.sigma
    }
}

impl SeverityDistribution for LognormalSeverity {
    fn ln_pdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return f64::NEG_INFINITY;
        }
        let w = self.score(x);
        -x.ln() - self.sigma.ln() - LN_SQRT_2PI - 0.5 * w * w
    }

    fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        norm_cdf(self.score(x))
    }

    fn survival(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 1.0;
        }
        norm_sf(self.score(x))
    }

    fn quantile(&self, q: f64) -> f64 {
        (self.mu + self.sigma * ndtri(q)).exp()
    }

    fn quantile_upper(&self, q: f64) -> f64 {
        (self.mu - self.sigma * ndtri(q)).exp()
    }

    fn params(&self) -> Vec<f64> {
        vec![self.mu, self.sigma]
    }
}

/// `F(x) = (1 - p) + p Ψ(x)` for `x >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedMarginal<S = LognormalSeverity> {
    pub p: f64,
    #[serde(flatten)]
    pub severity: S,
}

impl MixedMarginal<LognormalSeverity> {
    pub fn lognormal(p: f64, mu: f64, sigma: f64) -> Result<Self> {
        Self::new(p, LognormalSeverity::new(mu, sigma)?)
    }
}

impl<S: SeverityDistribution> MixedMarginal<S> {
    pub fn new(p: f64, severity: S) -> Result<Self> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::Parameter(format!("occurrence probability must lie in (0, 1], got {p}")));
        }
        Ok(Self { p, severity })
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_claim(x)?;
        Ok(if x == 0.0 {
            1.0 - self.p
        } else {
            (1.0 - self.p) + self.p * self.severity.cdf(x)
        })
    }

    /// `1 - F(x) = p Ψ̄(x)`; exact in the upper tail.
    pub fn survival(&self, x: f64) -> Result<f64> {
        check_claim(x)?;
        Ok(if x == 0.0 {
            self.p
        } else {
            self.p * self.severity.survival(x)
        })
    }

    /// Generalized inverse of the cdf. The boundary `u = 1 - p` maps to the atom.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Domain(format!("mixed quantile needs u in (0,1), got {u}")));
        }
        if u <= 1.0 - self.p {
            return Ok(0.0);
        }
        Ok(self.severity.quantile((u - (1.0 - self.p)) / self.p))
    }

    /// Quantile indexed by the exceedance probability `v = 1 - u`. Avoids the
    /// rounding of `u` near one.
    pub fn quantile_from_exceedance(&self, v: f64) -> f64 {
        if v >= self.p {
            0.0
        } else {
            self.severity.quantile_upper(v / self.p)
        }
    }

    /// `ln(p ψ(x))` for a positive claim.
    pub fn ln_density_positive(&self, x: f64) -> f64 {
        self.p.ln() + self.severity.ln_pdf(x)
    }
}

fn check_claim(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("claims must be non-negative, got {x}")));
    }
    Ok(())
}

/// Approximate standard errors of the closed-form estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginalFitDiagnostics {
    pub n: usize,
    pub n_positive: usize,
    pub se_p: f64,
    pub se_mu: f64,
    pub se_sigma: f64,
}

/// Maximum-likelihood fit of a lognormal mixed marginal.
///
/// `p` is the share of positive entries; `mu` and `sigma` are the mean and the
/// divisor-`n` standard deviation of the logs of the positive entries.
pub fn fit_marginal(column: &[f64]) -> Result<(MixedMarginal, MarginalFitDiagnostics)> {
    fit_marginal_indexed(column, 0)
}

pub(crate) fn fit_marginal_indexed(column: &[f64], index: usize) -> Result<(MixedMarginal, MarginalFitDiagnostics)> {
    if column.is_empty() {
        return Err(Error::Shape("cannot fit a marginal to an empty column".into()));
    }
    if let Some(pos) = column.iter().position(|&x| !(x >= 0.0)) {
        return Err(Error::Domain(format!(
            "column {index} row {pos} has negative or missing value {}",
            column[pos]
        )));
    }
    let logs: Vec<f64> = column.iter().filter(|&&x| x > 0.0).map(|x| x.ln()).collect();
    let n = column.len();
    let k = logs.len();
    if k < 2 {
        return Err(Error::InsufficientPositives { column: index, found: k });
    }
    let p = k as f64 / n as f64;
    let mu = logs.iter().sum::<f64>() / k as f64;
    let var = logs.iter().map(|l| (l - mu).powi(2)).sum::<f64>() / k as f64;
    let sigma = var.sqrt();
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "column {index} has identical positive values; lognormal scale is zero"
        )));
    }
    let marginal = MixedMarginal::lognormal(p, mu, sigma)?;
    let diag = MarginalFitDiagnostics {
        n,
        n_positive: k,
        se_p: (p * (1.0 - p) / n as f64).sqrt(),
        se_mu: sigma / (k as f64).sqrt(),
        se_sigma: sigma / (2.0 * k as f64).sqrt(),
    };
    Ok((marginal, diag))
}
