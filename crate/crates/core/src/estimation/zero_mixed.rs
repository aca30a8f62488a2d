//! Zero-mixed benchmark: one probability per active set and a separate
//! Gaussian copula for each active set of size two or more.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::angles::{correlation_from_angles, CorrelationParam};
use super::nelder_mead::{minimize, NelderMeadOptions};
use crate::copula::{GaussianCopula, U_CLAMP};
use crate::error::{Error, Result};
use crate::marginals::{fit_marginal_indexed, MixedMarginal, SeverityDistribution};
use crate::model::{ActiveSet, ClaimSeries};
use crate::mvn::CorrelationMatrix;

/// Largest dimension accepted; the number of subsets grows as `2^d`.
pub const ZERO_MIXED_MAX_DIM: usize = 4;
/// Copula fits on fewer rows are reported as undetermined.
pub const MIN_SUBSET_ROWS: usize = 3;
/// Fisher-z intervals wider than this are flagged.
pub const WIDE_CI: f64 = 1.0;
const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetFrequency {
    pub subset: Vec<usize>,
    pub count: usize,
    pub probability: f64,
    /// Wilson score interval at 95%.
    pub ci: (f64, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEstimate {
    pub i: usize,
    pub j: usize,
    pub rho: Option<f64>,
    /// Fisher-z interval at 95%.
    pub ci: Option<(f64, f64)>,
    pub wide: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubsetFitStatus {
    Fitted,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetCopulaFit {
    pub subset: Vec<usize>,
    pub rows: usize,
    pub status: SubsetFitStatus,
    pub correlation: Option<CorrelationMatrix>,
    pub pairs: Vec<PairEstimate>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroMixedReport {
    pub n_rows: usize,
    pub dim: usize,
    pub marginals: Vec<MixedMarginal>,
    /// Every subset, ordered by size then lexicographically.
    pub frequencies: Vec<SubsetFrequency>,
    pub copulas: Vec<SubsetCopulaFit>,
    /// Free parameters: `2^d − 1` probabilities, `2d` severities and one
    /// correlation per pair inside each subset of size two or more.
    pub parameter_count: usize,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z_975 * Z_975;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_975 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (centre - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

/// Fisher-z interval for a correlation estimated from `n` rows.
pub fn fisher_interval(rho: f64, n: usize) -> Option<(f64, f64)> {
    if n <= 3 {
        return None;
    }
    let z = rho.clamp(-1.0 + 1e-15, 1.0 - 1e-15).atanh();
    let se = 1.0 / ((n - 3) as f64).sqrt();
    Some(((z - Z_975 * se).tanh(), (z + Z_975 * se).tanh()))
}

/// Subsets of `0..d` ordered by size, then lexicographically.
pub fn ordered_subsets(d: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0u64..1 << d).map(|m| ActiveSet::from_mask(m, d).indices).collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

pub fn zero_mixed_fit(series: &ClaimSeries) -> Result<ZeroMixedReport> {
    let d = series.n_cols();
    if d > ZERO_MIXED_MAX_DIM {
        return Err(Error::Domain(format!(
            "zero-mixed fit supports d ≤ {ZERO_MIXED_MAX_DIM}, got {d}"
        )));
    }
    let n = series.n_rows();
    let marginals: Vec<MixedMarginal> = (0..d)
        .map(|j| fit_marginal_indexed(&series.column(j), j).map(|(m, _)| m))
        .collect::<Result<_>>()?;

    let mut by_mask: Vec<Vec<usize>> = vec![Vec::new(); 1 << d];
    for (r, x) in series.rows().enumerate() {
        by_mask[ActiveSet::of(x)?.mask() as usize].push(r);
    }
    let subsets = ordered_subsets(d);
    let mask_of = |s: &[usize]| s.iter().fold(0usize, |m, &i| m | 1 << i);

    let frequencies = subsets
        .iter()
        .map(|s| {
            let count = by_mask[mask_of(s)].len();
            SubsetFrequency {
                subset: s.clone(),
                count,
                probability: count as f64 / n as f64,
                ci: wilson_interval(count, n),
            }
        })
        .collect();

    let mut copulas = Vec::new();
    let mut parameter_count = (1 << d) - 1 + 2 * d;
    for s in subsets.iter().filter(|s| s.len() >= 2) {
        parameter_count += s.len() * (s.len() - 1) / 2;
        let rows = &by_mask[mask_of(s)];
        let u: Vec<Vec<f64>> = rows
            .iter()
            .map(|&r| {
                let x = series.row(r);
                s.iter()
                    .map(|&i| marginals[i].severity.cdf(x[i]).clamp(U_CLAMP, 1.0 - U_CLAMP))
                    .collect()
            })
            .collect();
        copulas.push(fit_subset_copula(s, &u)?);
    }

    Ok(ZeroMixedReport {
        n_rows: n,
        dim: d,
        marginals,
        frequencies,
        copulas,
        parameter_count,
    })
}

/// Maximize `Σ ln c(u; R)` over correlations of the subset's dimension.
fn fit_subset_copula(subset: &[usize], u: &[Vec<f64>]) -> Result<SubsetCopulaFit> {
    let k = subset.len();
    let n = u.len();
    let pair_indices = || {
        let mut v = Vec::new();
        for a in 0..k {
            for b in a + 1..k {
                v.push((a, b));
            }
        }
        v
    };
    if n < MIN_SUBSET_ROWS {
        return Ok(SubsetCopulaFit {
            subset: subset.to_vec(),
            rows: n,
            status: SubsetFitStatus::Undetermined,
            correlation: None,
            pairs: pair_indices()
                .into_iter()
                .map(|(a, b)| PairEstimate {
                    i: subset[a],
                    j: subset[b],
                    rho: None,
                    ci: None,
                    wide: true,
                })
                .collect(),
            converged: false,
        });
    }
    let objective = |angles: &[f64]| -> f64 {
        if angles.iter().any(|&t| !(t > 0.0 && t < PI)) {
            return f64::INFINITY;
        }
        let r = match correlation_from_angles(&CorrelationParam { angles: angles.to_vec() }) {
            Ok(r) => r,
            Err(_) => return f64::INFINITY,
        };
        let c = GaussianCopula::new(r);
        let mut total = 0.0;
        for row in u {
            match c.ln_density(row) {
                Ok(v) => total += v,
                Err(_) => return f64::INFINITY,
            }
        }
        -total
    };
    let opts = NelderMeadOptions {
        xtol: 1e-7,
        ftol: 1e-10,
        max_iter: 5000,
        initial_step: 0.2,
    };
    let res = minimize(objective, &CorrelationParam::identity(k).angles, &opts);
    let r = correlation_from_angles(&CorrelationParam { angles: res.x })?;
    let pairs = pair_indices()
        .into_iter()
        .map(|(a, b)| {
            let rho = r.get(a, b);
            let ci = fisher_interval(rho, n);
            PairEstimate {
                i: subset[a],
                j: subset[b],
                rho: Some(rho),
                ci,
                wide: ci.is_none_or(|(lo, hi)| hi - lo > WIDE_CI),
            }
        })
        .collect();
    Ok(SubsetCopulaFit {
        subset: subset.to_vec(),
        rows: n,
        status: SubsetFitStatus::Fitted,
        correlation: Some(r),
        pairs,
        converged: res.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{simulate, CombBernoulliModel};

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson_interval(30, 100);
        assert!(lo < 0.3 && 0.3 < hi);
        assert!((lo - 0.2189).abs() < 1e-3 && (hi - 0.3958).abs() < 1e-3);
        let (lo, hi) = wilson_interval(0, 50);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.1);
    }

    #[test]
    fn subset_order() {
        let s = ordered_subsets(3);
        let want: Vec<Vec<usize>> = vec![
            vec![],
            vec![0],
            vec![1],
            vec![2],
            vec![0, 1],
            vec![0, 2],
            vec![1, 2],
            vec![0, 1, 2],
        ];
        assert_eq!(s, want);
    }

    #[test]
    fn all_positive_data_has_one_copula() {
        let m = CombBernoulliModel::new(
            vec![
                MixedMarginal::lognormal(1.0, 0.0, 1.0).unwrap(),
                MixedMarginal::lognormal(1.0, 0.3, 0.6).unwrap(),
            ],
            CorrelationMatrix::bivariate(0.5).unwrap(),
        )
        .unwrap();
        let data = simulate(&m, 2000, 3).unwrap();
        let rep = zero_mixed_fit(&data).unwrap();
        assert_eq!(rep.frequencies.last().unwrap().probability, 1.0);
        assert!(rep.frequencies[..3].iter().all(|f| f.count == 0));
        assert_eq!(rep.copulas.len(), 1);
        let rho = rep.copulas[0].pairs[0].rho.unwrap();
        assert!((rho - 0.5).abs() < 0.05, "{rho}");
        assert!(!rep.copulas[0].pairs[0].wide);
    }

    #[test]
    fn sparse_subset_is_undetermined() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 1.5],
            vec![0.0, 0.5],
            vec![3.0, 2.0],
            vec![0.0, 0.0],
        ];
        let rep = zero_mixed_fit(&ClaimSeries::unlabeled(rows).unwrap()).unwrap();
        assert_eq!(rep.copulas[0].status, SubsetFitStatus::Undetermined);
        assert!(rep.copulas[0].pairs[0].wide);
        assert_eq!(rep.parameter_count, 3 + 4 + 1);
    }

    #[test]
    fn rejects_large_dimension() {
        let rows = vec![vec![1.0; 5]; 10];
        assert!(matches!(
            zero_mixed_fit(&ClaimSeries::unlabeled(rows).unwrap()),
            Err(Error::Domain(_))
        ));
    }
}
