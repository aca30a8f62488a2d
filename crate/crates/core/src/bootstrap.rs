//! Parametric bootstrap: simulate replicas from a fitted model, refit each and
//! read intervals off the empirical quantiles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::ifm::{correlation_names, fit_ifm, FitOptions};
use crate::model::{default_labels, simulate, CombBernoulliModel};
use crate::rng::{derive_seed, derive_seed_path};

/// Share of failed replicas above which the bootstrap is rejected.
pub const MAX_FAILED_SHARE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapOptions {
    pub replicas: usize,
    pub alpha: f64,
    pub seed: u64,
    pub bonferroni: bool,
    /// Also report `p`, `mu` and `sigma` of every column.
    pub include_marginals: bool,
    /// Refit options; the warm start is replaced by the model's correlation.
    pub fit: FitOptions,
}

impl Default for BootstrapOptions {
    fn default() -> Self {
        Self {
            replicas: 1000,
            alpha: 0.05,
            seed: 0,
            bonferroni: true,
            include_marginals: false,
            fit: FitOptions {
                restarts: 1,
                ..FitOptions::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub parameter_names: Vec<String>,
    /// Re-estimates of the surviving replicas, in replica order.
    pub replicas: Vec<Vec<f64>>,
    pub replica_indices: Vec<usize>,
    pub failed: usize,
    pub not_converged: usize,
    pub alpha: f64,
    pub bonferroni: bool,
    /// Intervals at the requested adjustment.
    pub intervals: Vec<(f64, f64)>,
    /// Per-parameter intervals without the Bonferroni adjustment.
    pub intervals_unadjusted: Vec<(f64, f64)>,
    /// Bonferroni-adjusted intervals, whatever `bonferroni` says.
    pub intervals_bonferroni: Vec<(f64, f64)>,
}

/// Nearest-rank quantile: the `⌈qB⌉`-th smallest of `sorted` (1-based,
/// clamped to `1..=B`).
pub fn nearest_rank(sorted: &[f64], q: f64) -> f64 {
    let b = sorted.len();
    let k = ((q * b as f64).ceil() as usize).clamp(1, b);
    sorted[k - 1]
}

/// Two-sided intervals at level `alpha` split over `m` parameters.
pub fn quantile_intervals(columns: &[Vec<f64>], alpha: f64, m: usize) -> Vec<(f64, f64)> {
    let tail = alpha / (2.0 * m as f64);
    columns
        .iter()
        .map(|c| {
            let mut s = c.clone();
            s.sort_by(f64::total_cmp);
            (nearest_rank(&s, tail), nearest_rank(&s, 1.0 - tail))
        })
        .collect()
}

pub fn parameter_names(labels: &[String], include_marginals: bool) -> Vec<String> {
    let mut names = correlation_names(labels);
    if include_marginals {
        for l in labels {
            for p in ["p", "mu", "sigma"] {
                names.push(format!("{p}({l})"));
            }
        }
    }
    names
}

pub fn parametric_bootstrap(
    model: &CombBernoulliModel,
    n_rows: usize,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult> {
    if opts.replicas == 0 {
        return Err(Error::Parameter("at least one replica is required".into()));
    }
    if !(opts.alpha > 0.0 && opts.alpha < 1.0) {
        return Err(Error::Parameter(format!("alpha must lie in (0, 1), got {}", opts.alpha)));
    }
    let d = model.dim();
    let names = parameter_names(&default_labels(d), opts.include_marginals);
    let m = names.len();

    let outcomes: Vec<Result<(Vec<f64>, bool)>> = (0..opts.replicas)
        .into_par_iter()
        .map(|b| {
            let data = simulate(model, n_rows, derive_seed(opts.seed, b as u64))?;
            let mut fit_opts = opts.fit.clone();
            fit_opts.warm_start = Some(model.correlation.clone());
            fit_opts.seed = derive_seed_path(opts.seed, &[b as u64, 1]);
            fit_opts.mvn = fit_opts.mvn.with_seed(derive_seed_path(opts.seed, &[b as u64, 2]));
            let fit = fit_ifm(&data, &fit_opts)?;
            let mut v = fit.correlation.upper_entries();
            if opts.include_marginals {
                for mg in &fit.marginals {
                    v.extend([mg.p, mg.severity.mu, mg.severity.sigma]);
                }
            }
            Ok((v, fit.converged))
        })
        .collect();

    let mut replicas = Vec::with_capacity(opts.replicas);
    let mut indices = Vec::with_capacity(opts.replicas);
    let mut failed = 0;
    let mut not_converged = 0;
    for (b, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((v, conv)) => {
                not_converged += !conv as usize;
                replicas.push(v);
                indices.push(b);
            }
            Err(_) => failed += 1,
        }
    }
    if failed as f64 > MAX_FAILED_SHARE * opts.replicas as f64 || replicas.is_empty() {
        return Err(Error::BootstrapUnstable {
            failed,
            total: opts.replicas,
        });
    }
    let columns: Vec<Vec<f64>> = (0..m).map(|j| replicas.iter().map(|r| r[j]).collect()).collect();
    let unadjusted = quantile_intervals(&columns, opts.alpha, 1);
    let adjusted = quantile_intervals(&columns, opts.alpha, m);
    Ok(BootstrapResult {
        parameter_names: names,
        replicas,
        replica_indices: indices,
        failed,
        not_converged,
        alpha: opts.alpha,
        bonferroni: opts.bonferroni,
        intervals: if opts.bonferroni { adjusted.clone() } else { unadjusted.clone() },
        intervals_unadjusted: unadjusted,
        intervals_bonferroni: adjusted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginals::MixedMarginal;
    use crate::mvn::CorrelationMatrix;

    #[test]
    fn nearest_rank_convention() {
        let s: Vec<f64> = (1..=10).map(|v| v as f64).collect();
        assert_eq!(nearest_rank(&s, 0.25), 3.0);
        assert_eq!(nearest_rank(&s, 0.3), 3.0);
        assert_eq!(nearest_rank(&s, 0.0), 1.0);
        assert_eq!(nearest_rank(&s, 1.0), 10.0);
        assert_eq!(nearest_rank(&[4.0], 0.025), 4.0);
    }

    fn small_model() -> CombBernoulliModel {
        CombBernoulliModel::new(
            vec![
                MixedMarginal::lognormal(0.5, 0.0, 1.0).unwrap(),
                MixedMarginal::lognormal(0.6, 0.2, 0.8).unwrap(),
            ],
            CorrelationMatrix::bivariate(0.4).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn single_replica_is_degenerate() {
        let opts = BootstrapOptions {
            replicas: 1,
            ..Default::default()
        };
        let r = parametric_bootstrap(&small_model(), 300, &opts).unwrap();
        let v = r.replicas[0][0];
        assert_eq!(r.intervals, vec![(v, v)]);
        assert_eq!(r.parameter_names, vec!["rho(x1,x2)".to_string()]);
    }

    #[test]
    fn bonferroni_widens_intervals() {
        let opts = BootstrapOptions {
            replicas: 40,
            include_marginals: true,
            seed: 3,
            ..Default::default()
        };
        let r = parametric_bootstrap(&small_model(), 300, &opts).unwrap();
        assert_eq!(r.parameter_names.len(), 7);
        for ((a, b), (c, e)) in r.intervals_bonferroni.iter().zip(&r.intervals_unadjusted) {
            assert!(a <= c && e <= b && a <= b);
        }
    }

    #[test]
    fn rejects_bad_options() {
        let m = small_model();
        let zero = BootstrapOptions {
            replicas: 0,
            ..Default::default()
        };
        assert!(parametric_bootstrap(&m, 10, &zero).is_err());
        let alpha = BootstrapOptions {
            alpha: 1.0,
            ..Default::default()
        };
        assert!(parametric_bootstrap(&m, 10, &alpha).is_err());
    }
}
