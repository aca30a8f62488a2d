//! Two-stage fitting: closed-form marginals, then the copula correlation by
//! maximizing the exact log-likelihood with the marginals frozen.

use std::cmp::Ordering;
use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::angles::{angles_from_correlation, correlation_from_angles, CorrelationParam};
use super::nelder_mead::{minimize, NelderMeadOptions};
use super::spearman::{spearman_bounds, spearman_transform};
use crate::error::{Error, Result};
use crate::marginals::{fit_marginal_indexed, MarginalFitDiagnostics, MixedMarginal};
use crate::model::{ClaimSeries, CombBernoulliModel, LikelihoodEvaluator};
use crate::mvn::{CorrelationMatrix, MvnOptions};
use crate::rng::{derive_seed, rng_from_seed};

/// Angles are kept this far from `0` and `π` when building starting points.
const ANGLE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub nelder_mead: NelderMeadOptions,
    /// Number of optimizer runs; the first starts from the warm start.
    pub restarts: usize,
    pub seed: u64,
    pub mvn: MvnOptions,
    /// Starting correlation; defaults to the Spearman tie-bound midpoints.
    #[serde(skip)]
    pub warm_start: Option<CorrelationMatrix>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            nelder_mead: NelderMeadOptions {
                xtol: 1e-5,
                ftol: 1e-8,
                max_iter: 4000,
                initial_step: 0.15,
            },
            restarts: 3,
            seed: 0,
            mvn: MvnOptions::default(),
            warm_start: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Given,
    SpearmanMidpoint,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartOutcome {
    pub start: StartKind,
    pub loglik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub angles: Vec<f64>,
}

/// Closed interval for one reported parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInterval {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub labels: Vec<String>,
    pub marginals: Vec<MixedMarginal>,
    pub marginal_diagnostics: Vec<MarginalFitDiagnostics>,
    pub correlation: CorrelationMatrix,
    pub angles: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub clamp_count: usize,
    pub floor_count: usize,
    pub restarts: Vec<RestartOutcome>,
    pub ci: Option<Vec<ParameterInterval>>,
}

impl FitReport {
    pub fn model(&self) -> Result<CombBernoulliModel> {
        CombBernoulliModel::new(self.marginals.clone(), self.correlation.clone())
    }

    /// Names `rho(a,b)` for the upper-triangle correlation entries.
    pub fn correlation_names(&self) -> Vec<String> {
        correlation_names(&self.labels)
    }
}

pub fn correlation_names(labels: &[String]) -> Vec<String> {
    let mut out = Vec::new();
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            out.push(format!("rho({},{})", labels[i], labels[j]));
        }
    }
    out
}

/// Inference-functions-for-margins fit.
pub fn fit_ifm(series: &ClaimSeries, opts: &FitOptions) -> Result<FitReport> {
    let d = series.n_cols();
    let n = series.n_rows();
    if n < d + 2 {
        return Err(Error::Shape(format!("need at least d + 2 = {} rows, got {n}", d + 2)));
    }
    let mut marginals = Vec::with_capacity(d);
    let mut diagnostics = Vec::with_capacity(d);
    for j in 0..d {
        let (m, diag) = fit_marginal_indexed(&series.column(j), j)?;
        marginals.push(m);
        diagnostics.push(diag);
    }
    let stage2 = fit_correlation(&marginals, series, opts)?;
    Ok(FitReport {
        labels: series.labels().to_vec(),
        marginals,
        marginal_diagnostics: diagnostics,
        ..stage2
    })
}

/// Second stage only: maximize over the correlation with `marginals` fixed.
/// The returned report carries empty marginal diagnostics.
pub fn fit_correlation(marginals: &[MixedMarginal], series: &ClaimSeries, opts: &FitOptions) -> Result<FitReport> {
    let d = marginals.len();
    if opts.restarts == 0 {
        return Err(Error::Parameter("at least one optimizer run is required".into()));
    }
    let evaluator = LikelihoodEvaluator::new(marginals, series, opts.mvn)?;
    let objective = |angles: &[f64]| -> f64 {
        if angles.iter().any(|&t| !(t > 0.0 && t < PI)) {
            return f64::INFINITY;
        }
        let r = match CorrelationParam::new(angles.to_vec()).and_then(|p| correlation_from_angles(&p)) {
            Ok(r) => r,
            Err(_) => return f64::INFINITY,
        };
        match evaluator.value(&r) {
            Ok(v) if v.is_finite() => -v,
            _ => f64::INFINITY,
        }
    };

    let mut starts: Vec<(StartKind, Vec<f64>)> = Vec::with_capacity(opts.restarts);
    match &opts.warm_start {
        Some(r) => starts.push((StartKind::Given, clamp_angles(angles_from_correlation(r).angles))),
        None => starts.push((
            StartKind::SpearmanMidpoint,
            clamp_angles(angles_from_correlation(&spearman_start(series)?).angles),
        )),
    }
    for k in 1..opts.restarts {
        let mut rng = rng_from_seed(derive_seed(opts.seed, k as u64));
        let a = (0..d * (d - 1) / 2)
            .map(|_| rng.random_range(PI / 2.0 - 1.0..PI / 2.0 + 1.0))
            .collect();
        starts.push((StartKind::Random, a));
    }

    let mut outcomes = Vec::with_capacity(starts.len());
    for (kind, x0) in starts {
        let res = minimize(objective, &x0, &opts.nelder_mead);
        outcomes.push(RestartOutcome {
            start: kind,
            loglik: -res.fx,
            iterations: res.iterations,
            evaluations: res.evaluations,
            converged: res.converged,
            angles: res.x,
        });
    }
    let best = outcomes
        .iter()
        .max_by(|a, b| {
            a.loglik
                .partial_cmp(&b.loglik)
                .unwrap_or(Ordering::Equal)
                // on equal likelihood prefer the lexicographically smaller angles
                .then_with(|| cmp_lex(&b.angles, &a.angles))
        })
        .expect("at least one run")
        .clone();
    if !best.loglik.is_finite() {
        return Err(Error::Parameter("no optimizer run reached a feasible correlation".into()));
    }
    let correlation = correlation_from_angles(&CorrelationParam::new(best.angles.clone())?)?;
    let ll = evaluator.evaluate(&correlation)?;
    Ok(FitReport {
        labels: series.labels().to_vec(),
        marginals: marginals.to_vec(),
        marginal_diagnostics: vec![],
        correlation,
        angles: best.angles.clone(),
        loglik: ll.value,
        iterations: best.iterations,
        evaluations: outcomes.iter().map(|o| o.evaluations).sum(),
        converged: best.converged,
        clamp_count: ll.diagnostics.clamp_count,
        floor_count: ll.diagnostics.floor_count,
        restarts: outcomes,
        ci: None,
    })
}

fn cmp_lex(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

fn clamp_angles(a: Vec<f64>) -> Vec<f64> {
    a.into_iter()
        .map(|t| t.clamp(ANGLE_MARGIN, PI - ANGLE_MARGIN))
        .collect()
}

/// Pairwise Spearman tie-bound midpoints mapped to the correlation scale,
/// shrunk toward the identity until positive definite.
pub fn spearman_start(series: &ClaimSeries) -> Result<CorrelationMatrix> {
    let d = series.n_cols();
    let cols: Vec<Vec<f64>> = (0..d).map(|j| series.column(j)).collect();
    let mut m = DMatrix::identity(d, d);
    for i in 0..d {
        for j in i + 1..d {
            let b = spearman_bounds(&cols[i], &cols[j])?;
            let r = if b.degenerate { 0.0 } else { spearman_transform(b.midpoint()) };
            m[(i, j)] = r;
            m[(j, i)] = r;
        }
    }
    for step in 0..=20 {
        let lambda = step as f64 * 0.05;
        let shrunk = DMatrix::from_fn(d, d, |i, j| {
            if i == j {
                1.0
            } else {
                (1.0 - lambda) * m[(i, j)]
            }
        });
        if let Ok(r) = CorrelationMatrix::new(shrunk) {
            if r.cholesky().matrix().diagonal().iter().all(|&v| v * v > 1e-6) {
                return Ok(r);
            }
        }
    }
    Ok(CorrelationMatrix::identity(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::simulate;

    #[test]
    fn recovers_bivariate_correlation() {
        let truth = CombBernoulliModel::new(
            vec![
                MixedMarginal::lognormal(0.5, 0.0, 1.0).unwrap(),
                MixedMarginal::lognormal(0.4, 0.5, 0.7).unwrap(),
            ],
            CorrelationMatrix::bivariate(0.6).unwrap(),
        )
        .unwrap();
        let data = simulate(&truth, 3000, 4).unwrap();
        let fit = fit_ifm(&data, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        assert!((fit.correlation.get(0, 1) - 0.6).abs() < 0.06, "{}", fit.correlation.get(0, 1));
        assert_eq!(fit.restarts.len(), 3);
        // the optimum is at least as good as every run
        assert!(fit.restarts.iter().all(|r| r.loglik <= fit.loglik + 1e-9));
    }

    #[test]
    fn too_few_rows() {
        let s = ClaimSeries::unlabeled(vec![vec![1.0, 1.0], vec![2.0, 0.5], vec![0.0, 3.0]]).unwrap();
        assert!(matches!(fit_ifm(&s, &FitOptions::default()), Err(Error::Shape(_))));
    }

    #[test]
    fn insufficient_positives_propagates() {
        let rows = vec![
            vec![1.0, 0.0],
            vec![2.0, 0.0],
            vec![0.5, 0.0],
            vec![0.7, 1.0],
            vec![0.0, 0.0],
        ];
        let s = ClaimSeries::unlabeled(rows).unwrap();
        assert!(matches!(
            fit_ifm(&s, &FitOptions::default()),
            Err(Error::InsufficientPositives { column: 1, found: 1 })
        ));
    }
}
