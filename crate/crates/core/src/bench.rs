//! Simulation timing: the copula simulator against the subset-process
//! simulator across dimensions.

use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::copula::CopulaFamily;
use crate::error::{Error, Result};
use crate::levy::{empirical_intensities, intensities_from_model, simulate_levy_with_family, IntensitySet};
use crate::marginals::MixedMarginal;
use crate::model::{simulate_with_family, CombBernoulliModel};
use crate::mvn::{CorrelationMatrix, MvnOptions};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchOptions {
    pub dims: Vec<usize>,
    /// Periods per copula simulation.
    pub n_rows: usize,
    /// Horizon of the subset processes, in periods.
    pub levy_horizon: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub family: CopulaFamily,
    /// Subset processes are only run up to this dimension.
    pub levy_max_dim: usize,
    /// Common off-diagonal correlation of the benchmark models.
    pub correlation: f64,
    /// Draws used to estimate intensities when the family has no exact
    /// active-set probabilities.
    pub intensity_draws: usize,
    /// Worker threads for the timed runs.
    pub threads: usize,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            dims: vec![2, 3, 5, 10, 20, 50, 100],
            n_rows: 5000,
            levy_horizon: 1000,
            repetitions: 20,
            seed: 0,
            family: CopulaFamily::StudentT { nu: 4.0 },
            levy_max_dim: 12,
            correlation: 0.1,
            intensity_draws: 400_000,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevyStatus {
    Ok,
    Infeasible,
    Starved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub dim: usize,
    /// Median wall time in seconds.
    pub comb_seconds: f64,
    pub levy_seconds: Option<f64>,
    pub levy_status: LevyStatus,
    pub levy_processes: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrendFit {
    pub intercept: f64,
    pub slope: f64,
    /// Coefficient of determination on the time scale.
    pub r_squared: f64,
    /// Gaussian AIC on the time scale.
    pub aic: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Growth {
    Linear,
    Exponential,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub options: BenchOptions,
    pub rows: Vec<BenchRow>,
    /// `t = a + b d`.
    pub comb_linear: Option<TrendFit>,
    /// `t = exp(a + b d)`, fitted on the log scale.
    pub comb_exponential: Option<TrendFit>,
    pub comb_growth: Growth,
    pub levy_linear: Option<TrendFit>,
    pub levy_exponential: Option<TrendFit>,
    pub levy_growth: Growth,
    /// Per-unit-dimension time ratios between consecutive feasible dimensions.
    pub levy_step_ratios: Vec<(usize, usize, f64)>,
}

/// Benchmark model: `p_i` spread over `[0.45, 0.55]`, standard lognormal
/// severities and a common weak correlation.
pub fn bench_model(d: usize, rho: f64, seed: u64) -> Result<CombBernoulliModel> {
    let mut rng = rng_from_seed(seed);
    let marginals = (0..d)
        .map(|_| MixedMarginal::lognormal(rng.random_range(0.45..=0.55), 0.0, 1.0))
        .collect::<Result<_>>()?;
    let model = CombBernoulliModel::new(marginals, CorrelationMatrix::equicorrelated(d, rho)?)?;
    Ok(model.with_mvn(MvnOptions::with_tol(1e-5)))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Median wall time of `f` over `reps` runs after one discarded warm-up.
fn time_median<F: FnMut(u64) -> Result<()>>(reps: usize, seed: u64, mut f: F) -> Result<f64> {
    f(derive_seed(seed, u64::MAX))?;
    let mut times = Vec::with_capacity(reps);
    for r in 0..reps {
        let start = Instant::now();
        f(derive_seed(seed, r as u64))?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok(median(times))
}

fn ols(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

fn score(y: &[f64], fitted: &[f64], intercept: f64, slope: f64) -> TrendFit {
    let n = y.len() as f64;
    let my = y.iter().sum::<f64>() / n;
    let sse: f64 = y.iter().zip(fitted).map(|(a, b)| (a - b).powi(2)).sum();
    let sst: f64 = y.iter().map(|a| (a - my).powi(2)).sum();
    TrendFit {
        intercept,
        slope,
        r_squared: if sst > 0.0 { 1.0 - sse / sst } else { 1.0 },
        aic: n * (sse.max(f64::MIN_POSITIVE) / n).ln() + 4.0,
    }
}

/// Linear and exponential trends of `t` against `d`; needs three points.
pub fn fit_trends(d: &[f64], t: &[f64]) -> Option<(TrendFit, TrendFit, Growth)> {
    if d.len() < 3 || t.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let (a, b) = ols(d, t);
    let lin_fit: Vec<f64> = d.iter().map(|x| a + b * x).collect();
    let linear = score(t, &lin_fit, a, b);
    let logs: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let (ea, eb) = ols(d, &logs);
    let exp_fit: Vec<f64> = d.iter().map(|x| (ea + eb * x).exp()).collect();
    let exponential = score(t, &exp_fit, ea, eb);
    let growth = if linear.aic < exponential.aic {
        Growth::Linear
    } else {
        Growth::Exponential
    };
    Some((linear, exponential, growth))
}

fn levy_intensities(model: &CombBernoulliModel, opts: &BenchOptions, seed: u64) -> Result<IntensitySet> {
    let horizon = opts.levy_horizon as f64;
    match opts.family {
        CopulaFamily::Gaussian => intensities_from_model(model, 1.0, horizon),
        CopulaFamily::StudentT { .. } => {
            empirical_intensities(model, opts.family, opts.intensity_draws, 1.0, horizon, seed)
        }
    }
}

pub fn run_bench(opts: &BenchOptions) -> Result<BenchReport> {
    if opts.dims.is_empty() || opts.dims.windows(2).any(|w| w[0] >= w[1]) || opts.dims[0] < 2 {
        return Err(Error::Parameter("dimensions must be increasing and at least 2".into()));
    }
    if opts.repetitions == 0 || opts.n_rows == 0 || opts.levy_horizon == 0 {
        return Err(Error::Parameter("repetitions, rows and horizon must be positive".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::Parameter(e.to_string()))?;
    let mut rows = Vec::with_capacity(opts.dims.len());
    for &d in &opts.dims {
        let model = bench_model(d, opts.correlation, derive_seed(opts.seed, d as u64))?;
        let comb = pool.install(|| {
            time_median(opts.repetitions, opts.seed, |s| {
                simulate_with_family(&model, opts.family, opts.n_rows, s).map(|_| ())
            })
        })?;
        let (levy_seconds, levy_status, levy_processes) = if d > opts.levy_max_dim {
            (None, LevyStatus::Infeasible, None)
        } else {
            let lambda = levy_intensities(&model, opts, derive_seed(opts.seed, 1000 + d as u64))?;
            let timed = pool.install(|| {
                time_median(opts.repetitions, opts.seed, |s| {
                    simulate_levy_with_family(&lambda, &model, opts.family, s).map(|_| ())
                })
            });
            match timed {
                Ok(t) => (Some(t), LevyStatus::Ok, Some((1u64 << d) - 1)),
                Err(Error::SamplerStarved { .. }) => (None, LevyStatus::Starved, Some((1u64 << d) - 1)),
                Err(e) => return Err(e),
            }
        };
        rows.push(BenchRow {
            dim: d,
            comb_seconds: comb,
            levy_seconds,
            levy_status,
            levy_processes,
        });
    }

    let dims: Vec<f64> = rows.iter().map(|r| r.dim as f64).collect();
    let comb_t: Vec<f64> = rows.iter().map(|r| r.comb_seconds).collect();
    let comb = fit_trends(&dims, &comb_t);
    let levy_pts: Vec<(usize, f64)> = rows.iter().filter_map(|r| r.levy_seconds.map(|t| (r.dim, t))).collect();
    let (ld, lt): (Vec<f64>, Vec<f64>) = levy_pts.iter().map(|&(d, t)| (d as f64, t)).unzip();
    let levy = fit_trends(&ld, &lt);
    let levy_step_ratios = levy_pts
        .windows(2)
        .map(|w| {
            let steps = (w[1].0 - w[0].0) as f64;
            (w[0].0, w[1].0, (w[1].1 / w[0].1).powf(1.0 / steps))
        })
        .collect();
    Ok(BenchReport {
        options: opts.clone(),
        rows,
        comb_linear: comb.map(|c| c.0),
        comb_exponential: comb.map(|c| c.1),
        comb_growth: comb.map_or(Growth::Undetermined, |c| c.2),
        levy_linear: levy.map(|c| c.0),
        levy_exponential: levy.map(|c| c.1),
        levy_growth: levy.map_or(Growth::Undetermined, |c| c.2),
        levy_step_ratios,
    })
}
