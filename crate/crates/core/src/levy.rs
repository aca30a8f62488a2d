//! Continuous-time side: Poisson-scaled intensities, the subset-process
//! simulator and the bivariate Clayton compound-Poisson likelihood.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::copula::{CopulaFamily, ExceedanceSampler};
use crate::error::{Error, Result};
use crate::marginals::{LognormalSeverity, SeverityDistribution};
use crate::model::{active_set_probabilities, claims_from_exceedances, ActiveSet, CombBernoulliModel};
use crate::rng::{derive_seed, rng_from_seed};

/// One process per non-empty subset; beyond this the simulator refuses.
pub const MAX_LEVY_DIM: usize = 16;
/// Rejection rates below this starve the conditional severity sampler.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Attempts made before the acceptance rate is judged.
const STARVATION_WINDOW: usize = 100_000;

/// Intensities `λ_I^⊥` of the processes where exactly the components in `I`
/// jump, indexed by bit mask (entry `0` is unused and zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySet {
    pub dim: usize,
    pub horizon: f64,
    pub lambda_perp: Vec<f64>,
}

impl IntensitySet {
    pub fn new(dim: usize, horizon: f64, lambda_perp: Vec<f64>) -> Result<Self> {
        if lambda_perp.len() != 1 << dim {
            return Err(Error::Shape(format!(
                "expected {} intensities, got {}",
                1usize << dim,
                lambda_perp.len()
            )));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Parameter(format!("horizon must be positive, got {horizon}")));
        }
        if let Some(l) = lambda_perp.iter().skip(1).find(|l| !(**l >= 0.0 && l.is_finite())) {
            return Err(Error::Parameter(format!("intensity {l} is not a finite non-negative number")));
        }
        Ok(Self {
            dim,
            horizon,
            lambda_perp,
        })
    }

    /// `λ_I^⊥` for an index set.
    pub fn get(&self, indices: &[usize]) -> f64 {
        self.lambda_perp[indices.iter().fold(0usize, |m, &i| m | 1 << i)]
    }

    /// Marginal intensity `λ_i = Σ_{I∋i} λ_I^⊥`.
    pub fn component(&self, i: usize) -> f64 {
        (1..self.lambda_perp.len())
            .filter(|m| m >> i & 1 == 1)
            .map(|m| self.lambda_perp[m])
            .sum()
    }

    /// Total rate of events of any kind.
    pub fn total(&self) -> f64 {
        self.lambda_perp.iter().skip(1).sum()
    }
}

/// `λ_I^⊥ = P(S(X) = I) / Δt` for every non-empty `I`.
pub fn intensities_from_model(model: &CombBernoulliModel, dt: f64, horizon: f64) -> Result<IntensitySet> {
    if !(dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    let mut probs = active_set_probabilities(model)?;
    probs[0] = 0.0;
    for p in probs.iter_mut() {
        // Möbius cancellation can leave tiny negatives
        *p = p.max(0.0) / dt;
    }
    IntensitySet::new(model.dim(), horizon, probs)
}

/// Intensities estimated from `draws` simulated periods; used when the
/// exact active-set probabilities are unavailable (Student-t copulas).
pub fn empirical_intensities(
    model: &CombBernoulliModel,
    family: CopulaFamily,
    draws: usize,
    dt: f64,
    horizon: f64,
    seed: u64,
) -> Result<IntensitySet> {
    let d = model.dim();
    if d > MAX_LEVY_DIM {
        return Err(Error::Domain(format!("{d} components exceed the limit of {MAX_LEVY_DIM}")));
    }
    let mut counts = vec![0usize; 1 << d];
    let mut sampler = ExceedanceSampler::new(&model.correlation, family)?;
    let mut rng = rng_from_seed(seed);
    let thresholds: Vec<f64> = model.marginals.iter().map(|m| sampler.upper_threshold(m.p)).collect();
    for _ in 0..draws {
        let y = sampler.draw_scores(&mut rng);
        let mask = y
            .iter()
            .zip(&thresholds)
            .enumerate()
            .fold(0usize, |m, (i, (&yi, &c))| if yi > c { m | 1 << i } else { m });
        counts[mask] += 1;
    }
    let mut lambda: Vec<f64> = counts.iter().map(|&c| c as f64 / draws as f64 / dt).collect();
    lambda[0] = 0.0;
    IntensitySet::new(d, horizon, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevyEvent {
    pub time: f64,
    pub losses: Vec<f64>,
}

impl LevyEvent {
    pub fn active(&self) -> ActiveSet {
        ActiveSet {
            indices: (0..self.losses.len()).filter(|&i| self.losses[i] > 0.0).collect(),
        }
    }
}

/// Simulate `2^d − 1` independent Poisson processes on `(0, T]` and attach to
/// each event of process `I` a loss vector drawn from the model's law given
/// that the active set is exactly `I`, by rejection.
pub fn simulate_levy(intensities: &IntensitySet, model: &CombBernoulliModel, seed: u64) -> Result<Vec<LevyEvent>> {
    simulate_levy_with_family(intensities, model, CopulaFamily::Gaussian, seed)
}

pub fn simulate_levy_with_family(
    intensities: &IntensitySet,
    model: &CombBernoulliModel,
    family: CopulaFamily,
    seed: u64,
) -> Result<Vec<LevyEvent>> {
    let d = model.dim();
    if d > MAX_LEVY_DIM {
        return Err(Error::Domain(format!(
            "{} subset processes for d = {d} exceed the limit of d <= {MAX_LEVY_DIM}",
            (1u64 << d.min(63)) - 1
        )));
    }
    if intensities.dim != d {
        return Err(Error::Shape(format!("intensities for d = {} but model has d = {d}", intensities.dim)));
    }
    let t_end = intensities.horizon;
    let sampler = ExceedanceSampler::new(&model.correlation, family)?;
    let thresholds: Vec<f64> = model.marginals.iter().map(|m| sampler.upper_threshold(m.p)).collect();
    let mut keyed: Vec<(f64, usize, LevyEvent)> = Vec::new();
    let mut v = vec![0.0; d];
    for mask in 1..1usize << d {
        let lambda = intensities.lambda_perp[mask];
        let mut rng = rng_from_seed(derive_seed(seed, mask as u64));
        if lambda <= 0.0 {
            continue;
        }
        let count = Poisson::new(lambda * t_end)
            .map_err(|e| Error::Parameter(e.to_string()))?
            .sample(&mut rng) as usize;
        let mut s = sampler.clone();
        let (mut attempts, mut accepted) = (0usize, 0usize);
        for _ in 0..count {
            let time = t_end * (1.0 - rng.random::<f64>());
            let losses = loop {
                attempts += 1;
                // screen on scores; exceedances only for candidates
                let y = s.draw_scores(&mut rng);
                let candidate = y
                    .iter()
                    .zip(&thresholds)
                    .enumerate()
                    .all(|(i, (&yi, &c))| (yi > c) == (mask >> i & 1 == 1));
                if candidate {
                    s.exceedances(&mut v);
                    let hit = v
                        .iter()
                        .zip(&model.marginals)
                        .enumerate()
                        .all(|(i, (&vi, m))| (vi < m.p) == (mask >> i & 1 == 1));
                    if hit {
                        accepted += 1;
                        break claims_from_exceedances(model, &v);
                    }
                }
                if attempts >= STARVATION_WINDOW && (accepted as f64) < MIN_ACCEPTANCE * attempts as f64 {
                    return Err(Error::SamplerStarved {
                        subset: ActiveSet::from_mask(mask as u64, d).indices,
                        acceptance: accepted as f64 / attempts as f64,
                    });
                }
            };
            keyed.push((time, mask, LevyEvent { time, losses }));
        }
    }
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(keyed.into_iter().map(|(_, _, e)| e).collect())
}

// ---------------------------------------------------------------------------
// Bivariate Clayton Lévy copula

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaytonLevyCopula {
    pub delta: f64,
}

impl ClaytonLevyCopula {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Parameter(format!("Clayton parameter must be positive, got {delta}")));
        }
        Ok(Self { delta })
    }

    /// `(u^−δ + v^−δ)^(−1/δ)`, zero when either argument is zero.
    pub fn value(&self, u: f64, v: f64) -> f64 {
        if u <= 0.0 || v <= 0.0 {
            return 0.0;
        }
        let d = self.delta;
        // factor out the larger argument's term for stability at small δ
        let (a, b) = (u.powf(-d), v.powf(-d));
        let m = a.max(b);
        m.powf(-1.0 / d) * (a / m + b / m).powf(-1.0 / d)
    }

    /// `∂𝔉/∂u`.
    pub fn d_u(&self, u: f64, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        let d = self.delta;
        // (1 + (v/u)^−δ)^(−1/δ−1)
        (1.0 + (u / v).powf(d)).powf(-1.0 / d - 1.0)
    }

    /// `∂²𝔉/∂u∂v`.
    pub fn d_uv(&self, u: f64, v: f64) -> f64 {
        let d = self.delta;
        let s = u.powf(-d) + v.powf(-d);
        (1.0 + d) * s.powf(-1.0 / d - 2.0) * u.powf(-d - 1.0) * v.powf(-d - 1.0)
    }
}

/// Parameters of the bivariate compound-Poisson model with a Clayton Lévy
/// copula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateLevyParams {
    pub lambda: [f64; 2],
    pub severities: [LognormalSeverity; 2],
    pub copula: ClaytonLevyCopula,
}

impl BivariateLevyParams {
    /// `(λ_1^⊥, λ_2^⊥, λ_12^⊥)` induced by the Lévy copula.
    pub fn subset_intensities(&self) -> Result<[f64; 3]> {
        let [l1, l2] = self.lambda;
        if !(l1 > 0.0 && l2 > 0.0) {
            return Err(Error::Parameter(format!("intensities must be positive, got ({l1}, {l2})")));
        }
        let both = self.copula.value(l1, l2);
        let out = [l1 - both, l2 - both, both];
        if out.iter().any(|&l| l < 0.0) {
            return Err(Error::Parameter(format!("induced subset intensities {out:?} are negative")));
        }
        Ok(out)
    }
}

fn check_event_2d(e: &LevyEvent) -> Result<(bool, bool)> {
    if e.losses.len() != 2 {
        return Err(Error::Shape(format!("event has {} losses, expected 2", e.losses.len())));
    }
    if e.losses.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(Error::Domain(format!("invalid losses {:?}", e.losses)));
    }
    let (a, b) = (e.losses[0] > 0.0, e.losses[1] > 0.0);
    if !a && !b {
        return Err(Error::Domain(format!("event at {} has no positive loss", e.time)));
    }
    Ok((a, b))
}

/// Log-likelihood of a bivariate event record on `(0, T]`: the compensator
/// `−(λ_1 + λ_2 − λ_12^⊥) T` plus, per event, the log Lévy density of its
/// jump sizes.
pub fn continuous_time_loglik_2d(events: &[LevyEvent], params: &BivariateLevyParams, horizon: f64) -> Result<f64> {
    let [l1, l2] = params.lambda;
    let [p1, p2, p12] = params.subset_intensities()?;
    let [s1, s2] = &params.severities;
    let c = params.copula;
    let mut ll = -(p1 + p2 + p12) * horizon;
    for e in events {
        let v = match check_event_2d(e)? {
            (true, false) => {
                let x = e.losses[0];
                let zeta = 1.0 - c.d_u(l1 * s1.survival(x), l2);
                l1.ln() + s1.ln_pdf(x) + zeta.ln()
            }
            (false, true) => {
                let x = e.losses[1];
                let zeta = 1.0 - c.d_u(l2 * s2.survival(x), l1);
                l2.ln() + s2.ln_pdf(x) + zeta.ln()
            }
            _ => {
                let (x, y) = (e.losses[0], e.losses[1]);
                let zeta = c.d_uv(l1 * s1.survival(x), l2 * s2.survival(y));
                l1.ln() + l2.ln() + s1.ln_pdf(x) + s2.ln_pdf(y) + zeta.ln()
            }
        };
        ll += v;
    }
    Ok(ll)
}

/// Clayton survival copula `(a^−δ + b^−δ − 1)^(−1/δ)` and its partials,
/// the discrete-time counterpart of [`ClaytonLevyCopula`].
#[derive(Debug, Clone, Copy, PartialEq)]
struct ClaytonSurvival {
    delta: f64,
}

impl ClaytonSurvival {
    fn value(&self, a: f64, b: f64) -> f64 {
        let d = self.delta;
        (a.powf(-d) + b.powf(-d) - 1.0).powf(-1.0 / d)
    }

    fn d_a(&self, a: f64, b: f64) -> f64 {
        let d = self.delta;
        (a.powf(-d) + b.powf(-d) - 1.0).powf(-1.0 / d - 1.0) * a.powf(-d - 1.0)
    }

    fn d_ab(&self, a: f64, b: f64) -> f64 {
        let d = self.delta;
        (1.0 + d) * (a.powf(-d) + b.powf(-d) - 1.0).powf(-1.0 / d - 2.0) * a.powf(-d - 1.0) * b.powf(-d - 1.0)
    }
}

/// Discrete-time log-likelihood of the same record observed on a grid of
/// step `dt`: claim probabilities `p_i = λ_i dt`, a Clayton survival copula
/// with the Lévy copula's parameter, and one event at most per period.
/// The `n_events · ln dt` term that vanishes under scaling is removed so the
/// value is comparable with [`continuous_time_loglik_2d`].
pub fn poisson_scaled_loglik_2d(
    events: &[LevyEvent],
    params: &BivariateLevyParams,
    horizon: f64,
    dt: f64,
) -> Result<f64> {
    let [l1, l2] = params.lambda;
    let (q1, q2) = (l1 * dt, l2 * dt);
    if !(q1 < 1.0 && q2 < 1.0 && dt > 0.0) {
        return Err(Error::Parameter(format!("step {dt} gives claim probabilities outside (0, 1)")));
    }
    let periods = (horizon / dt).round() as usize;
    if ((periods as f64) * dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::Parameter(format!("step {dt} does not divide the horizon {horizon}")));
    }
    let mut slots: Vec<usize> = events.iter().map(|e| ((e.time / dt).ceil() as usize).max(1)).collect();
    slots.sort_unstable();
    if slots.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain(format!("two events share a period at step {dt}")));
    }
    let c = ClaytonSurvival {
        delta: params.copula.delta,
    };
    let [s1, s2] = &params.severities;
    let quiet = (1.0 - q1 - q2 + c.value(q1, q2)).ln();
    let mut ll = (periods - events.len()) as f64 * quiet;
    for e in events {
        let v = match check_event_2d(e)? {
            (true, false) => {
                let x = e.losses[0];
                q1.ln() + s1.ln_pdf(x) + (1.0 - c.d_a(q1 * s1.survival(x), q2)).ln()
            }
            (false, true) => {
                let x = e.losses[1];
                q2.ln() + s2.ln_pdf(x) + (1.0 - c.d_a(q2 * s2.survival(x), q1)).ln()
            }
            _ => {
                let (x, y) = (e.losses[0], e.losses[1]);
                q1.ln()
                    + q2.ln()
                    + s1.ln_pdf(x)
                    + s2.ln_pdf(y)
                    + c.d_ab(q1 * s1.survival(x), q2 * s2.survival(y)).ln()
            }
        };
        ll += v - dt.ln();
    }
    Ok(ll)
}
