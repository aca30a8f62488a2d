//! The Comb-Bernoulli model: claim series, active sets, exact log-likelihood,
//! active-set probabilities and simulation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copula::{sample_scores, ConditionalBlock, CopulaFamily, ExceedanceSampler, GaussianCopula, SIM_BLOCK, U_CLAMP};
use crate::error::{Error, Result};
use crate::marginals::{MixedMarginal, SeverityDistribution};
use crate::mvn::normal::{ndtri, norm_cdf, norm_sf};
use crate::mvn::{bvn_cdf, mvn_cdf, tvn_cdf, CorrelationMatrix, MvnOptions};
use crate::rng::{derive_seed, rng_from_seed};

/// Probabilities are floored here before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-300;

// ---------------------------------------------------------------------------
// Claim series

/// `N x d` matrix of non-negative claim amounts, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ClaimSeries {
    labels: Vec<String>,
    values: Vec<f64>,
    n_rows: usize,
    /// Opaque per-row labels such as dates.
    pub row_labels: Option<Vec<String>>,
}

impl ClaimSeries {
    pub fn new(labels: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = labels.len();
        if d == 0 {
            return Err(Error::Shape("claim series needs at least one column".into()));
        }
        if rows.is_empty() {
            return Err(Error::Shape("claim series needs at least one row".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(Error::Domain(format!("duplicate column label {l:?}")));
            }
        }
        let mut values = Vec::with_capacity(rows.len() * d);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Shape(format!(
                    "row {r} has {} entries, expected {d}",
                    row.len()
                )));
            }
            for (c, &v) in row.iter().enumerate() {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Domain(format!(
                        "row {r} column {c}: claim {v} is not a finite non-negative number"
                    )));
                }
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            labels,
            values,
            n_rows: rows.len(),
            row_labels: None,
        })
    }

    /// Columns labelled `x1..xd`.
    pub fn unlabeled(rows: Vec<Vec<f64>>) -> Result<Self> {
        let d = rows.first().map_or(0, |r| r.len());
        Self::new(default_labels(d), rows)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.n_cols();
        &self.values[i * d..(i + 1) * d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Sub-series on the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if let Some(&c) = cols.iter().find(|&&c| c >= self.n_cols()) {
            return Err(Error::Shape(format!("column {c} out of range")));
        }
        let labels = cols.iter().map(|&c| self.labels[c].clone()).collect();
        let rows = self.rows().map(|r| cols.iter().map(|&c| r[c]).collect()).collect();
        let mut out = Self::new(labels, rows)?;
        out.row_labels = self.row_labels.clone();
        Ok(out)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(|r| r.to_vec()).collect()
    }
}

pub fn default_labels(d: usize) -> Vec<String> {
    (1..=d).map(|i| format!("x{i}")).collect()
}

// ---------------------------------------------------------------------------
// Active sets

/// Sorted indices of the strictly positive components of a claim vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ActiveSet {
    pub indices: Vec<usize>,
}

impl ActiveSet {
    pub fn of(x: &[f64]) -> Result<Self> {
        if let Some(v) = x.iter().find(|&&v| !(v >= 0.0)) {
            return Err(Error::Domain(format!("claims must be non-negative, got {v}")));
        }
        Ok(Self {
            indices: (0..x.len()).filter(|&i| x[i] > 0.0).collect(),
        })
    }

    pub fn cardinality(&self) -> usize {
        self.indices.len()
    }

    /// Bit mask with bit `i` set for each active index (requires indices < 64).
    pub fn mask(&self) -> u64 {
        self.indices.iter().fold(0, |m, &i| m | (1u64 << i))
    }

    pub fn from_mask(mask: u64, d: usize) -> Self {
        Self {
            indices: (0..d).filter(|&i| mask >> i & 1 == 1).collect(),
        }
    }
}

/// `S(x) = {i : x_i > 0}`.
pub fn active_set(x: &[f64]) -> Result<ActiveSet> {
    ActiveSet::of(x)
}

// ---------------------------------------------------------------------------
// Model

/// `d` mixed marginals coupled by a Gaussian copula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombBernoulliModel {
    pub marginals: Vec<MixedMarginal>,
    pub correlation: CorrelationMatrix,
    #[serde(skip, default)]
    pub mvn: MvnOptions,
}

impl CombBernoulliModel {
    pub fn new(marginals: Vec<MixedMarginal>, correlation: CorrelationMatrix) -> Result<Self> {
        if marginals.len() != correlation.dim() {
            return Err(Error::Shape(format!(
                "{} marginals but a {}x{} correlation matrix",
                marginals.len(),
                correlation.dim(),
                correlation.dim()
            )));
        }
        for (i, m) in marginals.iter().enumerate() {
            MixedMarginal::new(m.p, m.severity)
                .map_err(|e| Error::Parameter(format!("marginal {i}: {e}")))?;
        }
        Ok(Self {
            marginals,
            correlation,
            mvn: MvnOptions::default(),
        })
    }

    pub fn with_mvn(mut self, mvn: MvnOptions) -> Self {
        self.mvn = mvn;
        self
    }

    pub fn dim(&self) -> usize {
        self.marginals.len()
    }

    pub fn copula(&self) -> GaussianCopula {
        GaussianCopula {
            correlation: self.correlation.clone(),
            mvn: self.mvn,
        }
    }
}

// ---------------------------------------------------------------------------
// Normal scores of the mixed marginal cdf

#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct ClampCount(pub(crate) usize);

/// `Φ⁻¹(F(x))` with `F(x)` clamped into `[U_CLAMP, 1 - U_CLAMP]`. The
/// smaller of `F` and `1 - F` is used so upper-tail claims keep precision.
pub(crate) fn mixed_score<S: SeverityDistribution>(m: &MixedMarginal<S>, x: f64, clamps: &mut ClampCount) -> f64 {
    // exceedance 1 - F(x)
    let v = if x > 0.0 { m.p * m.severity.survival(x) } else { m.p };
    let u = 1.0 - v;
    if v < U_CLAMP {
        clamps.0 += 1;
        return -ndtri(U_CLAMP);
    }
    if u < U_CLAMP {
        clamps.0 += 1;
        return ndtri(U_CLAMP);
    }
    if v < 0.5 {
        -ndtri(v)
    } else if x > 0.0 {
        ndtri((1.0 - m.p) + m.p * m.severity.cdf(x))
    } else {
        ndtri(u)
    }
}

// ---------------------------------------------------------------------------
// Log-likelihood

/// Log-likelihood contributions of one active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveSetContribution {
    pub active: Vec<usize>,
    pub rows: usize,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LikelihoodDiagnostics {
    /// Marginal cdf values moved into `[1e-12, 1 - 1e-12]`.
    pub clamp_count: usize,
    /// Probabilities raised to the log floor.
    pub floor_count: usize,
    pub by_active_set: Vec<ActiveSetContribution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLikelihood {
    pub value: f64,
    pub diagnostics: LikelihoodDiagnostics,
}

/// Precomputed per-row quantities for repeated likelihood evaluation at
/// different correlation matrices with frozen marginals.
#[derive(Debug, Clone)]
pub struct LikelihoodEvaluator {
    d: usize,
    n: usize,
    /// normal scores, row-major `n x d`
    z: Vec<f64>,
    /// `Σ_{i∈S} ln(p_i ψ_i(x_i))` per row
    marginal_terms: Vec<f64>,
    /// group id per row
    group_of_row: Vec<usize>,
    groups: Vec<ActiveSet>,
    group_rows: Vec<usize>,
    clamp_count: usize,
    mvn: MvnOptions,
}

impl LikelihoodEvaluator {
    pub fn new<S: SeverityDistribution + Sync>(
        marginals: &[MixedMarginal<S>],
        series: &ClaimSeries,
        mvn: MvnOptions,
    ) -> Result<Self> {
        let d = marginals.len();
        if series.n_cols() != d {
            return Err(Error::Shape(format!(
                "series has {} columns but model has dimension {d}",
                series.n_cols()
            )));
        }
        let n = series.n_rows();
        let mut z = Vec::with_capacity(n * d);
        let mut marginal_terms = Vec::with_capacity(n);
        let mut index: BTreeMap<ActiveSet, usize> = BTreeMap::new();
        let mut group_of_row = Vec::with_capacity(n);
        let mut clamps = ClampCount::default();
        for (r, row) in series.rows().enumerate() {
            let s = ActiveSet::of(row)?;
            let mut term = 0.0;
            for (&x, m) in row.iter().zip(marginals) {
                z.push(mixed_score(m, x, &mut clamps));
                if x > 0.0 {
                    let t = m.ln_density_positive(x);
                    if !t.is_finite() {
                        return Err(Error::LikelihoodUnderflow { row: r });
                    }
                    term += t;
                }
            }
            marginal_terms.push(term);
            let next = index.len();
            group_of_row.push(*index.entry(s).or_insert(next));
        }
        let mut groups = vec![ActiveSet { indices: vec![] }; index.len()];
        for (s, g) in index {
            groups[g] = s;
        }
        // groups are numbered by first appearance
        let mut group_rows = vec![0; groups.len()];
        for &g in &group_of_row {
            group_rows[g] += 1;
        }
        Ok(Self {
            d,
            n,
            z,
            marginal_terms,
            group_of_row,
            groups,
            group_rows,
            clamp_count: clamps.0,
            mvn,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Per-row log-likelihood contributions and the floor count.
    pub fn row_contributions(&self, r: &CorrelationMatrix) -> Result<(Vec<f64>, usize)> {
        if r.dim() != self.d {
            return Err(Error::Shape(format!(
                "correlation is {}x{} but data has {} columns",
                r.dim(),
                r.dim(),
                self.d
            )));
        }
        let blocks: Vec<Option<ConditionalBlock>> = self
            .groups
            .iter()
            .map(|s| {
                if s.indices.is_empty() {
                    Ok(None)
                } else {
                    ConditionalBlock::new(r, &s.indices).map(Some)
                }
            })
            .collect::<Result<_>>()?;
        // all-zero rows share one probability; seed from the first such row
        let zero_value = match self.groups.iter().position(|s| s.indices.is_empty()) {
            Some(g) => {
                let first = self.group_of_row.iter().position(|&x| x == g).unwrap_or(0);
                let z = &self.z[first * self.d..(first + 1) * self.d];
                let opts = self.mvn.with_seed(derive_seed(self.mvn.seed, first as u64));
                Some(mvn_cdf(z, r, &opts)?)
            }
            None => None,
        };
        let results: Vec<Result<(f64, bool)>> = (0..self.n)
            .into_par_iter()
            .map(|row| {
                let g = self.group_of_row[row];
                let z = &self.z[row * self.d..(row + 1) * self.d];
                let (ln_ratio, prob) = match &blocks[g] {
                    None => (0.0, zero_value.expect("zero group has a value")),
                    Some(b) => {
                        let opts = self.mvn.with_seed(derive_seed(self.mvn.seed, row as u64));
                        b.evaluate(z, &opts)?
                    }
                };
                let floored = prob < LOG_FLOOR;
                let v = ln_ratio + prob.max(LOG_FLOOR).ln() + self.marginal_terms[row];
                if !v.is_finite() {
                    return Err(Error::LikelihoodUnderflow { row });
                }
                Ok((v, floored))
            })
            .collect();
        let mut out = Vec::with_capacity(self.n);
        let mut floors = 0;
        for res in results {
            let (v, f) = res?;
            out.push(v);
            floors += f as usize;
        }
        Ok((out, floors))
    }

    /// Total log-likelihood, summed in row order.
    pub fn evaluate(&self, r: &CorrelationMatrix) -> Result<LogLikelihood> {
        let (rows, floor_count) = self.row_contributions(r)?;
        let mut sums = vec![0.0; self.groups.len()];
        let mut value = 0.0;
        for (row, v) in rows.iter().enumerate() {
            value += v;
            sums[self.group_of_row[row]] += v;
        }
        let mut by_active_set: Vec<ActiveSetContribution> = self
            .groups
            .iter()
            .zip(sums)
            .zip(&self.group_rows)
            .map(|((s, loglik), &rows)| ActiveSetContribution {
                active: s.indices.clone(),
                rows,
                loglik,
            })
            .collect();
        by_active_set.sort_by(|a, b| a.active.len().cmp(&b.active.len()).then(a.active.cmp(&b.active)));
        Ok(LogLikelihood {
            value,
            diagnostics: LikelihoodDiagnostics {
                clamp_count: self.clamp_count,
                floor_count,
                by_active_set,
            },
        })
    }

    /// Total only; the optimizer's objective.
    pub fn value(&self, r: &CorrelationMatrix) -> Result<f64> {
        let (rows, _) = self.row_contributions(r)?;
        Ok(rows.iter().sum())
    }
}

/// Exact log-likelihood of a claim series under the model.
pub fn log_likelihood(model: &CombBernoulliModel, series: &ClaimSeries) -> Result<LogLikelihood> {
    LikelihoodEvaluator::new(&model.marginals, series, model.mvn)?.evaluate(&model.correlation)
}

// ---------------------------------------------------------------------------
// Closed forms for d = 2 and d = 3

struct Scores {
    z: Vec<f64>,
    ln_marg: Vec<f64>,
    pos: Vec<bool>,
}

fn scores(model: &CombBernoulliModel, x: &[f64]) -> Result<Scores> {
    let mut c = ClampCount::default();
    let mut z = Vec::new();
    let mut ln_marg = Vec::new();
    let mut pos = Vec::new();
    for (&xi, m) in x.iter().zip(&model.marginals) {
        if !(xi >= 0.0) {
            return Err(Error::Domain(format!("claims must be non-negative, got {xi}")));
        }
        z.push(mixed_score(m, xi, &mut c));
        ln_marg.push(if xi > 0.0 { m.ln_density_positive(xi) } else { 0.0 });
        pos.push(xi > 0.0);
    }
    Ok(Scores { z, ln_marg, pos })
}

/// Per-observation log-likelihood of a bivariate model, written out branch by branch.
pub fn loglik_closed_form_2d(model: &CombBernoulliModel, x1: f64, x2: f64) -> Result<f64> {
    if model.dim() != 2 {
        return Err(Error::Shape(format!("closed form needs d = 2, model has d = {}", model.dim())));
    }
    let s = scores(model, &[x1, x2])?;
    let rho = model.correlation.get(0, 1);
    let q = 1.0 - rho * rho;
    let (z1, z2) = (s.z[0], s.z[1]);
    let v = match (s.pos[0], s.pos[1]) {
        (false, false) => bvn_cdf(z1, z2, rho).max(LOG_FLOOR).ln(),
        (true, false) => s.ln_marg[0] + norm_cdf((z2 - rho * z1) / q.sqrt()).max(LOG_FLOOR).ln(),
        (false, true) => s.ln_marg[1] + norm_cdf((z1 - rho * z2) / q.sqrt()).max(LOG_FLOOR).ln(),
        (true, true) => {
            s.ln_marg[0] + s.ln_marg[1] - 0.5 * q.ln() - rho * rho * (z1 * z1 + z2 * z2) / (2.0 * q)
                + rho * z1 * z2 / q
        }
    };
    Ok(v)
}

/// Per-observation log-likelihood of a trivariate model, written out branch by branch.
pub fn loglik_closed_form_3d(model: &CombBernoulliModel, x: &[f64; 3]) -> Result<f64> {
    if model.dim() != 3 {
        return Err(Error::Shape(format!("closed form needs d = 3, model has d = {}", model.dim())));
    }
    let s = scores(model, x)?;
    let r = |i: usize, j: usize| model.correlation.get(i, j);
    let z = &s.z;
    let active: Vec<usize> = (0..3).filter(|&i| s.pos[i]).collect();
    let inactive: Vec<usize> = (0..3).filter(|&i| !s.pos[i]).collect();
    let marg: f64 = active.iter().map(|&i| s.ln_marg[i]).sum();
    let ln = |p: f64| p.max(LOG_FLOOR).ln();
    let v = match active.len() {
        0 => ln(tvn_cdf([z[0], z[1], z[2]], r(0, 1), r(0, 2), r(1, 2), model.mvn.tol)),
        1 => {
            let i = active[0];
            let (j, k) = (inactive[0], inactive[1]);
            let (rij, rik, rjk) = (r(i, j), r(i, k), r(j, k));
            let sj = (1.0 - rij * rij).sqrt();
            let sk = (1.0 - rik * rik).sqrt();
            let rho = (rjk - rij * rik) / (sj * sk);
            marg + ln(bvn_cdf((z[j] - rij * z[i]) / sj, (z[k] - rik * z[i]) / sk, rho))
        }
        2 => {
            let (i, j) = (active[0], active[1]);
            let k = inactive[0];
            let (rij, rik, rjk) = (r(i, j), r(i, k), r(j, k));
            let q = 1.0 - rij * rij;
            let dens = -0.5 * q.ln() - rij * rij * (z[i] * z[i] + z[j] * z[j]) / (2.0 * q)
                + rij * z[i] * z[j] / q;
            let mean = ((rik - rij * rjk) * z[i] + (rjk - rij * rik) * z[j]) / q;
            let var = 1.0 - (rik * rik + rjk * rjk - 2.0 * rij * rik * rjk) / q;
            marg + dens + ln(norm_cdf((z[k] - mean) / var.sqrt()))
        }
        _ => {
            let (a, b, c) = (r(0, 1), r(0, 2), r(1, 2));
            let det = 1.0 - a * a - b * b - c * c + 2.0 * a * b * c;
            // inverse by cofactors
            let inv = [
                [1.0 - c * c, b * c - a, a * c - b],
                [b * c - a, 1.0 - b * b, a * b - c],
                [a * c - b, a * b - c, 1.0 - a * a],
            ];
            let mut quad = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let e = inv[i][j] / det - if i == j { 1.0 } else { 0.0 };
                    quad += z[i] * e * z[j];
                }
            }
            marg - 0.5 * det.ln() - 0.5 * quad
        }
    };
    Ok(v)
}

// ---------------------------------------------------------------------------
// Active-set probabilities

/// `P(S(X) = I)` for every `I ⊆ {0..d-1}`, indexed by bit mask.
///
/// All restricted survival copula values `C̄_J(p_J)` are computed once and
/// combined by a Möbius transform over supersets.
pub fn active_set_probabilities(model: &CombBernoulliModel) -> Result<Vec<f64>> {
    let d = model.dim();
    if d > 20 {
        return Err(Error::Domain(format!("active-set enumeration limited to d <= 20, got {d}")));
    }
    let full = 1usize << d;
    let thresholds: Vec<f64> = model.marginals.iter().map(|m| ndtri(m.p)).collect();
    let mut f: Vec<f64> = (0..full)
        .into_par_iter()
        .map(|mask| {
            if mask == 0 {
                return Ok(1.0);
            }
            let idx: Vec<usize> = (0..d).filter(|&i| mask >> i & 1 == 1).collect();
            let z: Vec<f64> = idx.iter().map(|&i| thresholds[i]).collect();
            let opts = model.mvn.with_seed(derive_seed(model.mvn.seed, mask as u64));
            mvn_cdf(&z, &model.correlation.submatrix(&idx), &opts)
        })
        .collect::<Result<_>>()?;
    for i in 0..d {
        let bit = 1usize << i;
        for mask in 0..full {
            if mask & bit == 0 {
                f[mask] -= f[mask | bit];
            }
        }
    }
    Ok(f)
}

/// `P(S(X) = I)` for one index set.
pub fn active_set_probability(model: &CombBernoulliModel, indices: &[usize]) -> Result<f64> {
    let d = model.dim();
    let mut mask = 0usize;
    for &i in indices {
        if i >= d {
            return Err(Error::Domain(format!("index {i} out of range for d = {d}")));
        }
        mask |= 1 << i;
    }
    Ok(active_set_probabilities(model)?[mask])
}

// ---------------------------------------------------------------------------
// Simulation

/// Draw `n` claim vectors: copula scores `y = L ε`, then
/// `x_i = 0` when `u_i <= 1 - p_i`, else `Ψ_i⁻¹((u_i - (1 - p_i)) / p_i)`.
///
/// The threshold test and the severity quantile are evaluated on the upper
/// tail `1 - u_i = Φ(-y_i)` to keep precision for large claims.
pub fn simulate(model: &CombBernoulliModel, n: usize, seed: u64) -> Result<ClaimSeries> {
    if n == 0 {
        return Err(Error::Domain("simulation needs n >= 1".into()));
    }
    let rows = sample_scores(&model.correlation.cholesky(), n, seed)
        .into_par_iter()
        .map(|y| claims_from_scores(model, &y))
        .collect();
    ClaimSeries::new(default_labels(model.dim()), rows)
}

/// As [`simulate`] with the model's correlation driving a copula of the
/// given family. The Gaussian family reproduces [`simulate`] draw for draw.
pub fn simulate_with_family(
    model: &CombBernoulliModel,
    family: CopulaFamily,
    n: usize,
    seed: u64,
) -> Result<ClaimSeries> {
    if n == 0 {
        return Err(Error::Domain("simulation needs n >= 1".into()));
    }
    let sampler = ExceedanceSampler::new(&model.correlation, family)?;
    let d = model.dim();
    let rows = (0..n.div_ceil(SIM_BLOCK))
        .into_par_iter()
        .flat_map_iter(|b| {
            let rows = SIM_BLOCK.min(n - b * SIM_BLOCK);
            let mut rng = rng_from_seed(derive_seed(seed, b as u64));
            let mut s = sampler.clone();
            let mut v = vec![0.0; d];
            (0..rows)
                .map(|_| {
                    s.draw(&mut rng, &mut v);
                    claims_from_exceedances(model, &v)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    ClaimSeries::new(default_labels(d), rows)
}

pub(crate) fn claims_from_exceedances(model: &CombBernoulliModel, v: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(&model.marginals)
        .map(|(&vi, m)| m.quantile_from_exceedance(vi))
        .collect()
}

pub(crate) fn claims_from_scores(model: &CombBernoulliModel, y: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(&model.marginals)
        .map(|(&yi, m)| m.quantile_from_exceedance(norm_sf(yi)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model2(rho: f64) -> CombBernoulliModel {
        CombBernoulliModel::new(
            vec![
                MixedMarginal::lognormal(0.4, 0.2, 0.9).unwrap(),
                MixedMarginal::lognormal(0.3, -0.5, 1.2).unwrap(),
            ],
            CorrelationMatrix::bivariate(rho).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn active_set_examples() {
        let s = active_set(&[0.0, 12.5, 4.6, 0.0, 7.0]).unwrap();
        assert_eq!(s.indices, vec![1, 2, 4]);
        assert_eq!(s.cardinality(), 3);
        assert!(active_set(&[0.0; 4]).unwrap().indices.is_empty());
        assert_eq!(active_set(&[1.0, 2.0]).unwrap().indices, vec![0, 1]);
        assert!(active_set(&[1.0, -2.0]).is_err());
        assert_eq!(ActiveSet::from_mask(0b101, 3).indices, vec![0, 2]);
    }

    #[test]
    fn zero_row_is_copula_at_atoms() {
        let m = model2(0.6);
        let series = ClaimSeries::unlabeled(vec![vec![0.0, 0.0]]).unwrap();
        let ll = log_likelihood(&m, &series).unwrap().value;
        let c = m.copula().cdf(&[0.6, 0.7]).unwrap();
        assert!((ll - c.ln()).abs() < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let m = model2(0.1);
        let s3 = ClaimSeries::unlabeled(vec![vec![0.0, 1.0, 2.0]]).unwrap();
        assert!(matches!(log_likelihood(&m, &s3), Err(Error::Shape(_))));
        assert!(matches!(loglik_closed_form_3d(&m, &[0.0; 3]), Err(Error::Shape(_))));
    }

    #[test]
    fn independent_probabilities() {
        let m = CombBernoulliModel::new(
            vec![
                MixedMarginal::lognormal(0.1, 0.0, 1.0).unwrap(),
                MixedMarginal::lognormal(0.2, 0.0, 1.0).unwrap(),
            ],
            CorrelationMatrix::identity(2),
        )
        .unwrap();
        let p = active_set_probabilities(&m).unwrap();
        assert!((p[0b01] - 0.1 * 0.8).abs() < 1e-15);
        assert!((p[0b11] - 0.02).abs() < 1e-15);
        assert!((p[0] - 0.9 * 0.8).abs() < 1e-15);
    }

    #[test]
    fn single_index_probability_worked_example() {
        let m = model2(0.5);
        let p1 = active_set_probability(&m, &[0]).unwrap();
        let cbar = m.copula().survival_restricted(&[0, 1], &[0.4, 0.3]).unwrap();
        assert!((p1 - (0.4 - cbar)).abs() < 1e-15);
    }

    #[test]
    fn simulation_is_deterministic_and_no_atoms_at_p_one() {
        let m = CombBernoulliModel::new(
            vec![
                MixedMarginal::lognormal(1.0, 0.0, 1.0).unwrap(),
                MixedMarginal::lognormal(1.0, 1.0, 0.5).unwrap(),
            ],
            CorrelationMatrix::bivariate(0.3).unwrap(),
        )
        .unwrap();
        let a = simulate(&m, 5000, 9).unwrap();
        assert!(a.rows().flatten().all(|&x| x > 0.0));
        assert_eq!(a, simulate(&m, 5000, 9).unwrap());
    }

    #[test]
    fn gaussian_family_reproduces_simulate() {
        let m = model2(0.3);
        let a = simulate(&m, 5000, 21).unwrap();
        let b = simulate_with_family(&m, CopulaFamily::Gaussian, 5000, 21).unwrap();
        assert_eq!(a, b);
        let t = simulate_with_family(&m, CopulaFamily::StudentT { nu: 4.0 }, 5000, 21).unwrap();
        assert_eq!(t.n_rows(), 5000);
    }

    #[test]
    fn positive_share_matches_p() {
        let m = model2(0.7);
        let n = 40_000;
        let s = simulate(&m, n, 21).unwrap();
        for (j, marg) in m.marginals.iter().enumerate() {
            let share = s.column(j).iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
            let band = 3.0 * (marg.p * (1.0 - marg.p) / n as f64).sqrt();
            assert!((share - marg.p).abs() < band, "column {j}: {share}");
        }
    }
}
