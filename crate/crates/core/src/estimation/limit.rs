//! Log-likelihood of the continuous-marginal regime: every claim probability
//! set to one, leaving the copula density times the severity densities.

use serde::{Deserialize, Serialize};

use crate::copula::ConditionalBlock;
use crate::error::{Error, Result};
use crate::marginals::{MixedMarginal, SeverityDistribution};
use crate::model::{mixed_score, ClaimSeries, ClampCount};
use crate::mvn::{CorrelationMatrix, MvnOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitLogLik {
    pub value: f64,
    /// Zero claims seen; their severity cdf is `0` and gets clamped.
    pub zero_entries: usize,
    pub clamp_count: usize,
}

/// `Σ_x [ln c(Ψ(x); R) + Σ_{i∈S(x)} ln ψ_i(x_i)]`. The claim probabilities of
/// `marginals` are ignored.
pub fn limit_loglik<S: SeverityDistribution + Clone>(
    marginals: &[MixedMarginal<S>],
    r: &CorrelationMatrix,
    series: &ClaimSeries,
) -> Result<LimitLogLik> {
    let d = marginals.len();
    if series.n_cols() != d || r.dim() != d {
        return Err(Error::Shape(format!(
            "dimensions disagree: {d} marginals, {} columns, {}x{} correlation",
            series.n_cols(),
            r.dim(),
            r.dim()
        )));
    }
    let continuous: Vec<MixedMarginal<S>> = marginals
        .iter()
        .map(|m| MixedMarginal::new(1.0, m.severity.clone()))
        .collect::<Result<_>>()?;
    let all: Vec<usize> = (0..d).collect();
    let block = ConditionalBlock::new(r, &all)?;
    let opts = MvnOptions::default();
    let mut clamps = ClampCount::default();
    let mut zeros = 0;
    let mut value = 0.0;
    let mut z = vec![0.0; d];
    for (row, x) in series.rows().enumerate() {
        // same association order as the mixed likelihood with p = 1
        let mut term = 0.0;
        for (j, (&xj, m)) in x.iter().zip(&continuous).enumerate() {
            z[j] = mixed_score(m, xj, &mut clamps);
            if xj > 0.0 {
                term += m.ln_density_positive(xj);
            } else {
                zeros += 1;
            }
        }
        let (ln_c, _) = block.evaluate(&z, &opts)?;
        let v = ln_c + term;
        if !v.is_finite() {
            return Err(Error::LikelihoodUnderflow { row });
        }
        value += v;
    }
    Ok(LimitLogLik {
        value,
        zero_entries: zeros,
        clamp_count: clamps.0,
    })
}
