//! Spearman rank correlation, its Gaussian-copula transform and the range of
//! values attainable by breaking ties.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `2 sin(π ρ / 6)`: the Gaussian-copula correlation with Spearman's rho `ρ`.
pub fn spearman_transform(rho: f64) -> f64 {
    2.0 * (PI * rho / 6.0).sin()
}

/// `(6/π) asin(r / 2)`.
pub fn spearman_from_correlation(r: f64) -> f64 {
    6.0 / PI * (r / 2.0).asin()
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = mid;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Sample Spearman correlation with midranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    Ok(pearson(&midranks(x), &midranks(y)))
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!("lengths differ: {} vs {}", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 pairs, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in rank correlation input".into()));
    }
    Ok(())
}

/// Range of Spearman's rho over all tie-breaking rank assignments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpearmanBounds {
    pub min: f64,
    pub max: f64,
    /// One of the series is constant; every value in `[-1, 1]` is attainable.
    pub degenerate: bool,
}

impl SpearmanBounds {
    /// Both endpoints mapped through [`spearman_transform`].
    pub fn correlation_scale(&self) -> (f64, f64) {
        (spearman_transform(self.min), spearman_transform(self.max))
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.min + self.max)
    }
}

/// Spearman's rho from two permutations of `1..=n`.
pub(crate) fn rho_from_ranks(r: &[f64], s: &[f64]) -> f64 {
    let n = r.len() as f64;
    let dot: f64 = r.iter().zip(s).map(|(a, b)| a * b).sum();
    12.0 * dot / (n * (n * n - 1.0)) - 3.0 * (n + 1.0) / (n - 1.0)
}

/// Tied blocks of `x`: index lists sharing a value, plus the rank range each occupies.
fn blocks(x: &[f64]) -> Vec<(Vec<usize>, Vec<f64>)> {
    let n = x.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let members = idx[i..=j].to_vec();
        let ranks = (i..=j).map(|k| (k + 1) as f64).collect();
        out.push((members, ranks));
        i = j + 1;
    }
    out
}

/// Within every block, hand out the block's ranks in the order of the
/// partner's current ranks: increasing for the maximum, decreasing for the
/// minimum. Ties in the partner (none: ranks are a permutation) cannot occur.
fn rearrange(own: &mut [f64], partner: &[f64], blocks: &[(Vec<usize>, Vec<f64>)], maximize: bool) -> bool {
    let mut changed = false;
    for (members, ranks) in blocks {
        if members.len() < 2 {
            continue;
        }
        let mut order = members.clone();
        order.sort_by(|&a, &b| {
            let c = partner[a].total_cmp(&partner[b]);
            if maximize {
                c
            } else {
                c.reverse()
            }
        });
        for (&i, &r) in order.iter().zip(ranks) {
            if own[i] != r {
                own[i] = r;
                changed = true;
            }
        }
    }
    changed
}

fn extreme(x: &[f64], y: &[f64], maximize: bool) -> f64 {
    let bx = blocks(x);
    let by = blocks(y);
    // start from ranks with ties broken by position
    let mut r = vec![0.0; x.len()];
    for (members, ranks) in &bx {
        for (&i, &k) in members.iter().zip(ranks) {
            r[i] = k;
        }
    }
    let mut s = vec![0.0; y.len()];
    for (members, ranks) in &by {
        for (&i, &k) in members.iter().zip(ranks) {
            s[i] = k;
        }
    }
    // alternate block rearrangements of x and y until neither moves
    for _ in 0..1000 {
        let a = rearrange(&mut r, &s, &bx, maximize);
        let b = rearrange(&mut s, &r, &by, maximize);
        if !a && !b {
            break;
        }
    }
    rho_from_ranks(&r, &s)
}

/// Minimum and maximum sample Spearman correlation over admissible
/// tie-breaking rank assignments within tied blocks of `x` and of `y`.
pub fn spearman_bounds(x: &[f64], y: &[f64]) -> Result<SpearmanBounds> {
    check_pair(x, y)?;
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if constant(x) || constant(y) {
        return Ok(SpearmanBounds {
            min: -1.0,
            max: 1.0,
            degenerate: true,
        });
    }
    Ok(SpearmanBounds {
        min: extreme(x, y, false),
        max: extreme(x, y, true),
        degenerate: false,
    })
}
