//! Randomized lattice rule on the separation-of-variables transform of the
//! multivariate normal cdf.

use rand::Rng;

use super::matrix::LowerTriangular;
use super::normal::{ndtri, norm_cdf};
use crate::rng::rng_from_seed;

const PRIMES: [u32; 100] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97, 101, 103, 107, 109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191,
    193, 197, 199, 211, 223, 227, 229, 233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293,
    307, 311, 313, 317, 331, 337, 347, 349, 353, 359, 367, 373, 379, 383, 389, 397, 401, 409, 419,
    421, 431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491, 499, 503, 509, 521, 523, 541,
];

/// Number of independent random shifts; the spread of their means gives the
/// error estimate.
pub const SHIFTS: usize = 12;

const BLOCK: usize = 256;

/// Estimate plus a 1-sigma standard error and the integrand evaluations spent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmcEstimate {
    pub value: f64,
    pub std_error: f64,
    pub evaluations: usize,
}

/// `P(Z <= b)` with `Z ~ N(0, L Lᵀ)`.
///
/// Points are added in blocks until `3 · std_error <= tol` or `max_evals` is
/// spent. With `fixed_points = Some(n)` exactly `n` lattice points per shift
/// are used, which makes the estimate a smooth function of `b`.
pub fn sov_cdf(
    b: &[f64],
    chol: &LowerTriangular,
    tol: f64,
    seed: u64,
    max_evals: usize,
    fixed_points: Option<usize>,
) -> QmcEstimate {
    let d = b.len();
    assert_eq!(d, chol.dim());
    let e1 = norm_cdf(b[0] / chol.get(0, 0));
    if d == 1 || e1 == 0.0 {
        return QmcEstimate {
            value: e1,
            std_error: 0.0,
            evaluations: 0,
        };
    }
    let m = d - 1;
    // Richtmyer generators frac(√prime); beyond the table fall back to a
    // Weyl sequence in the golden-ratio family
    let gens: Vec<f64> = (0..m)
        .map(|j| match PRIMES.get(j) {
            Some(&p) => (p as f64).sqrt().fract(),
            None => ((j + 1) as f64 * 0.618_033_988_749_894_9).fract(),
        })
        .collect();
    let mut rng = rng_from_seed(seed);
    let shifts: Vec<Vec<f64>> = (0..SHIFTS)
        .map(|_| (0..m).map(|_| rng.random::<f64>()).collect())
        .collect();

    let mut sums = [0.0f64; SHIFTS];
    let mut n = 0usize;
    let mut w = vec![0.0; m];
    let mut y = vec![0.0; d];
    let target = fixed_points.unwrap_or(usize::MAX);
    loop {
        let block = BLOCK.min(target - n);
        for k in n + 1..=n + block {
            for (s, shift) in shifts.iter().enumerate() {
                for j in 0..m {
                    let x = (k as f64 * gens[j] + shift[j]).fract();
                    w[j] = (2.0 * x - 1.0).abs();
                }
                let a = integrand(b, chol, e1, &w, &mut y, false);
                let c = integrand(b, chol, e1, &w, &mut y, true);
                sums[s] += 0.5 * (a + c);
            }
        }
        n += block;
        let means: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
        let value = means.iter().sum::<f64>() / SHIFTS as f64;
        let var = means.iter().map(|v| (v - value).powi(2)).sum::<f64>()
            / (SHIFTS * (SHIFTS - 1)) as f64;
        let std_error = var.sqrt();
        let evals = 2 * n * SHIFTS;
        let done = match fixed_points {
            Some(t) => n >= t,
            None => 3.0 * std_error <= tol || evals >= max_evals,
        };
        if done {
            return QmcEstimate {
                value: value.clamp(0.0, 1.0),
                std_error,
                evaluations: evals,
            };
        }
    }
}

fn integrand(
    b: &[f64],
    chol: &LowerTriangular,
    e1: f64,
    w: &[f64],
    y: &mut [f64],
    antithetic: bool,
) -> f64 {
    let d = b.len();
    let mut f = e1;
    let mut e = e1;
    for i in 1..d {
        let wi = if antithetic { 1.0 - w[i - 1] } else { w[i - 1] };
        // keep the argument inside (0, 1) so the quantile stays finite
        let t = (wi * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        y[i - 1] = ndtri(t);
        let mut s = b[i];
        for j in 0..i {
            s -= chol.get(i, j) * y[j];
        }
        e = norm_cdf(s / chol.get(i, i));
        f *= e;
        if f == 0.0 {
            break;
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mvn::matrix::CorrelationMatrix;

    #[test]
    fn independent_product() {
        let r = CorrelationMatrix::identity(5);
        let b = [0.3, -0.2, 1.0, 0.0, -1.5];
        let want: f64 = b.iter().map(|&v| norm_cdf(v)).product();
        let est = sov_cdf(&b, &r.cholesky(), 1e-9, 1, 10_000_000, None);
        assert!((est.value - want).abs() < 1e-9, "{} vs {want}", est.value);
    }

    #[test]
    fn equicorrelated_orthant() {
        // orthant probability for equicorrelation 1/2 in d dimensions is 1/(d+1)
        for d in [4, 5, 6] {
            let r = CorrelationMatrix::equicorrelated(d, 0.5).unwrap();
            let est = sov_cdf(&vec![0.0; d], &r.cholesky(), 1e-6, 7, 50_000_000, None);
            let want = 1.0 / (d as f64 + 1.0);
            assert!((est.value - want).abs() < 2e-6, "d={d}: {} vs {want}", est.value);
            assert!(3.0 * est.std_error <= 1e-6);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let r = CorrelationMatrix::equicorrelated(4, 0.3).unwrap();
        let b = [0.1, 0.2, -0.3, 0.5];
        let a = sov_cdf(&b, &r.cholesky(), 1e-6, 42, 1_000_000, None);
        let c = sov_cdf(&b, &r.cholesky(), 1e-6, 42, 1_000_000, None);
        assert_eq!(a, c);
        let f = sov_cdf(&b, &r.cholesky(), 1e-6, 42, 0, Some(1000));
        assert_eq!(f.evaluations, 2 * 1000 * SHIFTS);
    }
}
