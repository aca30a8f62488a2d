#![allow(dead_code)]

use combfit::mvn::{tvn_cdf, CorrelationMatrix};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random correlation matrix from a Gram matrix of `d + 2` random vectors plus a ridge,
/// so the smallest eigenvalue stays away from zero.
pub fn random_correlation(rng: &mut impl Rng, d: usize) -> CorrelationMatrix {
    let k = d + 2;
    let a = DMatrix::<f64>::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0));
    let g = &a * a.transpose() + DMatrix::identity(d, d) * 0.3;
    let s: Vec<f64> = (0..d).map(|i| g[(i, i)].sqrt()).collect();
    let r = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { g[(i, j)] / (s[i] * s[j]) });
    CorrelationMatrix::new(r).expect("Gram matrix is positive definite")
}

// 10-point Gauss-Legendre on [-1, 1].
const GL_X: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_W: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

/// Composite 10-point Gauss-Legendre on `[a, b]` with `panels` panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        let half = 0.5 * h;
        for (x, w) in GL_X.iter().zip(GL_W) {
            total += w * (f(mid - half * x) + f(mid + half * x));
        }
    }
    total * 0.5 * h
}

pub fn phi(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// `P(Z <= z)` for a four-dimensional `N(0, R)`, conditioning on the first
/// coordinate and integrating trivariate probabilities over it.
pub fn mvn4_by_quadrature(z: &[f64], r: &CorrelationMatrix) -> f64 {
    assert_eq!(z.len(), 4);
    let s: Vec<f64> = (1..4).map(|j| (1.0 - r.get(0, j).powi(2)).sqrt()).collect();
    let rc = |j: usize, k: usize| (r.get(j, k) - r.get(0, j) * r.get(0, k)) / (s[j - 1] * s[k - 1]);
    let (r12, r13, r23) = (rc(1, 2), rc(1, 3), rc(2, 3));
    let lo = -9.0f64;
    if z[0] <= lo {
        return 0.0;
    }
    integrate(
        |t| {
            let b = [
                (z[1] - r.get(0, 1) * t) / s[0],
                (z[2] - r.get(0, 2) * t) / s[1],
                (z[3] - r.get(0, 3) * t) / s[2],
            ];
            phi(t) * tvn_cdf(b, r12, r13, r23, 1e-13)
        },
        lo,
        z[0],
        20,
    )
}
