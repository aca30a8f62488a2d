mod common;

use combfit::copula::GaussianCopula;
use combfit::mvn::{norm_cdf, MvnOptions};
use rand::Rng;

use common::{mvn4_by_quadrature, phi, random_correlation, rng};

/// `∂^s C / ∂u_S` by central differences of the copula cdf, taken in normal
/// scores `z = Φ⁻¹(u)` and mapped back with `du = φ(z) dz`, with one
/// Richardson step.
fn finite_difference(cdf: &dyn Fn(&[f64]) -> f64, z: &[f64], active: &[usize], h: f64) -> f64 {
    let diff = |h: f64| {
        let s = active.len();
        let mut total = 0.0;
        for signs in 0..1u32 << s {
            let mut p = z.to_vec();
            let mut sign = 1.0;
            for (k, &i) in active.iter().enumerate() {
                if signs >> k & 1 == 1 {
                    p[i] += h;
                } else {
                    p[i] -= h;
                    sign = -sign;
                }
            }
            total += sign * cdf(&p);
        }
        total / (2.0 * h).powi(s as i32)
    };
    let d = (4.0 * diff(h / 2.0) - diff(h)) / 3.0;
    d / active.iter().map(|&i| phi(z[i])).product::<f64>()
}

#[test]
fn mixed_partial_matches_finite_differences() {
    let mut rng = rng(20);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let d = 2 + case % 3;
        let r = random_correlation(&mut rng, d);
        let u: Vec<f64> = (0..d).map(|_| rng.random_range(0.05..0.95)).collect();
        let mask = rng.random_range(1..1u32 << d);
        let active: Vec<usize> = (0..d).filter(|&i| mask >> i & 1 == 1).collect();

        let copula = GaussianCopula::with_options(r.clone(), MvnOptions::with_tol(1e-14)).unwrap();
        let z: Vec<f64> = u.iter().map(|&v| combfit::mvn::ndtri(v)).collect();
        let cdf = |p: &[f64]| -> f64 {
            if d == 4 {
                mvn4_by_quadrature(p, &r)
            } else {
                copula.cdf(&p.iter().map(|&x| norm_cdf(x)).collect::<Vec<_>>()).unwrap()
            }
        };
        let fd = finite_difference(&cdf, &z, &active, 0.02);
        let got = copula.mixed_partial(&active, &u).unwrap();
        let err = (got - fd).abs();
        worst = worst.max(err);
        assert!(err <= 1e-5, "case {case}: d={d} S={active:?} analytic {got} vs differences {fd}");
    }
    eprintln!("largest deviation {worst:.2e}");
}
