//! Continuous-time Clayton likelihood against its Poisson-scaled discrete
//! counterpart, plus simulator checks.

use combfit::levy::{
    continuous_time_loglik_2d, intensities_from_model, poisson_scaled_loglik_2d, simulate_levy, BivariateLevyParams,
    ClaytonLevyCopula, LevyEvent,
};
use combfit::marginals::{LognormalSeverity, MixedMarginal, SeverityDistribution};
use combfit::model::{simulate, ActiveSet, CombBernoulliModel};
use combfit::mvn::{mvn_cdf, normal::ndtri, CorrelationMatrix, MvnOptions};
use combfit::rng::rng_from_seed;
use rand::Rng;
use rand_distr::{Distribution, LogNormal, Poisson};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const HORIZON: f64 = 4000.0;

fn params(delta: f64) -> BivariateLevyParams {
    BivariateLevyParams {
        lambda: [0.1, 0.08],
        severities: [LognormalSeverity::new(0.0, 1.0).unwrap(), LognormalSeverity::new(0.5, 0.8).unwrap()],
        copula: ClaytonLevyCopula::new(delta).unwrap(),
    }
}

/// A fixed record with one event per unit period at most.
fn record(p: &BivariateLevyParams, seed: u64) -> Vec<LevyEvent> {
    let [a, b, both] = p.subset_intensities().unwrap();
    let mut rng = rng_from_seed(seed);
    let ln1 = LogNormal::new(0.0, 1.0).unwrap();
    let ln2 = LogNormal::new(0.5, 0.8).unwrap();
    let mut losses = Vec::new();
    for (rate, mask) in [(a, 1u8), (b, 2), (both, 3)] {
        if rate * HORIZON < 1e-12 {
            continue;
        }
        let n = Poisson::new(rate * HORIZON).unwrap().sample(&mut rng) as usize;
        for _ in 0..n {
            let x = if mask & 1 == 1 { ln1.sample(&mut rng) } else { 0.0 };
            let y = if mask & 2 == 2 { ln2.sample(&mut rng) } else { 0.0 };
            losses.push(vec![x, y]);
        }
    }
    // shuffle, then spread over distinct periods
    for i in (1..losses.len()).rev() {
        losses.swap(i, rng.random_range(0..=i));
    }
    let gap = HORIZON / losses.len() as f64;
    losses
        .into_iter()
        .enumerate()
        .map(|(k, l)| LevyEvent {
            time: (k as f64 + 0.5) * gap,
            losses: l,
        })
        .collect()
}

#[test]
fn discrete_likelihood_converges_at_first_order() {
    let p = params(2.0);
    let events = record(&p, 7);
    let cont = continuous_time_loglik_2d(&events, &p, HORIZON).unwrap();
    let errs: Vec<f64> = [1.0, 0.5, 0.25, 0.125]
        .iter()
        .map(|&dt| poisson_scaled_loglik_2d(&events, &p, HORIZON, dt).unwrap() - cont)
        .collect();
    println!("continuous {cont}, errors {errs:?}");
    for w in errs.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.6..=2.4).contains(&ratio), "ratio {ratio} from {errs:?}");
    }
}

#[test]
fn vanishing_dependence_factorizes() {
    let p = params(1e-6);
    let [a, b, both] = p.subset_intensities().unwrap();
    assert!(both < 1e-300 && (a - 0.1).abs() < 1e-15 && (b - 0.08).abs() < 1e-15);
    // single-component events only: joint jumps have no intensity left
    let events: Vec<LevyEvent> = record(&p, 3);
    assert!(events.iter().all(|e| e.active().cardinality() == 1));
    let got = continuous_time_loglik_2d(&events, &p, HORIZON).unwrap();
    let mut want = -(0.1 + 0.08) * HORIZON;
    for e in &events {
        let i = e.active().indices[0];
        want += p.lambda[i].ln() + p.severities[i].ln_pdf(e.losses[i]);
    }
    assert!((got - want).abs() < 1e-9 * want.abs(), "{got} vs {want}");
}

#[test]
fn negative_intensity_is_rejected() {
    let mut p = params(1.0);
    p.lambda = [0.0, 0.1];
    assert!(continuous_time_loglik_2d(&[], &p, 1.0).is_err());
}

fn model3() -> CombBernoulliModel {
    CombBernoulliModel::new(
        vec![
            MixedMarginal::lognormal(0.3, 0.0, 1.0).unwrap(),
            MixedMarginal::lognormal(0.2, 0.4, 0.7).unwrap(),
            MixedMarginal::lognormal(0.25, -0.5, 1.2).unwrap(),
        ],
        CorrelationMatrix::from_rows(&[vec![1.0, 0.5, 0.3], vec![0.5, 1.0, 0.4], vec![0.3, 0.4, 1.0]]).unwrap(),
    )
    .unwrap()
}

#[test]
fn intensities_sum_to_any_jump_probability() {
    let m = model3();
    let l = intensities_from_model(&m, 1.0, 1.0).unwrap();
    let z: Vec<f64> = m.marginals.iter().map(|mg| ndtri(1.0 - mg.p)).collect();
    let none = mvn_cdf(&z, &m.correlation, &MvnOptions::default()).unwrap();
    assert!((l.total() - (1.0 - none)).abs() < 1e-10);
    for i in 0..3 {
        assert!((l.component(i) - m.marginals[i].p).abs() < 1e-10);
    }
}

#[test]
fn event_counts_follow_poisson_rates() {
    let m = model3();
    let l = intensities_from_model(&m, 1.0, 200.0).unwrap();
    let runs = 100;
    let mut totals = [0usize; 8];
    for seed in 0..runs {
        for e in simulate_levy(&l, &m, seed).unwrap() {
            totals[e.active().mask() as usize] += 1;
        }
    }
    for mask in 1..8 {
        let expect = l.lambda_perp[mask] * l.horizon;
        let mean = totals[mask] as f64 / runs as f64;
        assert!((mean - expect).abs() < 4.0 * (expect / runs as f64).sqrt(), "subset {mask}: {mean} vs {expect}");
    }
}

#[test]
fn bivariate_model_runs_three_processes() {
    let m = CombBernoulliModel::new(
        vec![MixedMarginal::lognormal(0.4, 0.0, 1.0).unwrap(), MixedMarginal::lognormal(0.3, 0.0, 1.0).unwrap()],
        CorrelationMatrix::bivariate(0.5).unwrap(),
    )
    .unwrap();
    let l = intensities_from_model(&m, 1.0, 500.0).unwrap();
    let ev = simulate_levy(&l, &m, 9).unwrap();
    let mut seen = [false; 4];
    for e in &ev {
        seen[e.active().mask() as usize] = true;
    }
    assert_eq!(seen, [false, true, true, true]);
    assert!(ev.windows(2).all(|w| w[0].time <= w[1].time));
    assert!(ev.iter().all(|e| e.time > 0.0 && e.time <= 500.0));
}

/// Kolmogorov p-value of the one-sample statistic (asymptotic series).
fn ks_pvalue(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let lam = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut p = 0.0;
    for k in 1..100 {
        let k = k as f64;
        p += 2.0 * (-1f64).powf(k - 1.0) * (-2.0 * k * k * lam * lam).exp();
    }
    p.clamp(0.0, 1.0)
}

#[test]
fn independent_severities_match_marginals() {
    let mut m = model3();
    m.correlation = CorrelationMatrix::identity(3);
    let l = intensities_from_model(&m, 1.0, 3000.0).unwrap();
    let ev = simulate_levy(&l, &m, 4).unwrap();
    for i in 0..3 {
        let xs: Vec<f64> = ev.iter().map(|e| e.losses[i]).filter(|&x| x > 0.0).collect();
        let sev = m.marginals[i].severity;
        let p = ks_pvalue(xs, |x| sev.cdf(x));
        assert!(p > 0.01, "component {i}: KS p = {p}");
    }
}

#[test]
fn active_sets_agree_with_discrete_simulation() {
    let m = model3();
    let periods = 20_000;
    let l = intensities_from_model(&m, 1.0, periods as f64).unwrap();
    let mut levy = [0f64; 8];
    for e in simulate_levy(&l, &m, 11).unwrap() {
        levy[e.active().mask() as usize] += 1.0;
    }
    let mut comb = [0f64; 8];
    for x in simulate(&m, periods, 12).unwrap().rows() {
        comb[ActiveSet::of(x).unwrap().mask() as usize] += 1.0;
    }
    // two-sample homogeneity over the non-empty sets
    let (na, nb): (f64, f64) = (levy[1..].iter().sum(), comb[1..].iter().sum());
    let mut stat = 0.0;
    for k in 1..8 {
        let pooled = (levy[k] + comb[k]) / (na + nb);
        for (obs, n) in [(levy[k], na), (comb[k], nb)] {
            let e = pooled * n;
            stat += (obs - e).powi(2) / e;
        }
    }
    let p = 1.0 - ChiSquared::new(6.0).unwrap().cdf(stat);
    assert!(p > 0.01, "chi-square {stat}, p = {p}");
}
