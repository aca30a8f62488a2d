mod common;

use combfit::estimation::limit_loglik;
use combfit::marginals::MixedMarginal;
use combfit::model::{
    active_set_probabilities, log_likelihood, loglik_closed_form_2d, loglik_closed_form_3d, simulate, ClaimSeries,
    CombBernoulliModel,
};
use combfit::mvn::{ndtri, CorrelationMatrix, MvnOptions};
use rand::Rng;

use common::{random_correlation, rng};

fn random_model(rng: &mut impl Rng, d: usize) -> CombBernoulliModel {
    let marginals = (0..d)
        .map(|_| {
            MixedMarginal::lognormal(
                rng.random_range(0.05..0.95),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.3..2.0),
            )
            .unwrap()
        })
        .collect();
    CombBernoulliModel::new(marginals, random_correlation(rng, d))
        .unwrap()
        .with_mvn(MvnOptions::with_tol(1e-12))
}

fn random_row(rng: &mut impl Rng, model: &CombBernoulliModel) -> Vec<f64> {
    model
        .marginals
        .iter()
        .map(|m| {
            if rng.random_bool(0.5) {
                0.0
            } else {
                (m.severity.mu + m.severity.sigma * ndtri(rng.random_range(1e-6..1.0 - 1e-6))).exp()
            }
        })
        .collect()
}

#[test]
fn general_likelihood_matches_closed_forms() {
    let mut rng = rng(9);
    let mut worst = 0.0f64;
    for case in 0..1000 {
        let d = 2 + case % 2;
        let model = random_model(&mut rng, d);
        let row = random_row(&mut rng, &model);
        let general = log_likelihood(&model, &ClaimSeries::unlabeled(vec![row.clone()]).unwrap())
            .unwrap()
            .value;
        let closed = if d == 2 {
            loglik_closed_form_2d(&model, row[0], row[1]).unwrap()
        } else {
            loglik_closed_form_3d(&model, &[row[0], row[1], row[2]]).unwrap()
        };
        worst = worst.max((general - closed).abs());
        assert!((general - closed).abs() <= 1e-9, "case {case}: row {row:?}: {general} vs {closed}");
    }
    eprintln!("largest deviation {worst:.2e}");
}

#[test]
fn active_set_probabilities_match_simulated_frequencies() {
    let mut rng = rng(31);
    let n = 1_000_000;
    for d in 2..=4 {
        let model = random_model(&mut rng, d).with_mvn(MvnOptions::with_tol(1e-8));
        let probs = active_set_probabilities(&model).unwrap();
        let total: f64 = probs.iter().sum();
        assert!((total - 1.0).abs() <= 1e-8, "d={d}: probabilities sum to {total}");

        let sim = simulate(&model, n, 1000 + d as u64).unwrap();
        let mut counts = vec![0usize; 1 << d];
        for row in sim.rows() {
            let mask = row.iter().enumerate().fold(0, |m, (i, &x)| if x > 0.0 { m | 1 << i } else { m });
            counts[mask] += 1;
        }
        for (mask, (&p, &c)) in probs.iter().zip(&counts).enumerate() {
            let freq = c as f64 / n as f64;
            let se = (p * (1.0 - p) / n as f64).sqrt().max(1.0 / n as f64);
            assert!(
                (freq - p).abs() <= 4.0 * se,
                "d={d} mask {mask:b}: probability {p} vs frequency {freq}"
            );
        }
    }
}

fn positive_only() -> (Vec<MixedMarginal>, CorrelationMatrix, ClaimSeries) {
    let marginals = vec![
        MixedMarginal::lognormal(1.0, 0.3, 0.9).unwrap(),
        MixedMarginal::lognormal(1.0, -0.4, 1.3).unwrap(),
    ];
    let r = CorrelationMatrix::bivariate(0.55).unwrap();
    let model = CombBernoulliModel::new(marginals.clone(), r.clone()).unwrap();
    (marginals, r, simulate(&model, 400, 77).unwrap())
}

fn with_p(marginals: &[MixedMarginal], p: f64) -> Vec<MixedMarginal> {
    marginals.iter().map(|m| MixedMarginal::new(p, m.severity).unwrap()).collect()
}

#[test]
fn mixed_likelihood_approaches_the_limit() {
    let (marginals, r, data) = positive_only();
    let limit = limit_loglik(&marginals, &r, &data).unwrap().value;
    let gaps: Vec<f64> = [0.9, 0.99, 0.999, 1.0]
        .iter()
        .map(|&p| {
            let model = CombBernoulliModel::new(with_p(&marginals, p), r.clone()).unwrap();
            (log_likelihood(&model, &data).unwrap().value - limit).abs()
        })
        .collect();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "gaps {gaps:?}");
    assert_eq!(gaps[3], 0.0);
}

#[test]
fn grid_argmax_settles_on_the_limit_argmax() {
    let (marginals, _, data) = positive_only();
    let grid: Vec<f64> = (-19..=19).map(|k| k as f64 * 0.05).collect();
    let argmax = |f: &dyn Fn(&CorrelationMatrix) -> f64| {
        grid.iter()
            .copied()
            .max_by(|&a, &b| {
                let fa = f(&CorrelationMatrix::bivariate(a).unwrap());
                let fb = f(&CorrelationMatrix::bivariate(b).unwrap());
                fa.total_cmp(&fb)
            })
            .unwrap()
    };
    let target = argmax(&|r| limit_loglik(&marginals, r, &data).unwrap().value);
    assert!((target - 0.55).abs() <= 0.15, "limit argmax {target}");
    let picks: Vec<f64> = [0.9, 0.99, 0.999, 1.0]
        .iter()
        .map(|&p| {
            let m = with_p(&marginals, p);
            argmax(&|r| {
                let model = CombBernoulliModel::new(m.clone(), r.clone()).unwrap();
                log_likelihood(&model, &data).unwrap().value
            })
        })
        .collect();
    eprintln!("limit argmax {target}, sequence {picks:?}");
    assert_eq!(picks[2], target);
    assert_eq!(picks[3], target);
}
