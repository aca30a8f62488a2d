//! Derivative-free Nelder–Mead minimization.
//!
//! Infeasible points are signalled by the objective returning `+inf`; such
//! vertices are never accepted over finite ones.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    /// Stop when every vertex is within `xtol` (max-norm) of the best one...
    pub xtol: f64,
    /// ...and the objective spread over the simplex is below `ftol`.
    pub ftol: f64,
    pub max_iter: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            xtol: 1e-6,
            ftol: 1e-8,
            max_iter: 5000,
            initial_step: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best objective value after each iteration.
    pub trace: Vec<f64>,
}

pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], opts: &NelderMeadOptions) -> NelderMeadResult {
    let n = x0.len();
    let mut evals = 0usize;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    if n == 0 {
        let fx = eval(x0, &mut evals);
        return NelderMeadResult {
            x: vec![],
            fx,
            iterations: 0,
            evaluations: evals,
            converged: true,
            trace: vec![fx],
        };
    }

    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| eval(v, &mut evals)).collect();
    // an infeasible step goes the other way
    for i in 0..n {
        if values[i + 1].is_infinite() {
            simplex[i + 1][i] = x0[i] - opts.initial_step;
            values[i + 1] = eval(&simplex[i + 1], &mut evals);
        }
    }

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;
    let mut order: Vec<usize> = (0..=n).collect();

    while iterations < opts.max_iter {
        // stable sort keeps ties in index order, so runs are reproducible
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let best = order[0];
        let worst = order[n];
        let second = order[n - 1];
        trace.push(values[best]);

        let spread = values[worst] - values[best];
        let diam = simplex
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[best]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if diam < opts.xtol && spread.is_finite() && spread < opts.ftol {
            converged = true;
            break;
        }
        iterations += 1;

        let mut centroid = vec![0.0; n];
        for &k in &order[..n] {
            for (c, x) in centroid.iter_mut().zip(&simplex[k]) {
                *c += x / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr, &mut evals);
        if fr < values[best] {
            let xe = along(gamma);
            let fe = eval(&xe, &mut evals);
            if fe < fr {
                simplex[worst] = xe;
                values[worst] = fe;
            } else {
                simplex[worst] = xr;
                values[worst] = fr;
            }
            continue;
        }
        if fr < values[second] {
            simplex[worst] = xr;
            values[worst] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[worst] {
            let xc = along(rho * alpha);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        } else {
            let xc = along(-rho);
            let fc = eval(&xc, &mut evals);
            (xc, fc)
        };
        if fc < values[worst].min(fr) {
            simplex[worst] = xc;
            values[worst] = fc;
            continue;
        }
        // shrink toward the best vertex
        let xb = simplex[best].clone();
        for k in 0..=n {
            if k == best {
                continue;
            }
            for (x, b) in simplex[k].iter_mut().zip(&xb) {
                *x = b + sigma * (*x - b);
            }
            values[k] = eval(&simplex[k], &mut evals);
        }
    }

    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let best = order[0];
    if trace.last() != Some(&values[best]) {
        trace.push(values[best]);
    }
    NelderMeadResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        evaluations: evals,
        converged,
        trace,
    }
}
