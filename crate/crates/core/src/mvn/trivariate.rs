//! Trivariate normal cdf by adaptive Gauss–Kronrod quadrature over one
//! conditioning coordinate.

#![allow(clippy::excessive_precision)]

use super::bivariate::bvn_cdf;
use super::normal::{ndtri, norm_cdf};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const MAX_DEPTH: u32 = 30;

/// `P(Z1 <= z1, Z2 <= z2, Z3 <= z3)` for unit-variance normals with
/// correlations `r12, r13, r23`.
///
/// `tol` is an absolute error target; the result is also held to a relative
/// error of about `1e-12` so deep-tail values keep their digits.
pub fn tvn_cdf(z: [f64; 3], r12: f64, r13: f64, r23: f64, tol: f64) -> f64 {
    if z.iter().any(|v| v.is_nan()) {
        return f64::NAN;
    }
    if z.contains(&f64::NEG_INFINITY) {
        return 0.0;
    }
    // pick the conditioning coordinate with the weakest links to the others
    let r = [[1.0, r12, r13], [r12, 1.0, r23], [r13, r23, 1.0]];
    let mut k = 0;
    let mut best = f64::INFINITY;
    for c in 0..3 {
        let (i, j) = others(c);
        let m = r[i][c].abs().max(r[j][c].abs());
        if m < best {
            best = m;
            k = c;
        }
    }
    let (i, j) = others(k);
    let (rik, rjk, rij) = (r[i][k], r[j][k], r[i][j]);
    if z[k] == f64::INFINITY {
        return bvn_cdf(z[i], z[j], rij);
    }
    let si = (1.0 - rik * rik).sqrt();
    let sj = (1.0 - rjk * rjk).sqrt();
    let rho = ((rij - rik * rjk) / (si * sj)).clamp(-1.0, 1.0);
    let (zi, zj) = (z[i], z[j]);
    let f = |t: f64| {
        let x = ndtri(t);
        bvn_cdf((zi - rik * x) / si, (zj - rjk * x) / sj, rho)
    };
    let upper = norm_cdf(z[k]);
    if upper == 0.0 {
        return 0.0;
    }
    let tol = tol.min(1e-10);
    let v = adaptive(&f, 0.0, upper, tol, 0);
    v.clamp(0.0, 1.0)
}

fn others(k: usize) -> (usize, usize) {
    match k {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol.max(1e-12 * v.abs()) || depth >= MAX_DEPTH || b - a < 1e-300 {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive(f, a, m, 0.5 * tol, depth + 1) + adaptive(f, m, b, 0.5 * tol, depth + 1)
}
