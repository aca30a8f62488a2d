//! Bivariate normal cdf via the Drezner–Wesolowsky integral with Genz's
//! high-correlation expansion.

#![allow(clippy::excessive_precision)]

use std::f64::consts::{PI, TAU};

use super::normal::norm_cdf;

// Gauss–Legendre half-rules as (weight, node) on [-1, 1].
const GL6: [(f64, f64); 3] = [
    (0.1713244923791705, -0.9324695142031522),
    (0.3607615730481384, -0.6612093864662647),
    (0.4679139345726904, -0.2386191860831970),
];

const GL12: [(f64, f64); 6] = [
    (0.4717533638651177e-1, -0.9815606342467191),
    (0.1069393259953183, -0.9041172563704750),
    (0.1600783285433464, -0.7699026741943050),
    (0.2031674267230659, -0.5873179542866171),
    (0.2334925365383547, -0.3678314989981802),
    (0.2491470458134029, -0.1252334085114692),
];

const GL20: [(f64, f64); 10] = [
    (0.1761400713915212e-1, -0.9931285991850949),
    (0.4060142980038694e-1, -0.9639719272779138),
    (0.6267204833410906e-1, -0.9122344282513259),
    (0.8327674157670475e-1, -0.8391169718222188),
    (0.1019301198172404, -0.7463319064601508),
    (0.1181945319615184, -0.6360536807265150),
    (0.1316886384491766, -0.5108670019508271),
    (0.1420961093183821, -0.3737060887154196),
    (0.1491729864726037, -0.2277858511416451),
    (0.1527533871307259, -0.7652652113349733e-1),
];

fn rule(abs_r: f64) -> &'static [(f64, f64)] {
    if abs_r < 0.3 {
        &GL6
    } else if abs_r < 0.75 {
        &GL12
    } else {
        &GL20
    }
}

/// `P(X <= h, Y <= k)` for a standard bivariate normal with correlation `r`.
pub fn bvn_cdf(h: f64, k: f64, r: f64) -> f64 {
    if h.is_nan() || k.is_nan() || r.is_nan() {
        return f64::NAN;
    }
    if h == f64::NEG_INFINITY || k == f64::NEG_INFINITY {
        return 0.0;
    }
    if h == f64::INFINITY {
        return norm_cdf(k);
    }
    if k == f64::INFINITY {
        return norm_cdf(h);
    }
    let r = r.clamp(-1.0, 1.0);
    if r == 1.0 {
        return norm_cdf(h.min(k));
    }
    if r == -1.0 {
        return (norm_cdf(h) - norm_cdf(-k)).max(0.0);
    }
    let v = if r >= -0.925 {
        upper(-h, -k, r)
    } else {
        // P(X<=h, Y<=k) = Φ(h) − P(X<=h, −Y<−k), and corr(X, −Y) = −r > 0.925
        norm_cdf(h) - upper(-h, k, -r)
    };
    v.clamp(0.0, 1.0)
}

/// `P(X > h, Y > k)`. Valid for `r > -0.925`; strongly negative `r` goes
/// through the reflection in [`bvn_cdf`].
fn upper(h: f64, k: f64, r: f64) -> f64 {
    let hk = h * k;
    let nodes = rule(r.abs());
    if r.abs() < 0.925 {
        let mut bvn = 0.0;
        if r != 0.0 {
            let hs = 0.5 * (h * h + k * k);
            let asr = 0.5 * r.asin();
            for &(w, x) in nodes {
                for sgn in [-1.0, 1.0] {
                    let sn = (asr * (sgn * x + 1.0)).sin();
                    bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
                }
            }
            bvn *= asr / TAU;
        }
        return bvn + norm_cdf(-h) * norm_cdf(-k);
    }

    // 0.925 <= r < 1
    let a_s = (1.0 - r) * (1.0 + r);
    let mut a = a_s.sqrt();
    let b_s = (h - k) * (h - k);
    let c = (4.0 - hk) / 8.0;
    let d = (12.0 - hk) / 16.0;
    let mut bvn = 0.0;
    let asr = -0.5 * (b_s / a_s + hk);
    if asr > -100.0 {
        bvn = a
            * asr.exp()
            * (1.0 - c * (b_s - a_s) * (1.0 - d * b_s / 5.0) / 3.0 + c * d * a_s * a_s / 5.0);
    }
    if hk > -100.0 {
        let b = (h - k).abs();
        bvn -= (-0.5 * hk).exp()
            * (2.0 * PI).sqrt()
            * norm_cdf(-b / a)
            * b
            * (1.0 - c * b_s * (1.0 - d * b_s / 5.0) / 3.0);
    }
    a *= 0.5;
    for &(w, x) in nodes {
        for sgn in [-1.0, 1.0] {
            let xs = {
                let t = a * (sgn * x + 1.0);
                t * t
            };
            let rs = (1.0 - xs).sqrt();
            let asr = -0.5 * (b_s / xs + hk);
            if asr > -100.0 {
                bvn += a
                    * w
                    * asr.exp()
                    * ((-hk * (1.0 - rs) / (2.0 * (1.0 + rs))).exp() / rs
                        - (1.0 + c * xs * (1.0 + d * xs)));
            }
        }
    }
    -bvn / TAU + norm_cdf(-h.max(k))
}
