//! Standard normal pdf, cdf and quantile.

use crate::error::{Error, Result};

pub(crate) const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Which scalar normal function to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalFn {
    Pdf,
    Cdf,
    Quantile,
}

/// Evaluate a standard normal function by kind.
///
/// The quantile is defined on the open interval `(0, 1)`; the endpoints are
/// rejected so that callers handle atoms explicitly.
pub fn std_normal(kind: NormalFn, x: f64) -> Result<f64> {
    match kind {
        NormalFn::Pdf => Ok(norm_pdf(x)),
        NormalFn::Cdf => Ok(norm_cdf(x)),
        NormalFn::Quantile => norm_quantile(x),
    }
}

#[inline]
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * x * x).exp()
}

#[inline]
pub fn norm_ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// `P(Z <= x)`.
#[inline]
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * std::f64::consts::FRAC_1_SQRT_2)
}

/// `P(Z > x)`, accurate in the upper tail.
#[inline]
pub fn norm_sf(x: f64) -> f64 {
    norm_cdf(-x)
}

/// Checked quantile: errors outside the open unit interval.
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "normal quantile requires p in (0,1), got {p}"
        )));
    }
    Ok(ndtri(p))
}

/// Unchecked quantile. Returns `-inf` at 0, `+inf` at 1 and NaN outside.
///
/// Wichura's AS241 rational approximation followed by one Halley step
/// against the erfc-based cdf.
pub fn ndtri(p: f64) -> f64 {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::NEG_INFINITY;
    }
    if p == 1.0 {
        return f64::INFINITY;
    }
    let x = as241(p);
    // Refine against whichever tail is smaller so the residual keeps precision.
    if p < 0.5 {
        halley(x, p, norm_cdf(x))
    } else {
        -halley(-x, 1.0 - p, norm_cdf(-x))
    }
}

/// Quantile from an upper-tail probability `q = 1 - p`, i.e. `x` with `P(Z > x) = q`.
pub fn ndtri_upper(q: f64) -> f64 {
    -ndtri(q)
}

fn halley(x: f64, target: f64, current: f64) -> f64 {
    let dens = norm_pdf(x);
    if dens <= 0.0 || !x.is_finite() {
        return x;
    }
    let err = current - target;
    let u = err / dens;
    x - u / (1.0 + 0.5 * x * u)
}

#[allow(clippy::excessive_precision)]
fn as241(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        let num = ((((((r * 2509.0809287301226727 + 33430.575583588128105) * r
            + 67265.770927008700853)
            * r
            + 45921.953931549871457)
            * r
            + 13731.693765509461125)
            * r
            + 1971.5909503065514427)
            * r
            + 133.14166789178437745)
            * r
            + 3.387132872796366608;
        let den = ((((((r * 5226.495278852545925 + 28729.085735721942674) * r
            + 39307.89580009271061)
            * r
            + 21213.794301586595867)
            * r
            + 5394.1960214247511077)
            * r
            + 687.1870074920579083)
            * r
            + 42.313330701600911252)
            * r
            + 1.0;
        return q * num / den;
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((r * 7.7454501427834140764e-4 + 0.0227238449892691845833) * r
            + 0.24178072517745061177)
            * r
            + 1.27045825245236838258)
            * r
            + 3.64784832476320460504)
            * r
            + 5.7694972214606914055)
            * r
            + 4.6303378461565452959)
            * r
            + 1.42343711074968357734;
        let den = ((((((r * 1.05075007164441684324e-9 + 5.475938084995344946e-4) * r
            + 0.0151986665636164571966)
            * r
            + 0.14810397642748007459)
            * r
            + 0.68976733498510000455)
            * r
            + 1.6763848301838038494)
            * r
            + 2.05319162663775882187)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((r * 2.01033439929228813265e-7 + 2.71155556874348757815e-5) * r
            + 0.0012426609473880784386)
            * r
            + 0.026532189526576123093)
            * r
            + 0.29656057182850489123)
            * r
            + 1.7848265399172913358)
            * r
            + 5.4637849111641143699)
            * r
            + 6.6579046435011037772;
        let den = ((((((r * 2.04426310338993978564e-15 + 1.4215117583164458887e-7) * r
            + 1.8463183175100546818e-5)
            * r
            + 7.868691311456132591e-4)
            * r
            + 0.0148753612908506148525)
            * r
            + 0.13692988092273580531)
            * r
            + 0.59983220655588793769)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
