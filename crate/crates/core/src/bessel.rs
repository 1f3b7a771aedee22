//! Modified Bessel function of the first kind, order zero.
//!
//! Every argument the channel model produces is of the order of the mean
//! photon number reaching the relay (well below one), so a plain power series
//! is both fast and accurate. The series is still well behaved up to
//! `|z| = 30`, which the quadrature cross-checks exercise.

use crate::error::{Error, Result};

/// Relative size of the last accepted series term.
const SERIES_CUTOFF: f64 = 1e-16;
const MAX_TERMS: u32 = 500;

/// `I0(z)`, evaluated by its power series `Σ (z/2)^{2k} / (k!)²`.
pub fn bessel_i0(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NonFinite("bessel_i0"));
    }
    Ok(1.0 + i0_minus_one(z))
}

/// `I0(z) − 1`, without the cancellation of subtracting one from `I0`.
pub fn bessel_i0m1(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::NonFinite("bessel_i0m1"));
    }
    Ok(i0_minus_one(z))
}

pub(crate) fn i0_minus_one(z: f64) -> f64 {
    let h = 0.25 * z * z;
    let mut term = 1.0;
    let mut sum = 0.0;
    for k in 1..=MAX_TERMS {
        let k = f64::from(k);
        term *= h / (k * k);
        sum += term;
        if term <= SERIES_CUTOFF * sum {
            break;
        }
    }
    sum
}

/// Weighted excess of a pair of Bessel terms over the on-axis term.
///
/// With `s = x²`, returns
///
/// ```text
/// Σ_{k≥1} s^k / (k!)² · ( wp·p^{2k} + wq·q^{2k} − c·4^{−k} )
/// ```
///
/// which equals `wp·(I0(2xp) − 1) + wq·(I0(2xq) − 1) − c·(I0(x) − 1)`.
/// The channel model's brackets are all of this shape; summing the
/// difference term by term keeps them accurate even when the individual
/// Bessel values agree to many digits. The loop stops once the remaining
/// terms are negligible against `x²`, the natural scale of the brackets.
pub(crate) fn weighted_excess(x: f64, p: f64, wp: f64, q: f64, wq: f64, c: f64) -> f64 {
    let s = x * x;
    if s == 0.0 {
        return 0.0;
    }
    let (p2, q2) = (p * p, q * q);
    let weight = wp.abs() + wq.abs() + c.abs();
    let mut base = 1.0;
    let (mut pk, mut qk, mut quarter) = (1.0, 1.0, 1.0);
    let mut sum = 0.0;
    for k in 1..=MAX_TERMS {
        let kf = f64::from(k);
        base *= s / (kf * kf);
        pk *= p2;
        qk *= q2;
        quarter *= 0.25;
        sum += base * (wp * pk + wq * qk - c * quarter);
        if base * weight <= 1e-18 * s || base == 0.0 {
            break;
        }
    }
    sum
}
