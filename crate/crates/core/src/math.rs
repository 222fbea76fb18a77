//! Scalar special functions and small vector helpers.

use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-10;

/// Digamma function, the derivative of `ln Γ(x)`, for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(alloc::format!("digamma undefined at {x}")));
    }
    Ok(psi(x))
}

/// Unchecked digamma for hot loops; the caller guarantees `x > 0`.
#[inline]
pub(crate) fn psi(mut x: f64) -> f64 {
    let mut acc = 0.0;
    // Shift into the range where the asymptotic series is accurate.
    while x < 6.0 {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let f = 1.0 / (x * x);
    let series = f
        * (1.0 / 12.0
            - f * (1.0 / 120.0 - f * (1.0 / 252.0 - f * (1.0 / 240.0 - f * (1.0 / 132.0)))));
    acc + libm::log(x) - 0.5 / x - series
}

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Kullback-Leibler divergence with the `1/N` prefactor used for topic
/// comparison: `(1/N) Σ p_v ln(p_v / q_v)`, both sides floored at
/// [`PROB_FLOOR`].
pub fn scaled_kl(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut acc = 0.0;
    for (&pv, &qv) in p.iter().zip(q) {
        let pv = pv.max(PROB_FLOOR);
        let qv = qv.max(PROB_FLOOR);
        acc += pv * libm::log(pv / qv);
    }
    acc / p.len() as f64
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Linear-interpolated percentile (`pct` in `[0, 100]`) of unsorted values.
pub fn percentile(values: &[f64], pct: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("percentile of an empty set"));
    }
    if !(0.0..=100.0).contains(&pct) {
        return Err(Error::domain(alloc::format!(
            "percentile {pct} outside [0, 100]"
        )));
    }
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = libm::floor(rank) as usize;
    let hi = libm::ceil(rank) as usize;
    let frac = rank - lo as f64;
    Ok(sorted[lo] + (sorted[hi] - sorted[lo]) * frac)
}

/// Normalizes in place; returns the original sum.
pub fn normalize(values: &mut [f64]) -> f64 {
    let sum: f64 = values.iter().sum();
    if sum > 0.0 {
        for v in values.iter_mut() {
            *v /= sum;
        }
    }
    sum
}

/// 64-bit FNV-1a, used to derive RNG streams from identifiers.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    // Central difference of ln Γ, the independent oracle for digamma.
    fn fd_digamma(x: f64) -> f64 {
        let h = 1e-5 * x;
        (ln_gamma(x + h) - ln_gamma(x - h)) / (2.0 * h)
    }

    #[test]
    fn digamma_matches_finite_difference() {
        let mut x = 0.01;
        while x <= 100.0 {
            let err = (digamma(x).unwrap() - fd_digamma(x)).abs();
            assert!(err < 1e-6, "x={x} err={err}");
            x *= 1.1;
        }
    }

    #[test]
    fn digamma_reference_values() {
        // Values frozen from the finite-difference oracle above.
        assert!((digamma(1.0).unwrap() - (-0.577_215_664_901_532_9)).abs() < 1e-9);
        assert!((digamma(0.5).unwrap() - (-1.963_510_026_021_423_5)).abs() < 1e-9);
        assert!((fd_digamma(1.0) - (-0.5772)).abs() < 1e-4);
        assert!((fd_digamma(0.5) - (-1.9635)).abs() < 1e-4);
    }

    #[test]
    fn digamma_recurrence() {
        for &x in &[0.05, 0.3, 1.0, 2.5, 7.0, 42.0] {
            let lhs = digamma(x + 1.0).unwrap() - digamma(x).unwrap();
            assert!((lhs - 1.0 / x).abs() < 1e-10);
        }
    }

    #[test]
    fn digamma_rejects_nonpositive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.0).is_err());
        assert!(digamma(f64::NAN).is_err());
    }

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&v, 0.0).unwrap(), 1.0);
        assert_eq!(percentile(&v, 100.0).unwrap(), 4.0);
        assert!((percentile(&v, 25.0).unwrap() - 1.75).abs() < 1e-12);
        assert!(percentile(&[], 25.0).is_err());
    }
}
