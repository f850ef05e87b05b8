//! Entropy and binomial primitives in the log domain.
//!
//! Every logarithm returned from this module is base 2 (bits). The
//! `0 * log 0 = 0` convention is used throughout.

use std::f64::consts::{LN_2, PI};

use crate::error::{domain, Result};

/// Largest `n` for which [`exact_binomial`] is defined.
pub const EXACT_BINOMIAL_MAX_N: u32 = 64;

fn check_probability(p: f64) -> Result<()> {
    if p.is_nan() || !(0.0..=1.0).contains(&p) {
        return Err(domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

/// `p * log2(p)` with the convention `0 * log2(0) = 0`.
pub fn xlog2x(p: f64) -> f64 {
    if p == 0.0 {
        0.0
    } else {
        p * p.log2()
    }
}

/// Binary entropy `H(p) = -p log2 p - (1-p) log2 (1-p)`.
pub fn binary_entropy(p: f64) -> Result<f64> {
    check_probability(p)?;
    if p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    // (1-p) log(1-p) through ln_1p keeps small p accurate.
    let tail = (1.0 - p) * (-p).ln_1p() / LN_2;
    Ok(-p * p.log2() - tail)
}

/// Exact `C(n, k)` for `n <= 64`.
pub fn exact_binomial(n: u32, k: u32) -> Result<u64> {
    if n > EXACT_BINOMIAL_MAX_N {
        return Err(domain(format!(
            "exact_binomial supports n <= {EXACT_BINOMIAL_MAX_N}, got {n}"
        )));
    }
    if k > n {
        return Err(domain(format!("binomial C({n}, {k}) has k > n")));
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    // Multiplicative form stays integral at every step; u128 covers the
    // intermediate product for n <= 64.
    let mut acc: u128 = 1;
    for i in 1..=k {
        acc = acc * (n - k + i) / i;
    }
    Ok(acc as u64)
}

/// `C(n, k)` as an exact integer, or `None` if it overflows `u128`.
pub fn checked_binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k) as u128;
    let n = n as u128;
    let mut acc: u128 = 1;
    for i in 1..=k {
        // acc * (n-k+i) is divisible by i; split through the gcd to delay overflow.
        let num = n - k + i;
        let g = gcd(acc, i);
        let (a, d) = (acc / g, i / g);
        acc = a.checked_mul(num / d)?;
    }
    Some(acc)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `ln(m!) - (m ln m - m + ln(2 pi m) / 2)` for `m > 64` via the Stirling series.
fn stirling_error(m: f64) -> f64 {
    let inv = 1.0 / m;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
}

/// `log2 C(n, k)`, accurate to about 1e-14 relative for `n` well beyond 1e7.
///
/// Small `n` goes through the exact integer path. Large `n` with a short
/// side uses a direct product of ratios, and everything else uses the
/// Stirling expansion with its error series.
pub fn log2_binomial(n: u64, k: u64) -> Result<f64> {
    if k > n {
        return Err(domain(format!("binomial C({n}, {k}) has k > n")));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(0.0);
    }
    if n <= EXACT_BINOMIAL_MAX_N as u64 {
        return Ok((exact_binomial(n as u32, k as u32)? as f64).log2());
    }
    if k <= 64 {
        let base = (n - k) as f64;
        let sum: f64 = (1..=k).map(|i| ((base + i as f64) / i as f64).ln()).sum();
        return Ok(sum / LN_2);
    }
    let (nf, kf) = (n as f64, k as f64);
    let rest = nf - kf;
    let main = kf * (nf / kf).ln() - rest * (-kf / nf).ln_1p();
    let half = 0.5 * (nf / (2.0 * PI * kf * rest)).ln();
    let corr = stirling_error(nf) - stirling_error(kf) - stirling_error(rest);
    Ok((main + half + corr) / LN_2)
}
