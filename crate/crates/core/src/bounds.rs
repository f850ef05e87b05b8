//! Closed-form capacity bounds.
//!
//! * Gallager's achievable rate `1 + p_d log p_d + p_s log p_s + p_c log p_c`.
//! * The fixed-count codebook ceiling (side information: exactly `q_d`
//!   deletions and `q_s` substitutions), with its `t` and `alpha` terms.
//! * The random-count ceiling, which widens the counts to a Chernoff
//!   interval of half-width `gamma` around their means.
//! * The limit expression `1 - H(p_d) - H(p_s)`.
//!
//! Logs are base 2, except inside `gamma` and the minimum block length,
//! where they undo an `e^(-mu gamma^2 / 3)` tail and are natural by default
//! ([`LogBase`]). `alpha` is evaluated entirely in the log domain.

use std::f64::consts::E;
use std::fmt::Write as _;

use crate::channel::ChannelParams;
use crate::error::{domain, Error, Result};
use crate::numerics::{binary_entropy, log2_binomial, xlog2x};

/// Which `t` formula to use in the fixed-count ceiling.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TVariant {
    /// `t = ceil(q_d + 3 q_d log(ne/q_d) + 3 q_s log((n-q_d)e/q_s) + log(2/delta))`.
    #[default]
    Proof,
    /// The same without the leading `q_d`.
    Statement,
}

/// How the substitution-count interval gets its half-width.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GammaVariant {
    /// One `gamma`, computed from `p_d`, for both counts.
    #[default]
    Single,
    /// A separate `gamma_s` computed from the mean substitution count.
    PerProcess,
}

/// Log base inside the Chernoff-derived quantities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LogBase {
    /// Natural log inside `gamma` and `n_min`, base 2 elsewhere.
    #[default]
    Mixed,
    /// Base 2 everywhere.
    AllBase2,
}

impl LogBase {
    fn chernoff_log(self, x: f64) -> f64 {
        match self {
            LogBase::Mixed => x.ln(),
            LogBase::AllBase2 => x.log2(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BoundsConfig {
    pub t_variant: TVariant,
    pub gamma_variant: GammaVariant,
    pub log_base: LogBase,
}

/// Gallager's lower bound on the deletion/substitution capacity, in bits per use.
pub fn gallager_lower_bound(params: &ChannelParams) -> f64 {
    1.0 + xlog2x(params.p_d()) + xlog2x(params.p_s()) + xlog2x(params.p_c())
}

/// `1 - H(p_d) - H(p_s)`.
pub fn asymptotic_capacity_estimate(params: &ChannelParams) -> f64 {
    let h = |p| binary_entropy(p).expect("validated probability");
    1.0 - h(params.p_d()) - h(params.p_s())
}

/// The additive terms of a codebook-size bound, in bits.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundTerms {
    pub n_minus_qd: f64,
    pub minus_log_binom_deletion: f64,
    pub minus_log_binom_substitution: f64,
    /// `log2(2/delta)` for the fixed-count bound, `log2(4/delta)` for the random-count one.
    pub log_confidence: f64,
    pub log_alpha: f64,
}

impl BoundTerms {
    pub fn sum(&self) -> f64 {
        self.n_minus_qd
            + self.minus_log_binom_deletion
            + self.minus_log_binom_substitution
            + self.log_confidence
            + self.log_alpha
    }

    /// The three terms that dominate for large `n`.
    pub fn dominant(&self) -> f64 {
        self.n_minus_qd + self.minus_log_binom_deletion + self.minus_log_binom_substitution
    }
}

/// Which theorem a breakdown came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundKind {
    FixedCount,
    RandomCount,
}

/// Term-by-term decomposition of a bound on `log2 N`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundBreakdown {
    pub kind: BoundKind,
    pub n: u64,
    pub delta: f64,
    pub terms: BoundTerms,
    pub total_log2_n: f64,
    pub t: u64,
    pub gamma: Option<f64>,
    pub gamma_s: Option<f64>,
    pub q_d_min: u64,
    pub q_d_max: u64,
    pub q_s_min: u64,
    pub q_s_max: u64,
}

impl BoundBreakdown {
    /// Named terms in summation order.
    pub fn named_terms(&self) -> [(&'static str, f64); 5] {
        let conf = match self.kind {
            BoundKind::FixedCount => "log_2_over_delta",
            BoundKind::RandomCount => "log_4_over_delta",
        };
        [
            ("n_minus_qd", self.terms.n_minus_qd),
            ("minus_log_binom_deletion", self.terms.minus_log_binom_deletion),
            ("minus_log_binom_substitution", self.terms.minus_log_binom_substitution),
            (conf, self.terms.log_confidence),
            ("log_alpha", self.terms.log_alpha),
        ]
    }

    pub fn rate_bound(&self) -> f64 {
        self.total_log2_n / self.n as f64
    }
}

fn check_delta(delta: f64, allow_one: bool) -> Result<()> {
    let ok = delta > 0.0 && (delta < 1.0 || (allow_one && delta == 1.0));
    if !ok || delta.is_nan() {
        return Err(domain(format!("delta = {delta} outside the admissible range")));
    }
    Ok(())
}

fn t_formula(n: f64, q_d: f64, q_s: f64, log_conf: f64, lead: f64) -> f64 {
    lead + 3.0 * q_d * (n * E / q_d).log2() + 3.0 * q_s * ((n - q_d) * E / q_s).log2() + log_conf
}

/// The pattern-neighbourhood radius `t` of the fixed-count bound.
pub fn theorem1_t(n: u64, q_d: u64, q_s: u64, delta: f64, variant: TVariant) -> Result<u64> {
    if q_d == 0 || q_s == 0 {
        return Err(domain("t needs q_d >= 1 and q_s >= 1"));
    }
    if q_d + q_s > n {
        return Err(domain(format!("q_d + q_s = {} exceeds n = {n}", q_d + q_s)));
    }
    check_delta(delta, true)?;
    let lead = match variant {
        TVariant::Proof => q_d as f64,
        TVariant::Statement => 0.0,
    };
    let v = t_formula(n as f64, q_d as f64, q_s as f64, (2.0 / delta).log2(), lead);
    Ok(v.ceil() as u64)
}

/// `log2 alpha` with `alpha = t^2 (2e)^(t-1) (5t/q_s)^q_s (5t/q_d)^(3 q_d + 1)`.
///
/// `q_s = 0` takes the limit value 1 for the `(5t/q_s)^q_s` factor.
pub fn theorem1_alpha_log2(q_d: u64, q_s: u64, t: u64) -> Result<f64> {
    if q_d == 0 {
        return Err(domain("alpha is singular at q_d = 0"));
    }
    if t == 0 {
        return Err(domain("alpha needs t >= 1"));
    }
    let t = t as f64;
    let subst = if q_s == 0 {
        0.0
    } else {
        q_s as f64 * (5.0 * t / q_s as f64).log2()
    };
    Ok(2.0 * t.log2()
        + (t - 1.0) * (2.0 * E).log2()
        + subst
        + (3.0 * q_d as f64 + 1.0) * (5.0 * t / q_d as f64).log2())
}

/// Upper bound on `log2 N` when exactly `q_d` deletions and `q_s` substitutions
/// occur and some decoder succeeds with probability at least `delta`.
pub fn theorem1_rhs(
    n: u64,
    q_d: u64,
    q_s: u64,
    delta: f64,
    variant: TVariant,
) -> Result<BoundBreakdown> {
    let t = theorem1_t(n, q_d, q_s, delta, variant)?;
    let terms = BoundTerms {
        n_minus_qd: (n - q_d) as f64,
        minus_log_binom_deletion: -log2_binomial(n, q_d)?,
        minus_log_binom_substitution: -log2_binomial(n - q_d, q_s)?,
        log_confidence: (2.0 / delta).log2(),
        log_alpha: theorem1_alpha_log2(q_d, q_s, t)?,
    };
    Ok(BoundBreakdown {
        kind: BoundKind::FixedCount,
        n,
        delta,
        total_log2_n: terms.sum(),
        terms,
        t,
        gamma: None,
        gamma_s: None,
        q_d_min: q_d,
        q_d_max: q_d,
        q_s_min: q_s,
        q_s_max: q_s,
    })
}

/// Chernoff half-width `gamma = sqrt(3 log(8/delta) / (n p))`, so that
/// `2 exp(-n p gamma^2 / 3) = delta / 4`.
pub fn chernoff_gamma(n: u64, p: f64, delta: f64, base: LogBase) -> Result<f64> {
    let mu = n as f64 * p;
    if mu.is_nan() || mu <= 0.0 {
        return Err(domain(format!("gamma needs n p > 0, got {mu}")));
    }
    check_delta(delta, false)?;
    Ok((3.0 * base.chernoff_log(8.0 / delta) / mu).sqrt())
}

/// Smallest block length for the random-count bound:
/// `ceil(12 log(8/delta) / min(p_d, (1 - p_d) p_s'))`.
pub fn min_codeword_length(params: &ChannelParams, delta: f64, base: LogBase) -> Result<u64> {
    if params.p_d() == 0.0 || params.p_s() == 0.0 {
        return Err(domain("minimum block length needs p_d > 0 and p_s > 0"));
    }
    check_delta(delta, false)?;
    // (1 - p_d) p_s' is p_s itself; using p_s avoids a rounding round trip.
    let rarest = params.p_d().min(params.p_s());
    Ok((12.0 * base.chernoff_log(8.0 / delta) / rarest).ceil() as u64)
}

/// Upper bound on `log2 N` for the i.i.d. channel at block length `n`.
pub fn theorem2_rhs(
    n: u64,
    params: &ChannelParams,
    delta: f64,
    cfg: &BoundsConfig,
) -> Result<BoundBreakdown> {
    let n_min = min_codeword_length(params, delta, cfg.log_base)?;
    if n < n_min {
        return Err(Error::CodewordTooShort { n, required_n: n_min });
    }
    let nf = n as f64;
    let gamma = chernoff_gamma(n, params.p_d(), delta, cfg.log_base)?;
    let gamma_s = match cfg.gamma_variant {
        GammaVariant::Single => gamma,
        GammaVariant::PerProcess => chernoff_gamma(n, params.p_s(), delta, cfg.log_base)?,
    };
    let mu_d = nf * params.p_d();
    let mu_s = nf * params.p_s();
    // Floor the lower endpoints and ceil the upper ones: the interval only widens.
    let q_d_min = ((1.0 - gamma) * mu_d).floor() as u64;
    let q_d_max = ((1.0 + gamma) * mu_d).ceil() as u64;
    let q_s_min = ((1.0 - gamma_s) * mu_s).floor() as u64;
    let q_s_max = ((1.0 + gamma_s) * mu_s).ceil() as u64;
    if q_d_max + q_s_max > n {
        return Err(Error::Precondition(format!(
            "count interval exceeds block length: q_d_max + q_s_max = {} > n = {n}",
            q_d_max + q_s_max
        )));
    }

    let log_conf = (4.0 / delta).log2();
    let (qd, qs) = (q_d_max as f64, q_s_max as f64);
    let t = t_formula(nf, qd, qs, log_conf, qd).ceil() as u64;
    let terms = BoundTerms {
        n_minus_qd: (n - q_d_min) as f64,
        minus_log_binom_deletion: -log2_binomial(n, q_d_min)?,
        minus_log_binom_substitution: -log2_binomial(n - q_d_max, q_s_min)?,
        log_confidence: log_conf,
        log_alpha: theorem1_alpha_log2(q_d_max, q_s_max, t)?,
    };
    Ok(BoundBreakdown {
        kind: BoundKind::RandomCount,
        n,
        delta,
        total_log2_n: terms.sum(),
        terms,
        t,
        gamma: Some(gamma),
        gamma_s: Some(gamma_s),
        q_d_min,
        q_d_max,
        q_s_min,
        q_s_max,
    })
}

/// A random-count bound normalised per channel use, against the limit expression.
#[derive(Clone, Debug, PartialEq)]
pub struct GapPoint {
    pub params: ChannelParams,
    pub breakdown: BoundBreakdown,
    pub rate_bound: f64,
    pub gallager_lb: f64,
    pub asymptotic: f64,
    pub gap: f64,
}

impl GapPoint {
    /// `gap / (H(p_d) + H(p_s))`.
    pub fn relative_gap(&self) -> f64 {
        self.gap / (1.0 - self.asymptotic)
    }
}

/// `rate_bound = theorem2_rhs / n` and its excess over `1 - H(p_d) - H(p_s)`.
pub fn normalized_gap(
    n: u64,
    params: &ChannelParams,
    delta: f64,
    cfg: &BoundsConfig,
) -> Result<GapPoint> {
    let breakdown = theorem2_rhs(n, params, delta, cfg)?;
    let rate_bound = breakdown.rate_bound();
    let asymptotic = asymptotic_capacity_estimate(params);
    Ok(GapPoint {
        params: *params,
        rate_bound,
        gallager_lb: gallager_lower_bound(params),
        asymptotic,
        gap: rate_bound - asymptotic,
        breakdown,
    })
}

pub const BOUNDS_CSV_HEADER: &str = "n,pd,ps,delta,gamma,qd_min,qd_max,qs_min,qs_max,t,log_alpha,total_log2N,rate_bound,gallager_lb,asymptotic,gap,status";

fn fmt_f(v: f64) -> String {
    format!("{v:.9}")
}

/// One CSV row for a grid point: the bound columns on success, the inputs
/// and a status message on failure.
pub fn bounds_csv_row(n: u64, p_d: f64, p_s: f64, delta: f64, point: &Result<GapPoint>) -> String {
    let mut row = format!("{n},{p_d},{p_s},{delta}");
    match point {
        Ok(g) => {
            let b = &g.breakdown;
            let _ = write!(
                row,
                ",{},{},{},{},{},{},{},{},{},{},{},{},ok",
                fmt_f(b.gamma.unwrap_or(0.0)),
                b.q_d_min,
                b.q_d_max,
                b.q_s_min,
                b.q_s_max,
                b.t,
                fmt_f(b.terms.log_alpha),
                fmt_f(b.total_log2_n),
                fmt_f(g.rate_bound),
                fmt_f(g.gallager_lb),
                fmt_f(g.asymptotic),
                fmt_f(g.gap),
            );
        }
        Err(e) => {
            let msg: String = e.to_string().chars().map(|c| if c == ',' { ';' } else { c }).collect();
            row += &",".repeat(12);
            let _ = write!(row, ",error: {msg}");
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(d: f64, s: f64) -> ChannelParams {
        ChannelParams::new(d, s).unwrap()
    }

    fn h(p: f64) -> f64 {
        // Independent of numerics::binary_entropy.
        if p == 0.0 || p == 1.0 {
            0.0
        } else {
            -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
        }
    }

    #[test]
    fn gallager_examples() {
        assert_eq!(gallager_lower_bound(&params(0.0, 0.0)), 1.0);
        let a = gallager_lower_bound(&params(0.1, 0.03));
        let b = gallager_lower_bound(&params(0.03, 0.1));
        assert!((a - b).abs() < 1e-15);
        let expected = 1.0 + 0.1 * 0.1f64.log2() + 0.9 * 0.9f64.log2();
        assert!((gallager_lower_bound(&params(0.1, 0.0)) - expected).abs() < 1e-15);
        assert!((gallager_lower_bound(&params(0.1, 0.0)) - 0.53100).abs() < 1e-5);
    }

    #[test]
    fn asymptotic_examples() {
        assert_eq!(asymptotic_capacity_estimate(&params(0.0, 0.0)), 1.0);
        assert!(asymptotic_capacity_estimate(&params(0.5, 0.0)).abs() < 1e-15);
        let v = asymptotic_capacity_estimate(&params(0.001, 0.001));
        assert!((v - (1.0 - 2.0 * h(0.001))).abs() < 1e-14);
        // 1 - 2 H(0.001) evaluated independently: 0.9771844845...
        assert!((v - 0.977184).abs() < 1e-6);
    }

    #[test]
    fn gallager_meets_asymptotic_for_small_p() {
        let p = params(1e-3, 1e-3);
        assert!((gallager_lower_bound(&p) - asymptotic_capacity_estimate(&p)).abs() < 0.01);
    }

    #[test]
    fn radius_example() {
        let direct = 1.0 + 3.0 * (100.0 * E).log2() + 3.0 * (99.0 * E).log2() + 1.0;
        assert_eq!(direct.ceil() as u64, 51);
        assert_eq!(theorem1_t(100, 1, 1, 1.0, TVariant::Proof).unwrap(), 51);
        assert_eq!(theorem1_t(100, 1, 1, 1.0, TVariant::Statement).unwrap(), 50);
    }

    #[test]
    fn radius_errors() {
        assert!(theorem1_t(100, 0, 1, 0.5, TVariant::Proof).is_err());
        assert!(theorem1_t(100, 1, 0, 0.5, TVariant::Proof).is_err());
        assert!(theorem1_t(100, 1, 1, 0.0, TVariant::Proof).is_err());
        assert!(theorem1_t(100, 1, 1, 1.5, TVariant::Proof).is_err());
        assert!(theorem1_t(3, 2, 2, 0.5, TVariant::Proof).is_err());
    }

    #[test]
    fn radius_monotone_and_large() {
        let mut ns = vec![10u64, 100, 1000, 10_000, 100_000, 1_000_000];
        ns.sort();
        for &n in &ns {
            let qmax = (n / 10).max(1);
            let qs: Vec<u64> = [1, 2, 3, 5, 10, 100, 1000, 10_000, 100_000]
                .into_iter()
                .filter(|&q| q <= qmax)
                .collect();
            for &q_d in &qs {
                for &q_s in &qs {
                    let t = theorem1_t(n, q_d, q_s, 0.5, TVariant::Proof).unwrap();
                    assert!(t >= 3 * q_d.max(q_s), "n={n} q_d={q_d} q_s={q_s} t={t}");
                    let t_stmt = theorem1_t(n, q_d, q_s, 0.5, TVariant::Statement).unwrap();
                    assert!(t_stmt >= 3 * q_d.max(q_s));
                }
            }
            for w in qs.windows(2) {
                let a = theorem1_t(n, w[0], 1, 0.5, TVariant::Proof).unwrap();
                let b = theorem1_t(n, w[1], 1, 0.5, TVariant::Proof).unwrap();
                assert!(a <= b);
                let a = theorem1_t(n, 1, w[0], 0.5, TVariant::Proof).unwrap();
                let b = theorem1_t(n, 1, w[1], 0.5, TVariant::Proof).unwrap();
                assert!(a <= b);
            }
            let loose = theorem1_t(n, 1, 1, 0.9, TVariant::Proof).unwrap();
            let tight = theorem1_t(n, 1, 1, 0.01, TVariant::Proof).unwrap();
            assert!(loose <= tight);
        }
    }

    #[test]
    fn alpha_examples() {
        let expected = 9f64.log2() + 2.0 * (2.0 * E).log2() + 15f64.log2() + 4.0 * 15f64.log2();
        assert!((theorem1_alpha_log2(1, 1, 3).unwrap() - expected).abs() < 1e-12);
        let with_zero = theorem1_alpha_log2(2, 0, 10).unwrap();
        let manual = 2.0 * 10f64.log2() + 9.0 * (2.0 * E).log2() + 7.0 * 25f64.log2();
        assert!((with_zero - manual).abs() < 1e-12);
        assert!(theorem1_alpha_log2(0, 1, 3).is_err());
        assert!(theorem1_alpha_log2(1, 1, 0).is_err());
    }

    #[test]
    fn alpha_increasing_in_t() {
        for q_d in 1..=5u64 {
            for q_s in 1..=5u64 {
                let start = 3 * q_d.max(q_s);
                let mut prev = theorem1_alpha_log2(q_d, q_s, start).unwrap();
                for t in start + 1..start + 200 {
                    let v = theorem1_alpha_log2(q_d, q_s, t).unwrap();
                    assert!(v > prev);
                    prev = v;
                }
            }
        }
        // No overflow far past where alpha itself would leave f64 range.
        assert!(theorem1_alpha_log2(50, 50, 5000).unwrap().is_finite());
    }

    #[test]
    fn fixed_count_terms_recompute() {
        let (n, q_d, q_s, delta) = (1000u64, 2u64, 3u64, 1.0);
        let b = theorem1_rhs(n, q_d, q_s, delta, TVariant::Proof).unwrap();
        assert_eq!(b.terms.n_minus_qd, 998.0);
        assert!((b.terms.minus_log_binom_deletion + 499_500f64.log2()).abs() < 1e-9);
        let c998_3 = (998.0 * 997.0 * 996.0 / 6.0f64).log2();
        assert!((b.terms.minus_log_binom_substitution + c998_3).abs() < 1e-9);
        assert_eq!(b.terms.log_confidence, 1.0);
        let t = theorem1_t(n, q_d, q_s, delta, TVariant::Proof).unwrap();
        assert_eq!(b.t, t);
        assert!((b.terms.log_alpha - theorem1_alpha_log2(q_d, q_s, t).unwrap()).abs() < 1e-12);
        let summed: f64 = b.named_terms().iter().map(|(_, v)| v).sum();
        assert!((summed - b.total_log2_n).abs() < 1e-9);
        assert!(b.total_log2_n >= b.terms.dominant());
    }

    #[test]
    fn fixed_count_halving_delta() {
        let a = theorem1_rhs(5000, 3, 4, 0.4, TVariant::Proof).unwrap();
        let b = theorem1_rhs(5000, 3, 4, 0.2, TVariant::Proof).unwrap();
        let expected = 1.0 + (b.terms.log_alpha - a.terms.log_alpha);
        assert!((b.total_log2_n - a.total_log2_n - expected).abs() < 1e-9);
        assert!(b.t >= a.t);
    }

    #[test]
    fn gamma_examples() {
        let delta = 0.3;
        let (n, p) = (5000u64, 0.02);
        let g = chernoff_gamma(n, p, delta, LogBase::Mixed).unwrap();
        assert!((g * g * n as f64 * p / 3.0 - (8.0 / delta).ln()).abs() < 1e-12);
        let far = chernoff_gamma(10_000_000_000, p, delta, LogBase::Mixed).unwrap();
        assert!(far < 1e-3);
        // At n = 12 ln(8/delta) / p the half-width is exactly 1/2.
        let p = 12.0 * (8.0f64 / 0.5).ln() / 4000.0;
        let g = chernoff_gamma(4000, p, 0.5, LogBase::Mixed).unwrap();
        assert!((g - 0.5).abs() < 1e-12);
        assert!(chernoff_gamma(100, 0.0, 0.5, LogBase::Mixed).is_err());
        assert!(chernoff_gamma(100, 0.1, 1.0, LogBase::Mixed).is_err());
    }

    #[test]
    fn min_length_examples() {
        assert_eq!(
            min_codeword_length(&params(0.01, 0.01), 0.5, LogBase::Mixed).unwrap(),
            3328
        );
        let p = params(0.02, 0.005);
        let expected = (12.0 * 16f64.ln() / 0.005).ceil() as u64;
        assert_eq!(min_codeword_length(&p, 0.5, LogBase::Mixed).unwrap(), expected);
        let all2 = min_codeword_length(&p, 0.5, LogBase::AllBase2).unwrap();
        assert_eq!(all2, (12.0 * 4.0 / 0.005f64).ceil() as u64);
        assert!(min_codeword_length(&params(0.0, 0.01), 0.5, LogBase::Mixed).is_err());
    }

    #[test]
    fn random_count_below_minimum_names_required_n() {
        let err = theorem2_rhs(1000, &params(0.01, 0.01), 0.5, &BoundsConfig::default());
        assert_eq!(
            err,
            Err(Error::CodewordTooShort {
                n: 1000,
                required_n: 3328
            })
        );
    }

    #[test]
    fn random_count_structure() {
        let cfg = BoundsConfig::default();
        for &(p, n) in &[(0.05, 700u64), (0.01, 3328), (0.01, 1_000_000), (0.002, 50_000)] {
            let b = theorem2_rhs(n, &params(p, p), 0.5, &cfg).unwrap();
            assert!(b.gamma.unwrap() <= 0.5);
            assert!(b.q_d_min <= b.q_d_max && b.q_s_min <= b.q_s_max);
            assert!(b.total_log2_n >= b.terms.dominant());
            let summed: f64 = b.named_terms().iter().map(|(_, v)| v).sum();
            assert!((summed - b.total_log2_n).abs() < 1e-9 * b.total_log2_n.abs().max(1.0));
        }
    }

    #[test]
    fn random_count_dominant_terms_near_limit() {
        let b = theorem2_rhs(1_000_000, &params(0.01, 0.01), 0.5, &BoundsConfig::default()).unwrap();
        let dominant = b.terms.dominant() / 1e6;
        assert!((dominant - (1.0 - 2.0 * h(0.01))).abs() < 0.05, "{dominant}");
    }

    #[test]
    fn random_count_per_process_gamma() {
        let cfg = BoundsConfig {
            gamma_variant: GammaVariant::PerProcess,
            ..Default::default()
        };
        let b = theorem2_rhs(100_000, &params(0.02, 0.005), 0.5, &cfg).unwrap();
        assert!(b.gamma_s.unwrap() > b.gamma.unwrap());
        assert!(b.gamma_s.unwrap() <= 0.5);
        let single = theorem2_rhs(100_000, &params(0.02, 0.005), 0.5, &BoundsConfig::default()).unwrap();
        assert!(b.q_s_max >= single.q_s_max && b.q_s_min <= single.q_s_min);
    }

    #[test]
    fn gap_sweeps() {
        let cfg = BoundsConfig::default();
        let p = params(0.01, 0.01);
        let mut prev = f64::INFINITY;
        for n in [10_000u64, 100_000, 1_000_000, 10_000_000] {
            let g = normalized_gap(n, &p, 0.5, &cfg).unwrap();
            assert!(g.gap > 0.0);
            assert!(g.gap < prev, "n={n}");
            prev = g.gap;
        }
        let mut prev_rel = f64::INFINITY;
        for p in [0.05f64, 0.02, 0.01, 0.005] {
            let n = (1000.0 / p).round() as u64;
            let g = normalized_gap(n, &params(p, p), 0.5, &cfg).unwrap();
            assert!(g.relative_gap() < prev_rel, "p={p}");
            prev_rel = g.relative_gap();
        }
    }

    #[test]
    fn rate_bound_nonincreasing_by_decade() {
        let cfg = BoundsConfig::default();
        let p = params(0.01, 0.005);
        let n0 = min_codeword_length(&p, 0.5, cfg.log_base).unwrap();
        let mut n = n0;
        let mut prev = normalized_gap(n, &p, 0.5, &cfg).unwrap().rate_bound;
        for _ in 0..3 {
            n *= 10;
            let r = normalized_gap(n, &p, 0.5, &cfg).unwrap().rate_bound;
            assert!(r <= prev + 1e-6);
            prev = r;
        }
    }

    #[test]
    fn csv_rows() {
        let cfg = BoundsConfig::default();
        let p = params(0.01, 0.01);
        let ok = bounds_csv_row(10_000, 0.01, 0.01, 0.5, &normalized_gap(10_000, &p, 0.5, &cfg));
        assert_eq!(ok.split(',').count(), BOUNDS_CSV_HEADER.split(',').count());
        assert!(ok.ends_with(",ok"));
        let bad = bounds_csv_row(10, 0.01, 0.01, 0.5, &normalized_gap(10, &p, 0.5, &cfg));
        assert_eq!(bad.split(',').count(), BOUNDS_CSV_HEADER.split(',').count());
        assert!(bad.contains("error"));
    }

    proptest! {
        #[test]
        fn fixed_count_terms_sum(n in 20u64..200_000, q_d in 1u64..10, q_s in 1u64..10, delta in 0.01f64..=1.0) {
            let b = theorem1_rhs(n, q_d, q_s, delta, TVariant::Proof).unwrap();
            let sum: f64 = b.named_terms().iter().map(|(_, v)| v).sum();
            prop_assert!((sum - b.total_log2_n).abs() <= 1e-9 * b.total_log2_n.abs().max(1.0));
            prop_assert!(b.t >= 3 * q_d.max(q_s));
            let stmt = theorem1_rhs(n, q_d, q_s, delta, TVariant::Statement).unwrap();
            prop_assert!(stmt.t <= b.t);
        }

        #[test]
        fn random_count_invariants(p_d in 0.002f64..0.1, p_s in 0.002f64..0.1, scale in 1.0f64..50.0) {
            let p = params(p_d, p_s);
            let cfg = BoundsConfig::default();
            let n_min = (12.0 * 16f64.ln() / p_d.min(p_s)).ceil();
            let n = (n_min * scale) as u64;
            let b = theorem2_rhs(n, &p, 0.5, &cfg).unwrap();
            prop_assert!(b.gamma.unwrap() <= 0.5);
            let sum: f64 = b.named_terms().iter().map(|(_, v)| v).sum();
            prop_assert!((sum - b.total_log2_n).abs() <= 1e-9 * b.total_log2_n.abs());
            prop_assert!(b.total_log2_n >= b.terms.dominant());
            prop_assert!(normalized_gap(n, &p, 0.5, &cfg).unwrap().gap > 0.0);
        }
    }
}
