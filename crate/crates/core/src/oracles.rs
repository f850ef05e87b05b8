//! Exact brute-force oracles for the combinatorial lemmas.
//!
//! Everything here enumerates: inputs `X ∈ {0,1}^n`, pattern pairs, or both.
//! All probabilities are exact integer fractions and every verdict compares
//! exact integers; floating point appears only in the reported slack.
//!
//! Scans are split into fixed rank ranges and run with rayon. Per-range
//! results are merged in range order, so reports do not depend on the
//! number of worker threads.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rayon::prelude::*;

use crate::channel::{stream_rng, FixedCountParams};
use crate::error::{domain, Error, Result};
use crate::numerics::log2_binomial;
use crate::patterns::{discrepancy_mask, enumerate_pattern_pairs, BitString, PatternPair};

/// Default largest `n` for scans over all of `{0,1}^n`.
pub const DEFAULT_SCAN_CAP: usize = 20;
/// Default largest `n` for scans over `{0,1}^n` times pairs of patterns.
pub const DEFAULT_PAIR_SCAN_CAP: usize = 10;
/// Default limit on `2^n * (#patterns)^2` for (t,s)-bad counting.
pub const DEFAULT_PAIR_SCAN_COST: u64 = 1 << 34;

/// Enumeration limits. Exceeding one is an error, never a silent truncation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationCaps {
    pub scan_n: usize,
    pub pair_scan_n: usize,
    pub pair_scan_cost: u64,
}

impl Default for EnumerationCaps {
    fn default() -> Self {
        EnumerationCaps {
            scan_n: DEFAULT_SCAN_CAP,
            pair_scan_n: DEFAULT_PAIR_SCAN_CAP,
            pair_scan_cost: DEFAULT_PAIR_SCAN_COST,
        }
    }
}

impl EnumerationCaps {
    fn check_scan(&self, n: usize) -> Result<()> {
        if n > self.scan_n.min(63) {
            return Err(Error::CapExceeded {
                what: "input length for 2^n scan",
                value: n as u64,
                cap: self.scan_n.min(63) as u64,
            });
        }
        Ok(())
    }

    fn check_pair_scan(&self, n: usize, patterns: u128) -> Result<()> {
        if n > self.pair_scan_n.min(63) {
            return Err(Error::CapExceeded {
                what: "input length for double-pattern scan",
                value: n as u64,
                cap: self.pair_scan_n.min(63) as u64,
            });
        }
        let cost = patterns
            .checked_mul(patterns)
            .and_then(|p| p.checked_mul(1u128 << n))
            .unwrap_or(u128::MAX);
        if cost > self.pair_scan_cost as u128 {
            return Err(Error::CapExceeded {
                what: "2^n * patterns^2 scan cost",
                value: u64::try_from(cost).unwrap_or(u64::MAX),
                cap: self.pair_scan_cost,
            });
        }
        Ok(())
    }
}

/// A probability held as an exact count over an exact total.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactFraction {
    num: u128,
    den: u128,
}

impl ExactFraction {
    pub fn new(num: u128, den: u128) -> Result<Self> {
        if den == 0 || num > den {
            return Err(domain(format!("invalid fraction {num}/{den}")));
        }
        Ok(ExactFraction { num, den })
    }

    pub fn numerator(&self) -> u128 {
        self.num
    }

    pub fn denominator(&self) -> u128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_one(&self) -> bool {
        self.num == self.den
    }

    /// `self <= 2^-k`, decided in integers.
    pub fn le_pow2_neg(&self, k: u32) -> bool {
        BigUint::from(self.num) << k as usize <= BigUint::from(self.den)
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn log2(&self) -> f64 {
        (self.num as f64).log2() - (self.den as f64).log2()
    }
}

impl Ord for ExactFraction {
    fn cmp(&self, other: &Self) -> Ordering {
        (BigUint::from(self.num) * other.den).cmp(&(BigUint::from(other.num) * self.den))
    }
}

impl PartialOrd for ExactFraction {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for ExactFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Outcome of one exhaustive (or sampled) lemma check.
#[derive(Clone, Debug, PartialEq)]
pub struct LemmaReport {
    pub lemma: &'static str,
    pub config: FixedCountParams,
    pub t: Option<usize>,
    pub s: Option<usize>,
    pub checked: u64,
    pub violations: Vec<String>,
    /// Largest `log2(bound) - log2(achieved)` over cases with a positive achieved value.
    pub max_slack_log2: Option<f64>,
    pub notes: Vec<(String, String)>,
}

pub const REPORT_CSV_HEADER: &str = "lemma,n,qd,qs,t,s,checked,violations,max_slack_log2";

fn opt<T: fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl LemmaReport {
    fn new(lemma: &'static str, config: FixedCountParams) -> Self {
        LemmaReport {
            lemma,
            config,
            t: None,
            s: None,
            checked: 0,
            violations: Vec::new(),
            max_slack_log2: None,
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    fn record_slack(&mut self, slack: f64) {
        self.max_slack_log2 = Some(self.max_slack_log2.map_or(slack, |m| m.max(slack)));
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.lemma,
            self.config.n,
            self.config.q_d,
            self.config.q_s,
            opt(self.t),
            opt(self.s),
            self.checked,
            self.violations.len(),
            opt(self.max_slack_log2.map(|v| format!("{v:.6}"))),
        )
    }

    /// One-line human-readable summary.
    pub fn text_line(&self) -> String {
        let mut line = format!(
            "{} {} n={} qd={} qs={}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.lemma,
            self.config.n,
            self.config.q_d,
            self.config.q_s
        );
        if let Some(t) = self.t {
            line += &format!(" t={t}");
        }
        if let Some(s) = self.s {
            line += &format!(" s={s}");
        }
        line += &format!(" checked={} violations={}", self.checked, self.violations.len());
        if let Some(v) = self.max_slack_log2 {
            line += &format!(" max_slack_log2={v:.6}");
        }
        for (k, v) in &self.notes {
            line += &format!(" {k}={v}");
        }
        line
    }
}

/// All pattern pairs at a fixed-count configuration, in enumeration order.
fn all_pairs(fc: &FixedCountParams) -> Result<Vec<PatternPair>> {
    let count = fc
        .pattern_count()
        .filter(|&c| c <= 1 << 24)
        .ok_or(Error::CapExceeded {
            what: "pattern pair count",
            value: u64::MAX,
            cap: 1 << 24,
        })?;
    let v: Vec<_> = enumerate_pattern_pairs(fc.n, fc.q_d, fc.q_s)?.collect();
    debug_assert_eq!(v.len() as u128, count);
    Ok(v)
}

fn collision_count(a: &PatternPair, b: &PatternPair) -> u128 {
    let n = a.input_length();
    if a.output_length() != b.output_length() {
        return 0;
    }
    (0u64..1 << n)
        .filter(|&x| a.apply_word(x) == b.apply_word(x))
        .count() as u128
}

/// `Pr_X[X_A = X_B]` over uniform `X ∈ {0,1}^n`, by full enumeration.
///
/// Pairs with different deletion counts produce outputs of different
/// lengths and so collide with probability 0.
pub fn collision_probability_exact(
    a: &PatternPair,
    b: &PatternPair,
    caps: &EnumerationCaps,
) -> Result<ExactFraction> {
    let n = a.input_length();
    if b.input_length() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: b.input_length(),
        });
    }
    caps.check_scan(n)?;
    ExactFraction::new(collision_count(a, b), 1u128 << n)
}

/// Which row of the collision case table a pair falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollisionCase {
    /// `A = B`: probability exactly 1.
    Identical,
    /// Same transmission pattern, different flips: exactly 0.
    SameTransmission,
    /// Different transmission, same flips: at most `2^-|Δ_t|`.
    SameSubstitution,
    /// Both differ and `δ_s ⊄ Δ_t`: exactly 0.
    Unaligned,
    /// Both differ and `δ_s ⊆ Δ_t`: at most `2^-|Δ_t|`.
    Aligned,
}

impl CollisionCase {
    pub fn classify(a: &PatternPair, b: &PatternPair) -> Self {
        let same_t = a.transmission() == b.transmission();
        let same_s = a.substitution() == b.substitution();
        match (same_t, same_s) {
            (true, true) => CollisionCase::Identical,
            (true, false) => CollisionCase::SameTransmission,
            (false, true) => CollisionCase::SameSubstitution,
            (false, false) => {
                let delta_t = discrepancy_mask(a.transmission(), b.transmission());
                let delta_s = a.substitution().mask() ^ b.substitution().mask();
                if delta_s & !delta_t == 0 {
                    CollisionCase::Aligned
                } else {
                    CollisionCase::Unaligned
                }
            }
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Default)]
struct CollisionTally {
    checked: u64,
    cases: [u64; 5],
    violations: Vec<String>,
    max_slack: Option<f64>,
}

impl CollisionTally {
    fn merge(mut self, other: CollisionTally) -> Self {
        self.checked += other.checked;
        for (a, b) in self.cases.iter_mut().zip(other.cases) {
            *a += b;
        }
        self.violations.extend(other.violations);
        self.max_slack = match (self.max_slack, other.max_slack) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        };
        self
    }

    fn check(&mut self, a: &PatternPair, b: &PatternPair) {
        let n = a.input_length();
        let count = collision_count(a, b);
        let prob = ExactFraction {
            num: count,
            den: 1u128 << n,
        };
        let delta_t = discrepancy_mask(a.transmission(), b.transmission());
        let delta_s = a.substitution().mask() ^ b.substitution().mask();
        let dt = delta_t.count_ones();
        let aligned = delta_s & !delta_t == 0;
        let case = CollisionCase::classify(a, b);
        self.checked += 1;
        self.cases[case.index()] += 1;

        let mut fail = |why: &str| {
            self.violations
                .push(format!("{why}: A={a:?} B={b:?} Pr={prob} |Δt|={dt}"));
        };
        match case {
            CollisionCase::Identical if !prob.is_one() => fail("A = B but Pr != 1"),
            CollisionCase::SameTransmission | CollisionCase::Unaligned if !prob.is_zero() => {
                fail("expected zero collision probability")
            }
            _ => {}
        }
        // The bound holds for every δ_s, and vanishes off the aligned set.
        if !prob.le_pow2_neg(dt) {
            fail("Pr exceeds 2^-|Δt|");
        }
        if !aligned && !prob.is_zero() {
            fail("δs ⊄ Δt but Pr > 0");
        }
        // Tightness side: aligned pairs with distinct transmissions do collide.
        if aligned && dt > 0 && prob.is_zero() {
            fail("δs ⊆ Δt with A_t != B_t but Pr = 0");
        }
        if count > 0 {
            let slack = -(dt as f64) - prob.log2();
            self.max_slack = Some(self.max_slack.map_or(slack, |m: f64| m.max(slack)));
        }
    }
}

/// Check the collision lemma, its case table, and the unconditional corollary
/// over every ordered pair at `fc`, or over `sample_limit` random pairs.
pub fn verify_lemma_collision(
    fc: &FixedCountParams,
    sample_limit: Option<u64>,
    seed: u64,
    caps: &EnumerationCaps,
) -> Result<LemmaReport> {
    caps.check_scan(fc.n)?;
    let pairs = all_pairs(fc)?;
    let p = pairs.len() as u64;
    let tally = match sample_limit {
        Some(limit) if limit < p * p => {
            let mut rng = stream_rng(seed, 0);
            let picks: Vec<(usize, usize)> = (0..limit)
                .map(|_| {
                    (
                        rng.random_range(0..pairs.len()),
                        rng.random_range(0..pairs.len()),
                    )
                })
                .collect();
            picks
                .par_chunks(1024)
                .map(|chunk| {
                    let mut t = CollisionTally::default();
                    for &(i, j) in chunk {
                        t.check(&pairs[i], &pairs[j]);
                    }
                    t
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(CollisionTally::default(), CollisionTally::merge)
        }
        _ => pairs
            .par_iter()
            .map(|a| {
                let mut t = CollisionTally::default();
                for b in &pairs {
                    t.check(a, b);
                }
                t
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(CollisionTally::default(), CollisionTally::merge),
    };
    let mut report = LemmaReport::new("collision", *fc);
    report.checked = tally.checked;
    report.violations = tally.violations;
    report.max_slack_log2 = tally.max_slack;
    let names = ["identical", "same_t", "same_s", "unaligned", "aligned"];
    for (name, c) in names.iter().zip(tally.cases) {
        report.notes.push((format!("case_{name}"), c.to_string()));
    }
    Ok(report)
}

/// `|Δ_t|`, `|δ_s|` and whether `δ_s ⊆ Δ_t`, for two pairs at one configuration.
fn pair_relation(a: &PatternPair, b: &PatternPair) -> (u32, u32, bool) {
    let delta_t = discrepancy_mask(a.transmission(), b.transmission());
    let delta_s = a.substitution().mask() ^ b.substitution().mask();
    (delta_t.count_ones(), delta_s.count_ones(), delta_s & !delta_t == 0)
}

/// Number of pairs `B` at `a`'s configuration with `δ_s ⊆ Δ_t`,
/// `|Δ_t| <= t` and `|δ_s| <= s`. `B = A` is included.
pub fn count_confusable(a: &PatternPair, t: usize, s: usize, caps: &EnumerationCaps) -> Result<u64> {
    let fc = FixedCountParams::new(a.input_length(), a.deletions(), a.substitutions())?;
    caps.check_scan(fc.n)?;
    let mut count = 0;
    for b in enumerate_pattern_pairs(fc.n, fc.q_d, fc.q_s)? {
        let (dt, ds, aligned) = pair_relation(a, &b);
        if aligned && dt as usize <= t && ds as usize <= s {
            count += 1;
        }
    }
    Ok(count)
}

fn binom_big(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// The confusable-pattern count bound
/// `(s+1)(t+1) C(q_s+s, q_s) C(t+s, s) C(q_d+t, q_d) C(2q_d+t+1, 2q_d+1)`, exactly.
pub fn lemma2_bound_exact(q_d: usize, q_s: usize, t: usize, s: usize) -> BigUint {
    BigUint::from((s + 1) * (t + 1))
        * binom_big(q_s + s, q_s)
        * binom_big(t + s, s)
        * binom_big(q_d + t, q_d)
        * binom_big(2 * q_d + t + 1, 2 * q_d + 1)
}

/// `log2` of [`lemma2_bound_exact`].
pub fn lemma2_bound_log2(q_d: u64, q_s: u64, t: u64, s: u64) -> f64 {
    let lb = |n, k| log2_binomial(n, k).expect("k <= n by construction");
    (((s + 1) * (t + 1)) as f64).log2()
        + lb(q_s + s, q_s)
        + lb(t + s, s)
        + lb(q_d + t, q_d)
        + lb(2 * q_d + t + 1, 2 * q_d + 1)
}

/// Check the confusable-count bound for every anchor at `fc` and every
/// `t <= t_max`, `s <= s_max`. Returns one report per `(t, s)`.
///
/// `bound_shift_bits` divides the bound by `2^shift` before comparing; it is
/// a mutation hook for checking that the verifier catches a broken bound.
pub fn verify_lemma2(
    fc: &FixedCountParams,
    t_max: usize,
    s_max: usize,
    bound_shift_bits: u32,
    caps: &EnumerationCaps,
) -> Result<Vec<LemmaReport>> {
    caps.check_scan(fc.n)?;
    let pairs = all_pairs(fc)?;
    // hist[a][dt][ds]: aligned B at exact distances, per anchor.
    let m = fc.output_length();
    let dims = (m + 1, 2 * fc.q_s + 1);
    let hists: Vec<Vec<u64>> = pairs
        .par_iter()
        .map(|a| {
            let mut h = vec![0u64; dims.0 * dims.1];
            for b in &pairs {
                let (dt, ds, aligned) = pair_relation(a, b);
                if aligned {
                    h[dt as usize * dims.1 + ds as usize] += 1;
                }
            }
            h
        })
        .collect();

    let mut reports = Vec::new();
    for t in 0..=t_max {
        for s in 0..=s_max {
            let bound = lemma2_bound_exact(fc.q_d, fc.q_s, t, s) >> bound_shift_bits as usize;
            let bound_log2 = lemma2_bound_log2(fc.q_d as u64, fc.q_s as u64, t as u64, s as u64)
                - bound_shift_bits as f64;
            let mut report = LemmaReport::new("confusable", *fc);
            report.t = Some(t);
            report.s = Some(s);
            let (mut max_incl, mut max_excl) = (0u64, 0u64);
            for (a, h) in pairs.iter().zip(&hists) {
                let mut count = 0u64;
                for dt in 0..=t.min(m) {
                    for ds in 0..=s.min(dims.1 - 1) {
                        count += h[dt * dims.1 + ds];
                    }
                }
                report.checked += 1;
                max_incl = max_incl.max(count);
                max_excl = max_excl.max(count.saturating_sub(1));
                if BigUint::from(count) > bound {
                    report
                        .violations
                        .push(format!("A={a:?} count={count} bound={bound}"));
                }
                report.record_slack(bound_log2 - (count as f64).log2());
            }
            report.notes.push(("max_count_incl_self".into(), max_incl.to_string()));
            report.notes.push(("max_count_excl_self".into(), max_excl.to_string()));
            reports.push(report);
        }
    }
    Ok(reports)
}

/// Exact (t,s)-bad counts for every `t` and `s` at one configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TsBadGrid {
    pub config: FixedCountParams,
    t_dim: usize,
    s_dim: usize,
    counts: Vec<u64>,
}

impl TsBadGrid {
    /// Number of `X` that are (t,s)-bad. Thresholds past the largest
    /// attainable distance give 0.
    pub fn count(&self, t: usize, s: usize) -> u64 {
        if t >= self.t_dim || s >= self.s_dim {
            return 0;
        }
        self.counts[t * self.s_dim + s]
    }
}

/// Count (t,s)-bad strings for all thresholds at once: for each `X`, group
/// pattern pairs by output and record which `(|Δ_t|, |δ_s|)` occur among
/// colliding ordered pairs (a pair with itself included).
pub fn ts_bad_grid(fc: &FixedCountParams, caps: &EnumerationCaps) -> Result<TsBadGrid> {
    let patterns = fc.pattern_count().unwrap_or(u128::MAX);
    caps.check_pair_scan(fc.n, patterns)?;
    let pairs = all_pairs(fc)?;
    let p = pairs.len();
    let t_dim = fc.output_length() + 1;
    let s_dim = 2 * fc.q_s + 1;
    let mut rel = vec![(0u8, 0u8); p * p];
    for (i, a) in pairs.iter().enumerate() {
        for (j, b) in pairs.iter().enumerate() {
            let (dt, ds, _) = pair_relation(a, b);
            rel[i * p + j] = (dt as u8, ds as u8);
        }
    }
    let n = fc.n;
    let chunk = 256u64;
    let chunks = (1u64 << n).div_ceil(chunk);
    let partial: Vec<Vec<u64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0u64; t_dim * s_dim];
            let mut achieved = vec![false; t_dim * s_dim];
            let mut outputs: Vec<(u64, u32)> = Vec::with_capacity(p);
            for x in c * chunk..((c + 1) * chunk).min(1 << n) {
                outputs.clear();
                outputs.extend(pairs.iter().enumerate().map(|(i, a)| (a.apply_word(x), i as u32)));
                outputs.sort_unstable();
                achieved.iter_mut().for_each(|v| *v = false);
                for group in outputs.chunk_by(|u, v| u.0 == v.0) {
                    for &(_, i) in group {
                        for &(_, j) in group {
                            let (dt, ds) = rel[i as usize * p + j as usize];
                            achieved[dt as usize * s_dim + ds as usize] = true;
                        }
                    }
                }
                // Dominance closure: bad at (t, s) iff some achieved (dt, ds) >= (t, s).
                for t in (0..t_dim).rev() {
                    for s in (0..s_dim).rev() {
                        let here = achieved[t * s_dim + s]
                            || (t + 1 < t_dim && achieved[(t + 1) * s_dim + s])
                            || (s + 1 < s_dim && achieved[t * s_dim + s + 1]);
                        achieved[t * s_dim + s] = here;
                        if here {
                            counts[t * s_dim + s] += 1;
                        }
                    }
                }
            }
            counts
        })
        .collect();
    let mut counts = vec![0u64; t_dim * s_dim];
    for part in partial {
        for (a, b) in counts.iter_mut().zip(part) {
            *a += b;
        }
    }
    Ok(TsBadGrid {
        config: *fc,
        t_dim,
        s_dim,
        counts,
    })
}

/// Number of (t,s)-bad strings in `{0,1}^n` at `fc`.
pub fn count_ts_bad(fc: &FixedCountParams, t: usize, s: usize, caps: &EnumerationCaps) -> Result<u64> {
    Ok(ts_bad_grid(fc, caps)?.count(t, s))
}

/// Check `#bad(t,s) <= C(n,q_d)^2 C(n-q_d,q_s)^2 2^(n-t)` and monotonicity in
/// `t` and `s`, for `t <= t_max`, `s <= s_max`. One report per `(t, s)`.
pub fn verify_ts_bad(
    fc: &FixedCountParams,
    t_max: usize,
    s_max: usize,
    caps: &EnumerationCaps,
) -> Result<Vec<LemmaReport>> {
    let grid = ts_bad_grid(fc, caps)?;
    let patterns = BigUint::from(fc.pattern_count().expect("capped above"));
    let squared = &patterns * &patterns;
    let mut reports = Vec::new();
    for t in 0..=t_max {
        for s in 0..=s_max {
            let count = grid.count(t, s);
            let mut report = LemmaReport::new("ts_bad", *fc);
            report.t = Some(t);
            report.s = Some(s);
            report.checked = 1;
            // count <= P^2 2^(n-t)  <=>  count 2^t <= P^2 2^n
            let lhs = BigUint::from(count) << t;
            let rhs = &squared << fc.n;
            if lhs > rhs {
                report
                    .violations
                    .push(format!("count={count} exceeds P^2 2^(n-t) with P={patterns}"));
            }
            if t > 0 && grid.count(t - 1, s) < count {
                report.violations.push(format!("count increases from t={} to t={t}", t - 1));
            }
            if s > 0 && grid.count(t, s - 1) < count {
                report.violations.push(format!("count increases from s={} to s={s}", s - 1));
            }
            if count > 0 {
                let bound_log2 = 2.0 * (patterns.to_f64().unwrap()).log2() + fc.n as f64 - t as f64;
                report.record_slack(bound_log2 - (count as f64).log2());
            }
            report.notes.push(("bad".into(), count.to_string()));
            reports.push(report);
        }
    }
    Ok(reports)
}

fn check_codebook(codebook: &[BitString], fc: &FixedCountParams, caps: &EnumerationCaps) -> Result<Vec<u64>> {
    caps.check_scan(fc.n)?;
    if codebook.is_empty() {
        return Err(domain("empty codebook"));
    }
    let mut words = Vec::with_capacity(codebook.len());
    let mut seen = HashSet::new();
    for c in codebook {
        if c.len() != fc.n {
            return Err(Error::LengthMismatch {
                expected: fc.n,
                actual: c.len(),
            });
        }
        if !seen.insert(c) {
            return Err(domain(format!("duplicate codeword {c}")));
        }
        words.push(c.as_word().expect("n within scan cap"));
    }
    Ok(words)
}

fn codebook_pattern_total(n_codewords: usize, fc: &FixedCountParams) -> Result<u128> {
    fc.pattern_count()
        .and_then(|p| p.checked_mul(n_codewords as u128))
        .ok_or_else(|| domain("N * #patterns overflows u128"))
}

/// Success probability of the Bayes-optimal guesser of `(Z, A)` from `Z_A`,
/// with `Z` uniform on the codebook and `A` uniform at `fc`.
///
/// Every `(Z, A)` has the same prior mass, so the optimum counts the
/// distinct outputs: each one is guessed right for exactly one preimage.
pub fn optimal_guesser_success(
    codebook: &[BitString],
    fc: &FixedCountParams,
    caps: &EnumerationCaps,
) -> Result<ExactFraction> {
    let words = check_codebook(codebook, fc, caps)?;
    let total = codebook_pattern_total(words.len(), fc)?;
    let pairs = all_pairs(fc)?;
    let outputs: HashSet<u64> = words
        .iter()
        .flat_map(|&z| pairs.iter().map(move |a| a.apply_word(z)))
        .collect();
    ExactFraction::new(outputs.len() as u128, total)
}

/// Success probability of an arbitrary guesser `g(y) -> (codeword index, pattern)`.
pub fn guesser_success<G>(
    codebook: &[BitString],
    fc: &FixedCountParams,
    caps: &EnumerationCaps,
    mut guess: G,
) -> Result<ExactFraction>
where
    G: FnMut(&BitString) -> Option<(usize, PatternPair)>,
{
    let words = check_codebook(codebook, fc, caps)?;
    let total = codebook_pattern_total(words.len(), fc)?;
    let pairs = all_pairs(fc)?;
    let m = fc.output_length();
    let mut hits = 0u128;
    for (zi, &z) in words.iter().enumerate() {
        for a in &pairs {
            let y = BitString::from_word(a.apply_word(z), m);
            if let Some((gz, ga)) = guess(&y) {
                if gz == zi && &ga == a {
                    hits += 1;
                }
            }
        }
    }
    ExactFraction::new(hits, total)
}

/// The guesser ceiling `2^(n-q_d) / (N C(n,q_d) C(n-q_d,q_s))`, capped at 1.
pub fn corollary1_bound(n_codewords: usize, fc: &FixedCountParams) -> Result<ExactFraction> {
    let total = codebook_pattern_total(n_codewords, fc)?;
    let outputs = 1u128
        .checked_shl(fc.output_length() as u32)
        .filter(|_| fc.output_length() < 127)
        .ok_or_else(|| domain("2^(n-q_d) overflows u128"))?;
    ExactFraction::new(outputs.min(total), total)
}

/// Compare the optimal guesser against its ceiling on one codebook.
pub fn verify_guesser(
    codebook: &[BitString],
    fc: &FixedCountParams,
    caps: &EnumerationCaps,
) -> Result<LemmaReport> {
    let success = optimal_guesser_success(codebook, fc, caps)?;
    // Uncapped ceiling: compare success * N * P <= 2^(n-q_d) exactly.
    let lhs = success.numerator();
    let rhs = BigUint::one() << fc.output_length();
    let mut report = LemmaReport::new("guesser", *fc);
    report.checked = 1;
    if BigUint::from(lhs) > rhs {
        report.violations.push(format!(
            "optimal success {success} exceeds 2^(n-qd)/(N P)"
        ));
    }
    if lhs > 0 {
        let bound_log2 = fc.output_length() as f64 - (success.denominator() as f64).log2();
        report.record_slack(bound_log2 - success.log2());
    }
    report.notes.push(("N".into(), codebook.len().to_string()));
    report.notes.push(("success".into(), success.to_string()));
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::patterns::{apply, substitution_symmetric_difference, transmission_discrepancy};
    use std::collections::HashMap;

    fn caps() -> EnumerationCaps {
        EnumerationCaps::default()
    }

    fn pp(n: usize, kept: &[usize], flips: &[usize]) -> PatternPair {
        PatternPair::from_indices(n, kept.to_vec(), flips.to_vec()).unwrap()
    }

    #[test]
    fn collision_examples() {
        let a = pp(3, &[1, 2], &[]);
        assert!(collision_probability_exact(&a, &a, &caps()).unwrap().is_one());

        let b = pp(3, &[1, 2], &[1]);
        assert!(collision_probability_exact(&a, &b, &caps()).unwrap().is_zero());

        let c = pp(3, &[1, 3], &[]);
        let pr = collision_probability_exact(&a, &c, &caps()).unwrap();
        assert_eq!(pr, ExactFraction::new(4, 8).unwrap());
        assert_eq!(transmission_discrepancy(a.transmission(), c.transmission()).unwrap(), vec![2]);
        assert!(pr.le_pow2_neg(1));
    }

    #[test]
    fn collision_different_lengths_is_zero() {
        let a = pp(3, &[1, 2], &[]);
        let b = pp(3, &[1], &[]);
        assert!(collision_probability_exact(&a, &b, &caps()).unwrap().is_zero());
    }

    #[test]
    fn collision_refuses_above_cap() {
        let a = PatternPair::identity(21);
        assert!(matches!(
            collision_probability_exact(&a, &a, &caps()),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn collision_matches_bitstring_path() {
        // Cross-check the word-level scan against BitString::apply.
        let a = pp(5, &[1, 3, 4], &[2]);
        let b = pp(5, &[2, 3, 5], &[1, 2]);
        let direct = (0u64..32)
            .filter(|&x| {
                let xs = BitString::from_word(x, 5);
                apply(&xs, &a).unwrap() == apply(&xs, &b).unwrap()
            })
            .count() as u128;
        let pr = collision_probability_exact(&a, &b, &caps()).unwrap();
        assert_eq!(pr.numerator(), direct);
    }

    #[test]
    fn lemma_collision_small_configs() {
        for (n, q_d, q_s) in [(3, 1, 0), (4, 1, 1)] {
            let fc = FixedCountParams::new(n, q_d, q_s).unwrap();
            let r = verify_lemma_collision(&fc, None, 0, &caps()).unwrap();
            assert!(r.passed(), "{:?}", r.violations);
            let p = fc.pattern_count().unwrap() as u64;
            assert_eq!(r.checked, p * p);
        }
    }

    #[test]
    fn substitution_only_distinct_pairs_never_collide() {
        for q_s in 1..=3 {
            let fc = FixedCountParams::new(5, 0, q_s).unwrap();
            let pairs = all_pairs(&fc).unwrap();
            for a in &pairs {
                for b in &pairs {
                    let pr = collision_probability_exact(a, b, &caps()).unwrap();
                    assert_eq!(pr.is_zero(), a != b);
                }
            }
        }
    }

    #[test]
    fn sampled_collision_check_is_seeded() {
        let fc = FixedCountParams::new(6, 2, 1).unwrap();
        let a = verify_lemma_collision(&fc, Some(500), 11, &caps()).unwrap();
        let b = verify_lemma_collision(&fc, Some(500), 11, &caps()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.checked, 500);
        assert!(a.passed());
    }

    #[test]
    fn aligned_pairs_collide_with_exactly_two_to_minus_delta() {
        // The constraint graph of aligned pairs is a forest, so the bound is tight.
        let fc = FixedCountParams::new(6, 2, 2).unwrap();
        let r = verify_lemma_collision(&fc, None, 0, &caps()).unwrap();
        assert_eq!(r.max_slack_log2, Some(0.0));
    }

    #[test]
    fn confusable_examples() {
        let a = pp(3, &[1, 2], &[]);
        assert_eq!(count_confusable(&a, 0, 0, &caps()).unwrap(), 1);
        assert_eq!(count_confusable(&a, 2, 0, &caps()).unwrap(), 3);

        let fc = FixedCountParams::new(5, 1, 2).unwrap();
        let total = fc.pattern_count().unwrap() as u64;
        for a in all_pairs(&fc).unwrap() {
            assert_eq!(count_confusable(&a, 0, 0, &caps()).unwrap(), 1);
            assert!(count_confusable(&a, 5, 4, &caps()).unwrap() <= total);
        }
    }

    /// Spelled-out reference count with explicit index sets.
    fn confusable_reference(a: &PatternPair, t: usize, s: usize) -> u64 {
        enumerate_pattern_pairs(a.input_length(), a.deletions(), a.substitutions())
            .unwrap()
            .filter(|b| {
                let dt = transmission_discrepancy(a.transmission(), b.transmission()).unwrap();
                let ds = substitution_symmetric_difference(a.substitution(), b.substitution())
                    .unwrap();
                ds.iter().all(|j| dt.contains(j)) && dt.len() <= t && ds.len() <= s
            })
            .count() as u64
    }

    #[test]
    fn confusable_matches_reference_and_bound() {
        for n in 1..=6 {
            for q_d in 0..=2.min(n) {
                for q_s in 0..=2.min(n - q_d) {
                    let fc = FixedCountParams::new(n, q_d, q_s).unwrap();
                    for a in all_pairs(&fc).unwrap() {
                        for t in 0..=3 {
                            for s in 0..=2 {
                                let c = count_confusable(&a, t, s, &caps()).unwrap();
                                assert_eq!(c, confusable_reference(&a, t, s));
                                assert!(
                                    BigUint::from(c) <= lemma2_bound_exact(q_d, q_s, t, s),
                                    "{a:?} t={t} s={s}"
                                );
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn confusable_verifier_agrees_with_direct_counts() {
        let fc = FixedCountParams::new(6, 2, 1).unwrap();
        let reports = verify_lemma2(&fc, 3, 2, 0, &caps()).unwrap();
        assert!(reports.iter().all(|r| r.passed()));
        let anchor = all_pairs(&fc).unwrap()[7].clone();
        for r in &reports {
            let direct = count_confusable(&anchor, r.t.unwrap(), r.s.unwrap(), &caps()).unwrap();
            assert!(BigUint::from(direct) <= lemma2_bound_exact(2, 1, r.t.unwrap(), r.s.unwrap()));
        }
    }

    #[test]
    fn confusable_mutation_is_caught() {
        let fc = FixedCountParams::new(5, 1, 1).unwrap();
        let reports = verify_lemma2(&fc, 2, 1, 50, &caps()).unwrap();
        assert!(reports.iter().all(|r| !r.passed()));
    }

    #[test]
    fn confusable_bound_values() {
        assert_eq!(lemma2_bound_log2(0, 0, 0, 0), 0.0);
        assert_eq!(lemma2_bound_exact(1, 1, 2, 1), BigUint::from(1080u32));
        assert!((lemma2_bound_log2(1, 1, 2, 1) - 1080f64.log2()).abs() < 1e-12);
        assert!((lemma2_bound_log2(1, 1, 2, 1) - 10.077).abs() < 1e-3);
    }

    /// Direct definition: X is bad iff some ordered pair (A, B) collides on X
    /// with |Δ_t| >= t and |δ_s| >= s.
    fn ts_bad_reference(fc: &FixedCountParams, t: usize, s: usize) -> u64 {
        let pairs = all_pairs(fc).unwrap();
        (0u64..1 << fc.n)
            .filter(|&x| {
                pairs.iter().any(|a| {
                    pairs.iter().any(|b| {
                        let (dt, ds, _) = pair_relation(a, b);
                        dt as usize >= t && ds as usize >= s && a.apply_word(x) == b.apply_word(x)
                    })
                })
            })
            .count() as u64
    }

    #[test]
    fn ts_bad_examples() {
        let fc = FixedCountParams::new(5, 1, 1).unwrap();
        assert_eq!(count_ts_bad(&fc, 0, 0, &caps()).unwrap(), 32);
        let fc = FixedCountParams::new(4, 1, 0).unwrap();
        let grid = ts_bad_grid(&fc, &caps()).unwrap();
        for t in 0..=4 {
            assert_eq!(grid.count(t, 0), ts_bad_reference(&fc, t, 0), "t={t}");
        }
        // Any repeated adjacent bit gives a collision; only 0101 and 1010 escape.
        assert_eq!(grid.count(1, 0), 14);
    }

    #[test]
    fn ts_bad_grid_matches_reference() {
        for (n, q_d, q_s) in [(5, 1, 1), (6, 2, 1), (5, 0, 2), (6, 1, 2)] {
            let fc = FixedCountParams::new(n, q_d, q_s).unwrap();
            let grid = ts_bad_grid(&fc, &caps()).unwrap();
            for t in 0..=3 {
                for s in 0..=3 {
                    assert_eq!(grid.count(t, s), ts_bad_reference(&fc, t, s), "{fc:?} t={t} s={s}");
                }
            }
        }
    }

    #[test]
    fn ts_bad_refuses_above_cap() {
        let fc = FixedCountParams::new(11, 1, 0).unwrap();
        assert!(matches!(
            count_ts_bad(&fc, 1, 0, &caps()),
            Err(Error::CapExceeded { .. })
        ));
    }

    #[test]
    fn guesser_examples() {
        let caps = caps();
        let fc = FixedCountParams::new(4, 0, 0).unwrap();
        let one = vec!["1010".parse().unwrap()];
        assert!(optimal_guesser_success(&one, &fc, &caps).unwrap().is_one());
        let full: Vec<BitString> = (0..16).map(|w| BitString::from_word(w, 4)).collect();
        assert!(optimal_guesser_success(&full, &fc, &caps).unwrap().is_one());
        assert!(corollary1_bound(16, &fc).unwrap().is_one());

        let fc = FixedCountParams::new(4, 1, 1).unwrap();
        let book: Vec<BitString> = ["0000", "0110", "1011", "1101"]
            .iter()
            .map(|s| s.parse().unwrap())
            .collect();
        let success = optimal_guesser_success(&book, &fc, &caps).unwrap();
        assert!(success <= ExactFraction::new(8, 4 * 4 * 3).unwrap());
        assert!(verify_guesser(&book, &fc, &caps).unwrap().passed());
    }

    #[test]
    fn guesser_rejects_duplicates() {
        let fc = FixedCountParams::new(3, 0, 0).unwrap();
        let book: Vec<BitString> = vec!["101".parse().unwrap(), "101".parse().unwrap()];
        assert!(optimal_guesser_success(&book, &fc, &caps()).is_err());
    }

    #[test]
    fn optimal_guesser_dominates_random_guessers() {
        let caps = caps();
        let fc = FixedCountParams::new(5, 1, 1).unwrap();
        let pairs = all_pairs(&fc).unwrap();
        let mut rng = stream_rng(2024, 0);
        let book: Vec<BitString> = rand::seq::index::sample(&mut rng, 32, 4)
            .into_iter()
            .map(|w| BitString::from_word(w as u64, 5))
            .collect();
        let best = optimal_guesser_success(&book, &fc, &caps).unwrap();

        // Preimages of each output, for guessers that sometimes answer consistently.
        let mut preimages: HashMap<BitString, Vec<(usize, PatternPair)>> = HashMap::new();
        for (zi, z) in book.iter().enumerate() {
            for a in &pairs {
                preimages
                    .entry(apply(z, a).unwrap())
                    .or_default()
                    .push((zi, a.clone()));
            }
        }
        for g in 0..100u64 {
            let mut table: HashMap<BitString, Option<(usize, PatternPair)>> = HashMap::new();
            let mut grng = stream_rng(2024, g + 1);
            let success = guesser_success(&book, &fc, &caps, |y| {
                table
                    .entry(y.clone())
                    .or_insert_with(|| {
                        if grng.random_bool(0.7) {
                            let c = &preimages[y];
                            Some(c[grng.random_range(0..c.len())].clone())
                        } else {
                            let zi = grng.random_range(0..book.len());
                            Some((zi, pairs[grng.random_range(0..pairs.len())].clone()))
                        }
                    })
                    .clone()
            })
            .unwrap();
            assert!(success <= best, "guesser {g}: {success} > {best}");
        }
    }
}
