//! Seeded Monte Carlo studies.
//!
//! Trials run in fixed-size chunks; chunk `c` draws from its own RNG stream,
//! so every result is a function of the seed alone, whatever the thread count.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};
use statrs::function::factorial::ln_factorial;

use crate::bounds::{chernoff_gamma, theorem1_rhs, LogBase, TVariant};
use crate::channel::{
    exact_law_iid, exact_law_two_stage, sample_fixed_count_pair, stream_rng, transmit_iid,
    transmit_two_stage, ChannelParams, FixedCountParams,
};
use crate::error::{domain, Error, Result};
use crate::oracles::{
    corollary1_bound, guesser_success, optimal_guesser_success, EnumerationCaps, ExactFraction,
};
use crate::patterns::{enumerate_pattern_pairs, BitString, PatternPair};

/// Trials per RNG stream.
pub const TRIAL_CHUNK: usize = 4096;
/// Default largest block length for exhaustive decoding.
pub const DEFAULT_DECODE_CAP: usize = 16;
/// Two-sided confidence level of the success-rate interval.
pub const CONFIDENCE: f64 = 0.99;
/// Largest `n` for the exact decomposition check.
pub const EXACT_DECOMPOSITION_MAX_N: usize = 8;
/// Chi-square tests reject below this p-value.
pub const CHI_SQUARE_ALPHA: f64 = 1e-3;

const GUESSER_PATTERN_CAP: u128 = 1 << 16;
const GUESSER_EXACT_COST: u128 = 1 << 22;

/// Mismatch counts reachable by aligning all of `y` into a subsequence of `x`.
///
/// Returns a bitset over `0..=limit`, or `None` when `y` is longer than `x`.
fn mismatch_sets(x: &BitString, y: &BitString, limit: usize) -> Option<Vec<u64>> {
    let (n, m) = (x.len(), y.len());
    if m > n {
        return None;
    }
    let width = limit.min(m) + 1;
    let words = width.div_ceil(64);
    let top_mask = if width % 64 == 0 { u64::MAX } else { (1u64 << (width % 64)) - 1 };
    let mut dp = vec![0u64; (m + 1) * words];
    dp[0] = 1;
    for i in 0..n {
        let xi = x.get(i);
        // y[j-1] must land at or before x[i], and the rest of y must still fit.
        let lo = (m + i + 1).saturating_sub(n).max(1);
        let hi = (i + 1).min(m);
        for j in (lo..=hi).rev() {
            let (head, tail) = dp.split_at_mut(j * words);
            let src = &head[(j - 1) * words..];
            let dst = &mut tail[..words];
            if xi == y.get(j - 1) {
                for w in 0..words {
                    dst[w] |= src[w];
                }
            } else {
                let mut carry = 0u64;
                for w in 0..words {
                    dst[w] |= (src[w] << 1) | carry;
                    carry = src[w] >> 63;
                }
            }
            dst[words - 1] &= top_mask;
        }
    }
    Some(dp[m * words..].to_vec())
}

/// Whether some pattern pair with exactly `q_s` flips maps `x` to `y`, i.e.
/// some length-`|y|` subsequence of `x` is at Hamming distance exactly `q_s`
/// from `y`.
pub fn reachable(x: &BitString, y: &BitString, q_s: usize) -> bool {
    if q_s > y.len() {
        return false;
    }
    mismatch_sets(x, y, q_s).is_some_and(|bits| bits[q_s / 64] >> (q_s % 64) & 1 == 1)
}

/// As [`reachable`], with at most `q_s` flips.
pub fn reachable_at_most(x: &BitString, y: &BitString, q_s: usize) -> bool {
    mismatch_sets(x, y, q_s).is_some_and(|bits| bits.iter().any(|&w| w != 0))
}

/// Returns the lexicographically first codeword consistent with an output.
#[derive(Clone, Debug)]
pub struct ConsistentDecoder<'a> {
    codebook: &'a [BitString],
    order: Vec<usize>,
    q_s: usize,
}

impl<'a> ConsistentDecoder<'a> {
    pub fn new(codebook: &'a [BitString], q_s: usize) -> Self {
        let mut order: Vec<usize> = (0..codebook.len()).collect();
        order.sort_by(|&a, &b| codebook[a].cmp(&codebook[b]));
        ConsistentDecoder { codebook, order, q_s }
    }

    /// Index into the codebook of the decoded codeword, or `None` to abstain.
    pub fn decode(&self, y: &BitString) -> Option<usize> {
        self.order
            .iter()
            .copied()
            .find(|&i| reachable(&self.codebook[i], y, self.q_s))
    }

    /// Every consistent codeword index, in lexicographic codeword order.
    pub fn consistent(&self, y: &BitString) -> Vec<usize> {
        self.order
            .iter()
            .copied()
            .filter(|&i| reachable(&self.codebook[i], y, self.q_s))
            .collect()
    }
}

/// One-shot form of [`ConsistentDecoder::decode`].
pub fn consistent_decoder<'a>(
    y: &BitString,
    codebook: &'a [BitString],
    q_s: usize,
) -> Option<&'a BitString> {
    ConsistentDecoder::new(codebook, q_s)
        .decode(y)
        .map(|i| &codebook[i])
}

/// Wilson score interval for `successes` out of `trials` at two-sided `level`.
pub fn wilson_interval(successes: u64, trials: u64, level: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(domain(format!("invalid proportion {successes}/{trials}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(domain(format!("confidence level {level} outside (0, 1)")));
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal")
        .inverse_cdf(0.5 + level / 2.0);
    let nt = trials as f64;
    let p = successes as f64 / nt;
    let z2 = z * z;
    let denom = 1.0 + z2 / nt;
    let center = (p + z2 / (2.0 * nt)) / denom;
    let half = z * (p * (1.0 - p) / nt + z2 / (4.0 * nt * nt)).sqrt() / denom;
    let lo = if successes == 0 { 0.0 } else { (center - half).clamp(0.0, 1.0) };
    let hi = if successes == trials { 1.0 } else { (center + half).clamp(0.0, 1.0) };
    Ok((lo, hi))
}

fn chunk_ranges(total: u64) -> Vec<(u64, u64)> {
    let chunk = TRIAL_CHUNK as u64;
    (0..total.div_ceil(chunk))
        .map(|c| (c * chunk, ((c + 1) * chunk).min(total)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecodeTrialConfig {
    pub fc: FixedCountParams,
    /// Codebook size `N`.
    pub codebook_size: u64,
    pub trials: u64,
    pub seed: u64,
    pub decode_cap: usize,
    pub t_variant: TVariant,
}

impl DecodeTrialConfig {
    pub fn new(fc: FixedCountParams, codebook_size: u64, trials: u64, seed: u64) -> Self {
        DecodeTrialConfig {
            fc,
            codebook_size,
            trials,
            seed,
            decode_cap: DEFAULT_DECODE_CAP,
            t_variant: TVariant::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.fc.n;
        if n > self.decode_cap.min(63) {
            return Err(Error::CapExceeded {
                what: "block length for exhaustive decoding",
                value: n as u64,
                cap: self.decode_cap.min(63) as u64,
            });
        }
        if self.codebook_size == 0 || self.codebook_size > 1u64 << n {
            return Err(domain(format!(
                "codebook size {} outside 1..=2^{n}",
                self.codebook_size
            )));
        }
        if self.trials == 0 {
            return Err(domain("decode experiment needs at least one trial"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialRecord {
    pub trial: u64,
    pub q_d: usize,
    pub q_s: usize,
    pub success: bool,
}

/// The paired guesser (decoded codeword plus the first pattern that explains
/// the output) against the guessing ceiling on the same codebook.
#[derive(Clone, Debug, PartialEq)]
pub struct GuesserCheck {
    pub hits: u64,
    pub empirical: f64,
    /// `None` when the exhaustive evaluation is over its cost limit.
    pub exact: Option<ExactFraction>,
    pub optimal: Option<ExactFraction>,
    pub bound: ExactFraction,
    pub sigma: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecodeReport {
    pub config: DecodeTrialConfig,
    pub codebook: Vec<BitString>,
    pub successes: u64,
    pub delta_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Fixed-count ceiling on `log2 N` at `ci_lo`. `None` when it has no
    /// finite form (no deletions or no substitutions), infinite when `ci_lo = 0`.
    pub rhs_log2_n: Option<f64>,
    pub log2_n: f64,
    /// Trials where more than one codeword was consistent.
    pub ambiguous: u64,
    /// Trials where no codeword was consistent. Zero under the true channel.
    pub unexplained: u64,
    /// Failures with a single consistent codeword. Zero for a correct decoder.
    pub unique_failures: u64,
    pub guesser: Option<GuesserCheck>,
    pub trial_log: Vec<TrialRecord>,
    pub pass: bool,
}

pub const TRIAL_CSV_HEADER: &str = "trial,qd,qs,success";
pub const DECODE_SUMMARY_HEADER: &str = "delta_hat,ci_lo,ci_hi,rhs_log2N,log2N,pass";

impl DecodeReport {
    pub fn failures(&self) -> u64 {
        self.config.trials - self.successes
    }

    pub fn trial_csv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.trial_log.len() + 1));
        out.push_str(TRIAL_CSV_HEADER);
        out.push('\n');
        for r in &self.trial_log {
            let _ = writeln!(out, "{},{},{},{}", r.trial, r.q_d, r.q_s, r.success as u8);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let rhs = match self.rhs_log2_n {
            None => "na".to_string(),
            Some(v) if v.is_infinite() => "inf".to_string(),
            Some(v) => format!("{v:.9}"),
        };
        format!(
            "{DECODE_SUMMARY_HEADER}\n{:.9},{:.9},{:.9},{rhs},{:.9},{}\n",
            self.delta_hat, self.ci_lo, self.ci_hi, self.log2_n, self.pass
        )
    }
}

/// `size` distinct codewords of length `n`, drawn from stream 0 of `seed`.
/// A full-size request returns all of `{0,1}^n` in numeric order.
pub fn random_codebook(n: usize, size: u64, seed: u64) -> Result<Vec<BitString>> {
    if n > 63 || size == 0 || size > 1u64 << n {
        return Err(domain(format!("cannot draw {size} distinct codewords of length {n}")));
    }
    Ok(sample_codebook(n, size, seed))
}

fn sample_codebook(n: usize, size: u64, seed: u64) -> Vec<BitString> {
    let mut rng = stream_rng(seed, 0);
    let words: Vec<u64> = if size == 1u64 << n {
        (0..size).collect()
    } else if n < usize::BITS as usize {
        index::sample(&mut rng, 1usize << n, size as usize)
            .into_iter()
            .map(|w| w as u64)
            .collect()
    } else {
        let mut set = std::collections::BTreeSet::new();
        while (set.len() as u64) < size {
            set.insert(rng.random::<u64>() & ((1u64 << n) - 1));
        }
        set.into_iter().collect()
    };
    words.into_iter().map(|w| BitString::from_word(w, n)).collect()
}

struct ChunkTally {
    successes: u64,
    ambiguous: u64,
    unexplained: u64,
    unique_failures: u64,
    guesser_hits: u64,
    records: Vec<TrialRecord>,
}

/// Random codebook, uniform codeword, uniform fixed-count pattern, exhaustive
/// consistent decoding; then the fixed-count ceiling checked at the lower
/// confidence endpoint of the observed success rate.
pub fn run_decode_experiment(cfg: &DecodeTrialConfig, caps: &EnumerationCaps) -> Result<DecodeReport> {
    cfg.validate()?;
    let fc = cfg.fc;
    let codebook = sample_codebook(fc.n, cfg.codebook_size, cfg.seed);
    let decoder = ConsistentDecoder::new(&codebook, fc.q_s);
    let m = fc.output_length();

    let guess_pairs: Option<Vec<PatternPair>> = match fc.pattern_count() {
        Some(p) if p <= GUESSER_PATTERN_CAP => Some(enumerate_pattern_pairs(fc.n, fc.q_d, fc.q_s)?.collect()),
        _ => None,
    };
    let guess = |y: &BitString| -> Option<(usize, PatternPair)> {
        let pairs = guess_pairs.as_ref()?;
        let zi = decoder.decode(y)?;
        let word = codebook[zi].as_word()?;
        let yw = y.as_word()?;
        pairs
            .iter()
            .find(|a| a.apply_word(word) == yw)
            .map(|a| (zi, a.clone()))
    };

    let tallies: Vec<ChunkTally> = chunk_ranges(cfg.trials)
        .into_par_iter()
        .enumerate()
        .map(|(c, (start, end))| {
            let mut rng = stream_rng(cfg.seed, c as u64 + 1);
            let mut tally = ChunkTally {
                successes: 0,
                ambiguous: 0,
                unexplained: 0,
                unique_failures: 0,
                guesser_hits: 0,
                records: Vec::with_capacity((end - start) as usize),
            };
            for trial in start..end {
                let zi = rng.random_range(0..codebook.len());
                let a = sample_fixed_count_pair(&fc, &mut rng);
                let y = BitString::from_word(a.apply_word(codebook[zi].as_word().expect("n <= 63")), m);
                let consistent = decoder.consistent(&y);
                let success = consistent.first() == Some(&zi);
                match consistent.len() {
                    0 => tally.unexplained += 1,
                    1 if !success => tally.unique_failures += 1,
                    1 => {}
                    _ => tally.ambiguous += 1,
                }
                tally.successes += success as u64;
                if let Some((gz, ga)) = guess(&y) {
                    tally.guesser_hits += (gz == zi && ga == a) as u64;
                }
                tally.records.push(TrialRecord { trial, q_d: fc.q_d, q_s: fc.q_s, success });
            }
            tally
        })
        .collect();

    let mut successes = 0;
    let mut ambiguous = 0;
    let mut unexplained = 0;
    let mut unique_failures = 0;
    let mut guesser_hits = 0;
    let mut trial_log = Vec::with_capacity(cfg.trials as usize);
    for t in tallies {
        successes += t.successes;
        ambiguous += t.ambiguous;
        unexplained += t.unexplained;
        unique_failures += t.unique_failures;
        guesser_hits += t.guesser_hits;
        trial_log.extend(t.records);
    }

    let delta_hat = successes as f64 / cfg.trials as f64;
    let (ci_lo, ci_hi) = wilson_interval(successes, cfg.trials, CONFIDENCE)?;
    let log2_n = (cfg.codebook_size as f64).log2();
    let rhs_log2_n = if fc.q_d == 0 || fc.q_s == 0 {
        None
    } else if ci_lo == 0.0 {
        Some(f64::INFINITY)
    } else {
        let b = theorem1_rhs(fc.n as u64, fc.q_d as u64, fc.q_s as u64, ci_lo, cfg.t_variant)?;
        Some(b.total_log2_n)
    };
    let bound_holds = rhs_log2_n.is_none_or(|r| log2_n <= r);

    let guesser = match guess_pairs {
        None => None,
        Some(ref pairs) => {
            let bound = corollary1_bound(codebook.len(), &fc)?;
            let cost = (codebook.len() as u128) * (pairs.len() as u128) * (codebook.len() as u128);
            let (exact, optimal) = if cost <= GUESSER_EXACT_COST && fc.n <= caps.scan_n {
                (
                    Some(guesser_success(&codebook, &fc, caps, guess)?),
                    Some(optimal_guesser_success(&codebook, &fc, caps)?),
                )
            } else {
                (None, None)
            };
            let b = bound.to_f64();
            let sigma = (b * (1.0 - b) / cfg.trials as f64).sqrt();
            let empirical = guesser_hits as f64 / cfg.trials as f64;
            let exact_ok = match (&exact, &optimal) {
                (Some(e), Some(o)) => e <= o && o <= &bound,
                _ => true,
            };
            Some(GuesserCheck {
                hits: guesser_hits,
                empirical,
                exact,
                optimal,
                bound,
                sigma,
                pass: exact_ok && empirical <= b + 3.0 * sigma,
            })
        }
    };

    let pass = bound_holds
        && unexplained == 0
        && unique_failures == 0
        && guesser.as_ref().is_none_or(|g| g.pass);
    Ok(DecodeReport {
        config: *cfg,
        codebook,
        successes,
        delta_hat,
        ci_lo,
        ci_hi,
        rhs_log2_n,
        log2_n,
        ambiguous,
        unexplained,
        unique_failures,
        guesser,
        trial_log,
        pass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConcentrationConfig {
    pub n: u64,
    pub p: f64,
    pub trials: u64,
    pub delta: f64,
    pub seed: u64,
    pub log_base: LogBase,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConcentrationReport {
    pub config: ConcentrationConfig,
    pub mean: f64,
    /// `None` when `p = 0`: the count is identically zero.
    pub gamma: Option<f64>,
    pub tail_count: u64,
    pub empirical_tail: f64,
    /// `2 exp(-mu gamma^2 / 3)`.
    pub chernoff_bound: f64,
    pub sigma_chernoff: f64,
    pub sigma_quarter: f64,
    pub within_chernoff: bool,
    pub within_quarter_delta: bool,
    /// Smallest `n` with `gamma <= 1/2`, when known.
    pub n_min: Option<u64>,
    pub warnings: Vec<String>,
}

impl ConcentrationReport {
    pub fn pass(&self) -> bool {
        self.within_chernoff && self.within_quarter_delta
    }

    pub fn csv(&self) -> String {
        let c = &self.config;
        let warn = self.warnings.join("; ");
        format!(
            "n,p,delta,trials,gamma,mean,tail_count,empirical_tail,chernoff_bound,quarter_delta,pass,warning\n\
             {},{},{},{},{},{:.9},{},{:.9},{:.9},{:.9},{},{}\n",
            c.n,
            c.p,
            c.delta,
            c.trials,
            self.gamma.map_or("na".to_string(), |g| format!("{g:.9}")),
            self.mean,
            self.tail_count,
            self.empirical_tail,
            self.chernoff_bound,
            c.delta / 4.0,
            self.pass(),
            warn.replace(',', ";"),
        )
    }
}

fn sampling_sigma(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// Frequency of `|q - np| >= gamma np` for `q ~ Bin(n, p)` against the
/// Chernoff tail and against `delta / 4`, each with three binomial sigmas.
pub fn run_concentration_check(cfg: &ConcentrationConfig) -> Result<ConcentrationReport> {
    if cfg.p.is_nan() || !(0.0..=1.0).contains(&cfg.p) {
        return Err(domain(format!("p = {} outside [0, 1]", cfg.p)));
    }
    if cfg.trials == 0 {
        return Err(domain("concentration check needs at least one trial"));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) {
        return Err(domain(format!("delta = {} outside (0, 1)", cfg.delta)));
    }
    let mean = cfg.n as f64 * cfg.p;
    let quarter = cfg.delta / 4.0;
    let sigma_quarter = sampling_sigma(quarter, cfg.trials);
    let mut warnings = Vec::new();

    if cfg.p == 0.0 || cfg.n == 0 {
        return Ok(ConcentrationReport {
            config: *cfg,
            mean,
            gamma: None,
            tail_count: 0,
            empirical_tail: 0.0,
            chernoff_bound: 0.0,
            sigma_chernoff: 0.0,
            sigma_quarter,
            within_chernoff: true,
            within_quarter_delta: true,
            n_min: None,
            warnings: vec!["mean is zero: the count never deviates".into()],
        });
    }

    let gamma = chernoff_gamma(cfg.n, cfg.p, cfg.delta, cfg.log_base)?;
    let log8 = match cfg.log_base {
        LogBase::Mixed => (8.0 / cfg.delta).ln(),
        LogBase::AllBase2 => (8.0 / cfg.delta).log2(),
    };
    let n_min = (12.0 * log8 / cfg.p).ceil() as u64;
    if cfg.n < n_min {
        warnings.push(format!(
            "n = {} is below the minimum block length {n_min}; gamma = {gamma:.4} exceeds 1/2",
            cfg.n
        ));
    }
    let threshold = gamma * mean;
    let tail_count: u64 = chunk_ranges(cfg.trials)
        .into_par_iter()
        .enumerate()
        .map(|(c, (start, end))| {
            let mut rng = stream_rng(cfg.seed, c as u64);
            (start..end)
                .filter(|_| {
                    let q = (0..cfg.n).filter(|_| rng.random_bool(cfg.p)).count();
                    (q as f64 - mean).abs() >= threshold
                })
                .count() as u64
        })
        .sum();
    let empirical_tail = tail_count as f64 / cfg.trials as f64;
    let chernoff_bound = (2.0 * (-mean * gamma * gamma / 3.0).exp()).min(1.0);
    let sigma_chernoff = sampling_sigma(chernoff_bound, cfg.trials);
    Ok(ConcentrationReport {
        config: *cfg,
        mean,
        gamma: Some(gamma),
        tail_count,
        empirical_tail,
        chernoff_bound,
        sigma_chernoff,
        sigma_quarter,
        within_chernoff: empirical_tail <= chernoff_bound + 3.0 * sigma_chernoff,
        within_quarter_delta: empirical_tail <= quarter + 3.0 * sigma_quarter,
        n_min: Some(n_min),
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChiSquareSummary {
    pub construction: &'static str,
    pub trials: u64,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Observations in cells of probability zero.
    pub impossible: u64,
}

impl ChiSquareSummary {
    pub fn pass(&self) -> bool {
        self.impossible == 0 && self.p_value >= CHI_SQUARE_ALPHA
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionReport {
    pub n: usize,
    pub params: ChannelParams,
    /// Inputs compared exactly; `None` above the exact size limit.
    pub exact_inputs: Option<usize>,
    pub mismatched_inputs: Vec<BitString>,
    pub sampled: Vec<ChiSquareSummary>,
}

impl DecompositionReport {
    pub fn pass(&self) -> bool {
        self.mismatched_inputs.is_empty() && self.sampled.iter().all(ChiSquareSummary::pass)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("check,n,pd,ps,detail,result\n");
        let (pd, ps) = (self.params.p_d(), self.params.p_s());
        if let Some(k) = self.exact_inputs {
            let _ = writeln!(
                out,
                "exact,{},{pd},{ps},inputs={k} mismatched={},{}",
                self.n,
                self.mismatched_inputs.len(),
                self.mismatched_inputs.is_empty()
            );
        }
        for s in &self.sampled {
            let _ = writeln!(
                out,
                "chi2_{},{},{pd},{ps},trials={} stat={:.6} dof={} p={:.6},{}",
                s.construction,
                self.n,
                s.trials,
                s.statistic,
                s.dof,
                s.p_value,
                s.pass()
            );
        }
        out
    }
}

/// `P(q_d = a, q_s = b)` under the trinomial law on `n` bits.
fn trinomial_pmf(n: usize, a: usize, b: usize, params: &ChannelParams) -> f64 {
    let c = n - a - b;
    let term = |k: usize, p: f64| if k == 0 { 0.0 } else if p == 0.0 { f64::NEG_INFINITY } else { k as f64 * p.ln() };
    let log = ln_factorial(n as u64) - ln_factorial(a as u64) - ln_factorial(b as u64) - ln_factorial(c as u64)
        + term(a, params.p_d())
        + term(b, params.p_s())
        + term(c, params.p_c());
    log.exp()
}

fn chi_square(
    construction: &'static str,
    n: usize,
    params: &ChannelParams,
    observed: &BTreeMap<(usize, usize), u64>,
    trials: u64,
) -> ChiSquareSummary {
    let total = trials as f64;
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut rest_e, mut rest_o) = (0.0, 0.0);
    let mut impossible = 0;
    for a in 0..=n {
        for b in 0..=n - a {
            let e = total * trinomial_pmf(n, a, b, params);
            let o = observed.get(&(a, b)).copied().unwrap_or(0);
            if e == 0.0 {
                impossible += o;
            } else if e < 5.0 {
                rest_e += e;
                rest_o += o as f64;
            } else {
                bins.push((e, o as f64));
            }
        }
    }
    if rest_e > 0.0 {
        if rest_e >= 5.0 || bins.is_empty() {
            bins.push((rest_e, rest_o));
        } else {
            let smallest = bins
                .iter_mut()
                .min_by(|x, y| x.0.total_cmp(&y.0))
                .expect("non-empty");
            smallest.0 += rest_e;
            smallest.1 += rest_o;
        }
    }
    let statistic: f64 = bins.iter().map(|&(e, o)| (o - e) * (o - e) / e).sum();
    let dof = bins.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64).expect("positive dof").cdf(statistic)
    };
    ChiSquareSummary { construction, trials, statistic, dof, p_value, impossible }
}

fn sample_counts<F>(trials: u64, seed: u64, stream_base: u64, draw: F) -> BTreeMap<(usize, usize), u64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> PatternPair + Sync,
{
    let mut counts = BTreeMap::new();
    let parts: Vec<BTreeMap<(usize, usize), u64>> = chunk_ranges(trials)
        .into_par_iter()
        .enumerate()
        .map(|(c, (start, end))| {
            let mut rng = stream_rng(seed, stream_base + 2 * c as u64);
            let mut local = BTreeMap::new();
            for _ in start..end {
                let a = draw(&mut rng);
                *local.entry((a.deletions(), a.substitutions())).or_insert(0) += 1;
            }
            local
        })
        .collect();
    for part in parts {
        for (k, v) in part {
            *counts.entry(k).or_insert(0) += v;
        }
    }
    counts
}

/// Checks that the i.i.d. channel equals deletion followed by a BSC with `p_s'`:
/// exactly for every input when `n` is small, and by a chi-square test of the
/// joint `(q_d, q_s)` counts of both samplers against the trinomial law.
pub fn verify_decomposition(
    n: usize,
    params: &ChannelParams,
    trials: u64,
    seed: u64,
) -> Result<DecompositionReport> {
    if n > 63 {
        return Err(domain(format!("block length {n} exceeds 63")));
    }
    let (exact_inputs, mismatched_inputs) = if n <= EXACT_DECOMPOSITION_MAX_N {
        let exact = params.to_exact()?;
        let mismatched: Vec<BitString> = (0..1u64 << n)
            .into_par_iter()
            .map(|w| -> Result<Option<BitString>> {
                let x = BitString::from_word(w, n);
                let one = exact_law_iid(&x, &exact);
                let two = exact_law_two_stage(&x, &exact)?;
                Ok((one != two).then_some(x))
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
        (Some(1usize << n), mismatched)
    } else {
        (None, Vec::new())
    };

    let mut sampled = Vec::new();
    if trials > 0 {
        let mut rng = stream_rng(seed, 0);
        let x = BitString::from_word(rng.random_range(0..1u64 << n), n);
        let p = *params;
        let xi = x.clone();
        let iid = sample_counts(trials, seed, 1, move |r| transmit_iid(&xi, &p, r).1);
        let two = sample_counts(trials, seed, 2, move |r| transmit_two_stage(&x, &p, r).1);
        sampled.push(chi_square("iid", n, params, &iid, trials));
        sampled.push(chi_square("two_stage", n, params, &two, trials));
    }
    Ok(DecompositionReport {
        n,
        params: *params,
        exact_inputs,
        mismatched_inputs,
        sampled,
    })
}
