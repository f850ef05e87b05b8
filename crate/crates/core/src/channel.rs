//! Channel models: the i.i.d. deletion/substitution channel, its two-stage
//! decomposition (deletion channel, then a BSC with `p_s' = p_s / (1 - p_d)`),
//! and the uniform fixed-count channel.
//!
//! Every sampler takes its RNG explicitly. [`stream_rng`] gives the
//! reproducible, splittable generator used across the crate: ChaCha8 keyed by
//! the seed with the stream id in its nonce, so distinct `(seed, stream)`
//! pairs never share keystream.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Error, Result};
use crate::numerics::checked_binomial;
use crate::patterns::{
    unrank_combination, BitString, PatternPair, SubstitutionPattern, TransmissionPattern,
};

/// Deterministic generator for stream `stream` of experiment `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deletion and substitution probabilities of the i.i.d. channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams {
    p_d: f64,
    p_s: f64,
}

impl ChannelParams {
    pub fn new(p_d: f64, p_s: f64) -> Result<Self> {
        if p_d.is_nan() || !(0.0..1.0).contains(&p_d) {
            return Err(domain(format!("p_d = {p_d} must lie in [0, 1)")));
        }
        if p_s.is_nan() || !(0.0..1.0).contains(&p_s) {
            return Err(domain(format!("p_s = {p_s} must lie in [0, 1)")));
        }
        if p_d + p_s > 1.0 {
            return Err(domain(format!("p_d + p_s = {} exceeds 1", p_d + p_s)));
        }
        Ok(ChannelParams { p_d, p_s })
    }

    pub fn p_d(&self) -> f64 {
        self.p_d
    }

    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    /// Probability of correct transmission.
    pub fn p_c(&self) -> f64 {
        (1.0 - self.p_d - self.p_s).max(0.0)
    }

    /// `p_s'` of the two-stage decomposition.
    pub fn p_s_prime(&self) -> f64 {
        self.p_s / (1.0 - self.p_d)
    }

    /// Exact rational form of the shortest decimal rendering of each probability.
    pub fn to_exact(&self) -> Result<ExactChannelParams> {
        ExactChannelParams::new(
            decimal_to_rational(&self.p_d.to_string())?,
            decimal_to_rational(&self.p_s.to_string())?,
        )
    }
}

/// `p_s / (1 - p_d)`, the substitution probability of the second stage.
pub fn equivalent_substitution_prob(params: &ChannelParams) -> Result<f64> {
    if params.p_d >= 1.0 {
        return Err(domain("p_d = 1 leaves no surviving bits"));
    }
    Ok(params.p_s_prime())
}

/// Exactly `q_d` deletions and `q_s` substitutions on `n` input bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FixedCountParams {
    pub n: usize,
    pub q_d: usize,
    pub q_s: usize,
}

impl FixedCountParams {
    pub fn new(n: usize, q_d: usize, q_s: usize) -> Result<Self> {
        if q_d > n {
            return Err(domain(format!("q_d = {q_d} exceeds n = {n}")));
        }
        if q_s > n - q_d {
            return Err(domain(format!(
                "q_s = {q_s} exceeds n - q_d = {}",
                n - q_d
            )));
        }
        Ok(FixedCountParams { n, q_d, q_s })
    }

    pub fn output_length(&self) -> usize {
        self.n - self.q_d
    }

    /// `C(n, q_d) * C(n - q_d, q_s)` when it fits in `u128`.
    pub fn pattern_count(&self) -> Option<u128> {
        crate::patterns::pattern_pair_count(self.n, self.q_d, self.q_s)
    }
}

/// Draw from the i.i.d. channel: each bit is deleted with probability `p_d`,
/// flipped with probability `p_s`, and kept intact otherwise.
pub fn transmit_iid<R: Rng + ?Sized>(
    x: &BitString,
    params: &ChannelParams,
    rng: &mut R,
) -> (BitString, PatternPair) {
    let mut y = BitString::with_capacity(x.len());
    let mut kept = Vec::with_capacity(x.len());
    let mut flips = Vec::new();
    let flip_edge = params.p_d + params.p_s;
    for (i, bit) in x.iter().enumerate() {
        let u: f64 = rng.random();
        if u < params.p_d {
            continue;
        }
        kept.push(i + 1);
        let flipped = u < flip_edge;
        if flipped {
            flips.push(kept.len());
        }
        y.push(bit ^ flipped);
    }
    (y, realized(x.len(), kept, flips))
}

/// Draw from the two-stage construction: delete i.i.d. with `p_d`, then flip
/// each survivor i.i.d. with `p_s'`.
pub fn transmit_two_stage<R: Rng + ?Sized>(
    x: &BitString,
    params: &ChannelParams,
    rng: &mut R,
) -> (BitString, PatternPair) {
    let kept: Vec<usize> = (1..=x.len())
        .filter(|_| !rng.random_bool(params.p_d))
        .collect();
    let p_flip = params.p_s_prime().min(1.0);
    let flips: Vec<usize> = (1..=kept.len())
        .filter(|_| rng.random_bool(p_flip))
        .collect();
    let mut y = BitString::with_capacity(kept.len());
    let mut next_flip = flips.iter().peekable();
    for (j, &k) in kept.iter().enumerate() {
        let flipped = next_flip.next_if(|&&f| f == j + 1).is_some();
        y.push(x.get(k - 1) ^ flipped);
    }
    (y, realized(x.len(), kept, flips))
}

fn realized(n: usize, kept: Vec<usize>, flips: Vec<usize>) -> PatternPair {
    let m = kept.len();
    PatternPair::new(
        TransmissionPattern::new(n, kept).expect("increasing by construction"),
        SubstitutionPattern::new(m, flips).expect("increasing by construction"),
    )
    .expect("lengths agree by construction")
}

/// A uniformly random `k`-subset of `[n]`, sorted.
fn uniform_subset<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Vec<usize> {
    match checked_binomial(n as u64, k as u64) {
        Some(total) => {
            let rank = rng.random_range(0..total);
            unrank_combination(n, k, rank).expect("rank in range")
        }
        None => {
            let mut v: Vec<usize> = index::sample(rng, n, k).into_iter().map(|i| i + 1).collect();
            v.sort_unstable();
            v
        }
    }
}

/// A pattern pair drawn uniformly from all `C(n, q_d) C(n - q_d, q_s)` pairs.
pub fn sample_fixed_count_pair<R: Rng + ?Sized>(fc: &FixedCountParams, rng: &mut R) -> PatternPair {
    let m = fc.output_length();
    let kept = uniform_subset(fc.n, m, rng);
    let flips = uniform_subset(m, fc.q_s, rng);
    realized(fc.n, kept, flips)
}

/// Channel probabilities as exact rationals.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactChannelParams {
    pub p_d: BigRational,
    pub p_s: BigRational,
}

impl ExactChannelParams {
    pub fn new(p_d: BigRational, p_s: BigRational) -> Result<Self> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        if p_d < zero || p_d >= one || p_s < zero || p_s >= one || &p_d + &p_s > one {
            return Err(domain(format!("invalid exact channel params ({p_d}, {p_s})")));
        }
        Ok(ExactChannelParams { p_d, p_s })
    }

    pub fn p_c(&self) -> BigRational {
        BigRational::one() - &self.p_d - &self.p_s
    }

    pub fn p_s_prime(&self) -> BigRational {
        &self.p_s / (BigRational::one() - &self.p_d)
    }
}

/// Parse a plain decimal such as `0.25` or `3e-2` into an exact rational.
pub fn decimal_to_rational(s: &str) -> Result<BigRational> {
    let bad = || domain(format!("not a decimal number: {s:?}"));
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    if !digits.chars().all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    let mut value = BigRational::from_integer(digits.parse::<BigInt>().map_err(|_| bad())?);
    let shift = exp - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
    if shift >= 0 {
        value *= scale;
    } else {
        value /= scale;
    }
    Ok(if neg { -value } else { value })
}

/// Output-string law of one input under a channel, with exact probabilities.
pub type ExactLaw = BTreeMap<BitString, BigRational>;

/// Exact output law of the i.i.d. channel, by enumerating all `3^n`
/// per-bit outcomes (delete / flip / keep).
pub fn exact_law_iid(x: &BitString, params: &ExactChannelParams) -> ExactLaw {
    let p_c = params.p_c();
    let mut law = ExactLaw::new();
    let mut stack: Vec<(usize, BitString, BigRational)> =
        vec![(0, BitString::with_capacity(x.len()), BigRational::one())];
    while let Some((i, y, p)) = stack.pop() {
        if p.is_zero() {
            continue;
        }
        if i == x.len() {
            *law.entry(y).or_insert_with(BigRational::zero) += p;
            continue;
        }
        let bit = x.get(i);
        stack.push((i + 1, y.clone(), &p * &params.p_d));
        let mut flipped = y.clone();
        flipped.push(!bit);
        stack.push((i + 1, flipped, &p * &params.p_s));
        let mut kept = y;
        kept.push(bit);
        stack.push((i + 1, kept, p * &p_c));
    }
    law
}

/// Exact output law of the two-stage construction: sum over every deletion
/// set and every flip set of the survivors.
pub fn exact_law_two_stage(x: &BitString, params: &ExactChannelParams) -> Result<ExactLaw> {
    let n = x.len();
    if n > 20 {
        return Err(Error::CapExceeded {
            what: "exact two-stage law length",
            value: n as u64,
            cap: 20,
        });
    }
    let one = BigRational::one();
    let keep = &one - &params.p_d;
    let p_flip = params.p_s_prime();
    let no_flip = &one - &p_flip;
    let word = x.as_word().expect("n <= 20");
    let mut law = ExactLaw::new();
    for del_mask in 0u64..(1 << n) {
        let q_d = del_mask.count_ones() as usize;
        let m = n - q_d;
        let p_del = num_traits::pow(params.p_d.clone(), q_d) * num_traits::pow(keep.clone(), m);
        let mut survivors = 0u64;
        let mut j = 0;
        for i in 0..n {
            if del_mask >> i & 1 == 0 {
                survivors |= (word >> i & 1) << j;
                j += 1;
            }
        }
        for flip_mask in 0u64..(1 << m) {
            let q_s = flip_mask.count_ones() as usize;
            let p = &p_del
                * num_traits::pow(p_flip.clone(), q_s)
                * num_traits::pow(no_flip.clone(), m - q_s);
            if p.is_zero() {
                continue;
            }
            let y = BitString::from_word(survivors ^ flip_mask, m);
            *law.entry(y).or_insert_with(BigRational::zero) += p;
        }
    }
    Ok(law)
}
