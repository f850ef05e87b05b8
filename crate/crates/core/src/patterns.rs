//! Bit strings and the pattern-pair algebra of the deletion/substitution channel.
//!
//! A channel realization is a [`PatternPair`]: a [`TransmissionPattern`]
//! listing which input positions survive deletion, followed by a
//! [`SubstitutionPattern`] listing which output positions are flipped.
//! Pattern indices are 1-based (positions in `[n] = {1, ..., n}`); bit
//! strings are indexed from 0 like any Rust slice.
//!
//! Enumeration is lexicographic in the kept/flip sequences, transmission
//! pattern first, and every enumeration supports random access by rank so
//! scans can be split into independent rank ranges.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::numerics::checked_binomial;

/// A fixed-length binary word packed into 64-bit limbs.
///
/// Bit `i` lives in limb `i / 64` at bit `i % 64`. Unused high bits of the
/// last limb are always zero, so derived equality and hashing are exact.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        BitString {
            len,
            words: vec![0; len.div_ceil(64)],
        }
    }

    pub fn with_capacity(len: usize) -> Self {
        BitString {
            len: 0,
            words: Vec::with_capacity(len.div_ceil(64)),
        }
    }

    /// The low `len` bits of `word`, bit 0 first.
    pub fn from_word(word: u64, len: usize) -> Self {
        assert!(len <= 64, "from_word needs len <= 64");
        let mask = low_mask(len);
        BitString {
            len,
            words: if len == 0 { Vec::new() } else { vec![word & mask] },
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let iter = bits.into_iter();
        let mut out = BitString::with_capacity(iter.size_hint().0);
        for b in iter {
            out.push(b);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let m = 1u64 << (i % 64);
        if bit {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len.is_multiple_of(64) {
            self.words.push(0);
        }
        if bit {
            self.words[self.len / 64] |= 1u64 << (self.len % 64);
        }
        self.len += 1;
    }

    /// The whole string as one word, when it fits.
    pub fn as_word(&self) -> Option<u64> {
        match self.len {
            0 => Some(0),
            1..=64 => Some(self.words[0]),
            _ => None,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }
}

/// Lexicographic order on the bit sequence (bit 0 most significant); a
/// proper prefix sorts first.
impl Ord for BitString {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.words.iter().zip(&other.words) {
            if a != b {
                let first = (a ^ b).trailing_zeros();
                return ((a >> first) & 1).cmp(&((b >> first) & 1));
            }
        }
        self.len.cmp(&other.len)
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(domain(format!("invalid bit character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(BitString::from_bits)
    }
}

pub(crate) fn low_mask(len: usize) -> u64 {
    if len >= 64 {
        u64::MAX
    } else {
        (1u64 << len) - 1
    }
}

fn check_increasing(seq: &[usize], upper: usize, what: &str) -> Result<()> {
    let mut prev = 0usize;
    for &v in seq {
        if v <= prev || v > upper {
            return Err(domain(format!(
                "{what} must be strictly increasing within [1, {upper}], got {seq:?}"
            )));
        }
        prev = v;
    }
    Ok(())
}

/// Which input positions survive deletion (1-based, strictly increasing).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransmissionPattern {
    parent_length: usize,
    kept: Vec<usize>,
}

impl TransmissionPattern {
    pub fn new(parent_length: usize, kept: Vec<usize>) -> Result<Self> {
        check_increasing(&kept, parent_length, "transmission pattern")?;
        Ok(TransmissionPattern {
            parent_length,
            kept,
        })
    }

    /// No deletions.
    pub fn identity(n: usize) -> Self {
        TransmissionPattern {
            parent_length: n,
            kept: (1..=n).collect(),
        }
    }

    pub fn parent_length(&self) -> usize {
        self.parent_length
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn output_length(&self) -> usize {
        self.kept.len()
    }

    pub fn deletions(&self) -> usize {
        self.parent_length - self.kept.len()
    }
}

/// Which output positions are flipped (1-based, strictly increasing).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubstitutionPattern {
    output_length: usize,
    flips: Vec<usize>,
}

impl SubstitutionPattern {
    pub fn new(output_length: usize, flips: Vec<usize>) -> Result<Self> {
        check_increasing(&flips, output_length, "substitution pattern")?;
        Ok(SubstitutionPattern {
            output_length,
            flips,
        })
    }

    pub fn none(output_length: usize) -> Self {
        SubstitutionPattern {
            output_length,
            flips: Vec::new(),
        }
    }

    pub fn output_length(&self) -> usize {
        self.output_length
    }

    pub fn flips(&self) -> &[usize] {
        &self.flips
    }

    pub fn substitutions(&self) -> usize {
        self.flips.len()
    }

    /// Flip positions as a bit mask (bit `j - 1` for flip `j`); needs `output_length <= 64`.
    pub fn mask(&self) -> u64 {
        debug_assert!(self.output_length <= 64);
        self.flips.iter().fold(0u64, |m, &j| m | 1u64 << (j - 1))
    }
}

/// One full channel realization `(A_t, A_s)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatternPair {
    t: TransmissionPattern,
    s: SubstitutionPattern,
}

impl PatternPair {
    pub fn new(t: TransmissionPattern, s: SubstitutionPattern) -> Result<Self> {
        if s.output_length != t.output_length() {
            return Err(Error::LengthMismatch {
                expected: t.output_length(),
                actual: s.output_length,
            });
        }
        Ok(PatternPair { t, s })
    }

    /// Build from raw 1-based index lists.
    pub fn from_indices(n: usize, kept: Vec<usize>, flips: Vec<usize>) -> Result<Self> {
        let t = TransmissionPattern::new(n, kept)?;
        let s = SubstitutionPattern::new(t.output_length(), flips)?;
        Ok(PatternPair { t, s })
    }

    pub fn identity(n: usize) -> Self {
        PatternPair {
            t: TransmissionPattern::identity(n),
            s: SubstitutionPattern::none(n),
        }
    }

    pub fn transmission(&self) -> &TransmissionPattern {
        &self.t
    }

    pub fn substitution(&self) -> &SubstitutionPattern {
        &self.s
    }

    pub fn input_length(&self) -> usize {
        self.t.parent_length
    }

    pub fn output_length(&self) -> usize {
        self.t.output_length()
    }

    pub fn deletions(&self) -> usize {
        self.t.deletions()
    }

    pub fn substitutions(&self) -> usize {
        self.s.substitutions()
    }

    /// Word-level [`apply`] for inputs of at most 64 bits.
    pub fn apply_word(&self, x: u64) -> u64 {
        let mut out = 0u64;
        for (j, &k) in self.t.kept.iter().enumerate() {
            out |= ((x >> (k - 1)) & 1) << j;
        }
        out ^ self.s.mask()
    }
}

/// Pass `x` through the realization `a`: keep `A_t`, then flip `A_s`.
pub fn apply(x: &BitString, a: &PatternPair) -> Result<BitString> {
    if x.len() != a.input_length() {
        return Err(Error::LengthMismatch {
            expected: a.input_length(),
            actual: x.len(),
        });
    }
    if let Some(w) = x.as_word() {
        return Ok(BitString::from_word(a.apply_word(w), a.output_length()));
    }
    let mut out = BitString::with_capacity(a.output_length());
    for &k in &a.t.kept {
        out.push(x.get(k - 1));
    }
    for &j in &a.s.flips {
        let b = out.get(j - 1);
        out.set(j - 1, !b);
    }
    Ok(out)
}

/// Index positions (1-based) where two equal-length transmission patterns disagree.
pub fn transmission_discrepancy(
    a: &TransmissionPattern,
    b: &TransmissionPattern,
) -> Result<Vec<usize>> {
    if a.parent_length != b.parent_length {
        return Err(Error::LengthMismatch {
            expected: a.parent_length,
            actual: b.parent_length,
        });
    }
    if a.kept.len() != b.kept.len() {
        return Err(Error::LengthMismatch {
            expected: a.kept.len(),
            actual: b.kept.len(),
        });
    }
    Ok(a.kept
        .iter()
        .zip(&b.kept)
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| i + 1)
        .collect())
}

/// Elements in exactly one of the two flip sets.
pub fn substitution_symmetric_difference(
    a: &SubstitutionPattern,
    b: &SubstitutionPattern,
) -> Result<Vec<usize>> {
    if a.output_length != b.output_length {
        return Err(Error::LengthMismatch {
            expected: a.output_length,
            actual: b.output_length,
        });
    }
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::new();
    while i < a.flips.len() || j < b.flips.len() {
        match (a.flips.get(i), b.flips.get(j)) {
            (Some(x), Some(y)) if x == y => {
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                out.push(*x);
                i += 1;
            }
            (Some(x), None) => {
                out.push(*x);
                i += 1;
            }
            (_, Some(y)) => {
                out.push(*y);
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    Ok(out)
}

/// `Δ(A_t, B_t)` as a bit mask over output positions (bit `i - 1` for index `i`).
///
/// Both patterns must share `n` and `q_d`, and the output must fit in 64 bits.
pub fn discrepancy_mask(a: &TransmissionPattern, b: &TransmissionPattern) -> u64 {
    debug_assert_eq!(a.kept.len(), b.kept.len());
    a.kept
        .iter()
        .zip(&b.kept)
        .enumerate()
        .fold(0u64, |m, (i, (x, y))| if x != y { m | 1 << i } else { m })
}

/// Unrank a `k`-subset of `[n]` in lexicographic order (rank 0 is `1, 2, ..., k`).
pub fn unrank_combination(n: usize, k: usize, mut rank: u128) -> Result<Vec<usize>> {
    let total = checked_binomial(n as u64, k as u64)
        .ok_or_else(|| domain(format!("C({n}, {k}) overflows u128")))?;
    if k > n || rank >= total {
        return Err(domain(format!("rank {rank} out of range for C({n}, {k})")));
    }
    let mut out = Vec::with_capacity(k);
    let mut next = 1usize;
    for slot in 0..k {
        loop {
            // Subsets whose `slot`-th element is `next`.
            let with_next = checked_binomial((n - next) as u64, (k - slot - 1) as u64)
                .expect("bounded by total");
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    Ok(out)
}

/// Lexicographic successor of a `k`-subset of `[n]` in place; `false` at the last one.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if c[i] < n - (k - 1 - i) {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Lexicographic stream of `k`-subsets of `[n]` over a rank range.
#[derive(Clone, Debug)]
pub struct Combinations {
    n: usize,
    current: Vec<usize>,
    remaining: u128,
}

impl Combinations {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        let total = checked_binomial(n as u64, k as u64)
            .ok_or_else(|| domain(format!("C({n}, {k}) overflows u128")))?;
        Self::range(n, k, 0, total)
    }

    /// Subsets with ranks in `start .. start + count`.
    pub fn range(n: usize, k: usize, start: u128, count: u128) -> Result<Self> {
        if k > n {
            return Err(domain(format!("cannot choose {k} of {n}")));
        }
        let total = checked_binomial(n as u64, k as u64)
            .ok_or_else(|| domain(format!("C({n}, {k}) overflows u128")))?;
        let count = count.min(total.saturating_sub(start));
        let current = if count > 0 {
            unrank_combination(n, k, start)?
        } else {
            Vec::new()
        };
        Ok(Combinations {
            n,
            current,
            remaining: count,
        })
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.current.clone();
        if self.remaining > 0 {
            next_combination(&mut self.current, self.n);
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (r, Some(r))
    }
}

/// Every transmission pattern with `q_d` deletions out of `n`, lexicographic in `kept`.
pub fn enumerate_transmission_patterns(
    n: usize,
    q_d: usize,
) -> Result<impl Iterator<Item = TransmissionPattern>> {
    if q_d > n {
        return Err(domain(format!("q_d = {q_d} exceeds n = {n}")));
    }
    Ok(Combinations::new(n, n - q_d)?.map(move |kept| TransmissionPattern {
        parent_length: n,
        kept,
    }))
}

/// Number of pattern pairs `C(n, q_d) * C(n - q_d, q_s)`, if it fits in `u128`.
pub fn pattern_pair_count(n: usize, q_d: usize, q_s: usize) -> Option<u128> {
    if q_d > n || q_s > n - q_d {
        return Some(0);
    }
    let t = checked_binomial(n as u64, q_d as u64)?;
    let s = checked_binomial((n - q_d) as u64, q_s as u64)?;
    t.checked_mul(s)
}

/// The pattern pair at `rank` in enumeration order (transmission-major).
pub fn pattern_pair_at(n: usize, q_d: usize, q_s: usize, rank: u128) -> Result<PatternPair> {
    check_counts(n, q_d, q_s)?;
    let m = n - q_d;
    let per_t = checked_binomial(m as u64, q_s as u64)
        .ok_or_else(|| domain("substitution pattern count overflows u128"))?;
    // Ranking transmission patterns by their kept set: choosing `m` of `n`.
    let kept = unrank_combination(n, m, rank / per_t)?;
    let flips = unrank_combination(m, q_s, rank % per_t)?;
    Ok(PatternPair {
        t: TransmissionPattern {
            parent_length: n,
            kept,
        },
        s: SubstitutionPattern {
            output_length: m,
            flips,
        },
    })
}

fn check_counts(n: usize, q_d: usize, q_s: usize) -> Result<()> {
    if q_d > n {
        return Err(domain(format!("q_d = {q_d} exceeds n = {n}")));
    }
    if q_s > n - q_d {
        return Err(domain(format!(
            "q_s = {q_s} exceeds surviving length {}",
            n - q_d
        )));
    }
    Ok(())
}

/// Stream of pattern pairs over a rank range.
#[derive(Clone, Debug)]
pub struct PatternPairs {
    n: usize,
    m: usize,
    t: Vec<usize>,
    s: Combinations,
    s_restart: Combinations,
    remaining: u128,
}

impl Iterator for PatternPairs {
    type Item = PatternPair;

    fn next(&mut self) -> Option<PatternPair> {
        if self.remaining == 0 {
            return None;
        }
        let flips = match self.s.next() {
            Some(f) => f,
            None => {
                next_combination(&mut self.t, self.n);
                self.s = self.s_restart.clone();
                self.s.next().expect("at least one substitution pattern")
            }
        };
        self.remaining -= 1;
        Some(PatternPair {
            t: TransmissionPattern {
                parent_length: self.n,
                kept: self.t.clone(),
            },
            s: SubstitutionPattern {
                output_length: self.m,
                flips,
            },
        })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let r = usize::try_from(self.remaining).unwrap_or(usize::MAX);
        (r, Some(r))
    }
}

/// Every pattern pair with exactly `q_d` deletions and `q_s` substitutions.
pub fn enumerate_pattern_pairs(n: usize, q_d: usize, q_s: usize) -> Result<PatternPairs> {
    let total = pattern_pair_count(n, q_d, q_s)
        .ok_or_else(|| domain("pattern pair count overflows u128"))?;
    pattern_pair_range(n, q_d, q_s, 0, total)
}

/// Pattern pairs with ranks in `start .. start + count`.
pub fn pattern_pair_range(
    n: usize,
    q_d: usize,
    q_s: usize,
    start: u128,
    count: u128,
) -> Result<PatternPairs> {
    check_counts(n, q_d, q_s)?;
    let m = n - q_d;
    let total = pattern_pair_count(n, q_d, q_s)
        .ok_or_else(|| domain("pattern pair count overflows u128"))?;
    let count = count.min(total.saturating_sub(start));
    let per_t = checked_binomial(m as u64, q_s as u64).expect("bounded by total");
    let s_restart = Combinations::new(m, q_s)?;
    if count == 0 {
        return Ok(PatternPairs {
            n,
            m,
            t: Vec::new(),
            s: s_restart.clone(),
            s_restart,
            remaining: 0,
        });
    }
    let t = unrank_combination(n, m, start / per_t)?;
    let s = Combinations::range(m, q_s, start % per_t, per_t)?;
    Ok(PatternPairs {
        n,
        m,
        t,
        s,
        s_restart,
        remaining: count,
    })
}
