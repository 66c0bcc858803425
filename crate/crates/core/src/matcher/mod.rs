//! Exact shift-match statistics.
//!
//! For a sequence of length `n` and window length `k`:
//!
//! * `N(k)`: number of unordered pairs `i < j <= n-k` with equal windows.
//!   The symmetric sum over ordered pairs `i != j` is exactly `2 N(k)`.
//! * `M`: the largest `k` with `N(k) > 0` (0 if none), i.e. the longest
//!   repeated substring, overlapping occurrences allowed.
//! * `T(k)`: the shortest prefix containing a repeated `k`-window.
//!
//! `N(k) = 0`, `M < k` and `T(k) > n` are the same event; the three are
//! computed by separate code paths so [`duality_check`] is a real test.
//!
//! Two-sequence counts use ordered pairs `(i, j)` with `j != i` and require
//! equal lengths.

pub mod suffix;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::potential::Symbol;
use crate::sampler::Sequence;

use suffix::{lcp_array, suffix_array};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatchStats {
    pub n: usize,
    pub k: usize,
    pub count: u64,
}

/// Longest match and its lexicographically smallest witness `(i, j)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverlapReport {
    pub length: usize,
    pub witness: Option<(usize, usize)>,
}

/// Two-sequence longest match, with and without the `j != i` exclusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossOverlapReport {
    pub constrained: OverlapReport,
    pub unconstrained: OverlapReport,
}

/// First prefix length containing a repeated `k`-window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HittingReport {
    pub k: usize,
    /// `None` stands for `T = ∞`.
    pub time: Option<usize>,
    pub witness: Option<(usize, usize)>,
}

impl HittingReport {
    pub fn exceeds(&self, n: usize) -> bool {
        self.time.map_or(true, |t| t > n)
    }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::OutOfRange(format!("window length k={k} must satisfy 1 <= k <= n={n}")));
    }
    Ok(())
}

fn check_pair(s: &Sequence, t: &Sequence) -> Result<()> {
    if s.alphabet() != t.alphabet() {
        return Err(Error::AlphabetMismatch(format!("{} vs {}", s.alphabet(), t.alphabet())));
    }
    if s.len() != t.len() {
        return Err(Error::LengthMismatch(s.len(), t.len()));
    }
    Ok(())
}

#[inline]
fn pairs(c: u64) -> u64 {
    c * c.saturating_sub(1) / 2
}

/// Direct window comparison over all unordered pairs. The oracle.
pub fn count_matches_naive(s: &Sequence, k: usize) -> Result<MatchStats> {
    let n = s.len();
    check_k(n, k)?;
    let x = s.symbols();
    let mut count = 0;
    for i in 0..=n - k {
        for j in i + 1..=n - k {
            if x[i..i + k] == x[j..j + k] {
                count += 1;
            }
        }
    }
    Ok(MatchStats { n, k, count })
}

/// `N(k)` for every `k = 1..=n` at once by comparing every pair of
/// positions symbol by symbol. `profile[k-1] = N(k)`.
pub fn match_profile_naive(s: &Sequence) -> Vec<u64> {
    let x = s.symbols();
    let n = x.len();
    let mut hist = vec![0u64; n + 1];
    for i in 0..n {
        for j in i + 1..n {
            let l = x[i..].iter().zip(&x[j..]).take_while(|(a, b)| a == b).count();
            hist[l] += 1;
        }
    }
    suffix_sums(&hist)
}

fn suffix_sums(hist: &[u64]) -> Vec<u64> {
    let mut out = vec![0u64; hist.len().saturating_sub(1)];
    let mut acc = 0;
    for k in (1..hist.len()).rev() {
        acc += hist[k];
        out[k - 1] = acc;
    }
    out
}

/// Suffix array and LCP of one sequence, reusable across window lengths.
#[derive(Debug, Clone)]
pub struct SuffixIndex {
    sa: Vec<u32>,
    lcp: Vec<u32>,
}

impl SuffixIndex {
    pub fn new(s: &Sequence) -> Self {
        let text: Vec<u32> = s.symbols().iter().map(|&c| c as u32).collect();
        let sa = suffix_array(&text, s.alphabet().size());
        let lcp = lcp_array(&text, &sa);
        SuffixIndex { sa, lcp }
    }

    pub fn len(&self) -> usize {
        self.sa.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sa.is_empty()
    }

    /// `N(k)`: windows of length `k` fall into runs of the suffix array
    /// where adjacent LCP is at least `k`; each run of size `c` gives
    /// `c(c-1)/2` pairs.
    pub fn count(&self, k: usize) -> Result<MatchStats> {
        let n = self.len();
        check_k(n, k)?;
        let k32 = k as u32;
        let mut count = 0;
        let mut run = 1u64;
        for &l in &self.lcp[1..] {
            if l >= k32 {
                run += 1;
            } else {
                count += pairs(run);
                run = 1;
            }
        }
        count += pairs(run);
        Ok(MatchStats { n, k, count })
    }

    pub fn max_match(&self) -> OverlapReport {
        let m = self.lcp.iter().copied().max().unwrap_or(0);
        if m == 0 {
            return OverlapReport { length: 0, witness: None };
        }
        let mut best: Option<(usize, usize)> = None;
        let mut run: Vec<usize> = Vec::new();
        let mut flush = |run: &mut Vec<usize>| {
            if run.len() >= 2 {
                run.sort_unstable();
                let cand = (run[0], run[1]);
                if best.map_or(true, |b| cand < b) {
                    best = Some(cand);
                }
            }
            run.clear();
        };
        for r in 0..self.len() {
            if r > 0 && self.lcp[r] < m {
                flush(&mut run);
            }
            run.push(self.sa[r] as usize);
        }
        flush(&mut run);
        OverlapReport {
            length: m as usize,
            witness: best,
        }
    }
}

/// `N(k)` via the suffix array; equal to [`count_matches_naive`].
pub fn count_matches_fast(s: &Sequence, k: usize) -> Result<MatchStats> {
    check_k(s.len(), k)?;
    SuffixIndex::new(s).count(k)
}

/// Longest repeated window `M`, with the smallest `(i, j)` among maximal matches.
pub fn max_match(s: &Sequence) -> OverlapReport {
    SuffixIndex::new(s).max_match()
}

const HASH_MOD: u64 = (1 << 61) - 1;
const HASH_BASE: u64 = 0x1f3d_5b79_a2c4_e681 % HASH_MOD;

#[inline]
fn mulmod(a: u64, b: u64) -> u64 {
    let p = a as u128 * b as u128;
    let lo = (p as u64) & HASH_MOD;
    let hi = (p >> 61) as u64;
    let s = lo + hi;
    if s >= HASH_MOD {
        s - HASH_MOD
    } else {
        s
    }
}

/// `T(k)`, scanning windows left to right with a rolling hash. Every hash
/// hit is confirmed by comparing the windows, so the answer is exact.
pub fn first_occurrence(s: &Sequence, k: usize) -> Result<HittingReport> {
    if k == 0 {
        return Err(Error::OutOfRange("window length k must be >= 1".into()));
    }
    let x = s.symbols();
    let n = x.len();
    let none = HittingReport { k, time: None, witness: None };
    if k > n {
        return Ok(none);
    }
    let mut top = 1u64; // HASH_BASE^(k-1)
    for _ in 1..k {
        top = mulmod(top, HASH_BASE);
    }
    let digit = |c: Symbol| c as u64 + 1;
    let mut h = 0u64;
    for &c in &x[..k] {
        h = (mulmod(h, HASH_BASE) + digit(c)) % HASH_MOD;
    }
    let mut seen: HashMap<u64, Vec<u32>> = HashMap::new();
    for j in 0..=n - k {
        if j > 0 {
            // drop x[j-1], append x[j+k-1]
            h = (h + HASH_MOD - mulmod(digit(x[j - 1]), top)) % HASH_MOD;
            h = (mulmod(h, HASH_BASE) + digit(x[j + k - 1])) % HASH_MOD;
        }
        let bucket = seen.entry(h).or_default();
        if let Some(&i) = bucket.iter().find(|&&i| x[i as usize..i as usize + k] == x[j..j + k]) {
            return Ok(HittingReport {
                k,
                time: Some(j + k),
                witness: Some((i as usize, j)),
            });
        }
        bucket.push(j as u32);
    }
    Ok(none)
}

/// True iff `N(k) = 0`, `M < k` and `T(k) > n` agree on `s`.
pub fn duality_check(s: &Sequence, k: usize) -> Result<bool> {
    let n = s.len();
    check_k(n, k)?;
    let index = SuffixIndex::new(s);
    let no_pairs = index.count(k)?.count == 0;
    let short = index.max_match().length < k;
    let late = first_occurrence(s, k)?.exceeds(n);
    Ok(no_pairs == short && short == late)
}

/// Generalized suffix array over `s # t` for cross matches between two
/// equal-length sequences.
#[derive(Debug, Clone)]
pub struct CrossIndex {
    n: usize,
    sa: Vec<u32>,
    lcp: Vec<u32>,
    /// `agree[i]`: length of the common prefix of `s[i..]` and `t[i..]`.
    agree: Vec<u32>,
}

impl CrossIndex {
    pub fn new(s: &Sequence, t: &Sequence) -> Result<Self> {
        check_pair(s, t)?;
        let n = s.len();
        let sep = s.alphabet().size() as u32;
        let text: Vec<u32> = s
            .symbols()
            .iter()
            .map(|&c| c as u32)
            .chain(std::iter::once(sep))
            .chain(t.symbols().iter().map(|&c| c as u32))
            .collect();
        let sa = suffix_array(&text, sep as usize + 1);
        let lcp = lcp_array(&text, &sa);
        let mut agree = vec![0u32; n + 1];
        for i in (0..n).rev() {
            if s.symbols()[i] == t.symbols()[i] {
                agree[i] = agree[i + 1] + 1;
            }
        }
        agree.pop();
        Ok(CrossIndex { n, sa, lcp, agree })
    }

    /// Position in `s` (`Ok`) or in `t` (`Err`) of a suffix-array entry;
    /// the separator suffix maps to `None`.
    #[inline]
    fn origin(&self, r: usize) -> Option<std::result::Result<usize, usize>> {
        let p = self.sa[r] as usize;
        match p.cmp(&self.n) {
            std::cmp::Ordering::Less => Some(Ok(p)),
            std::cmp::Ordering::Equal => None,
            std::cmp::Ordering::Greater => Some(Err(p - self.n - 1)),
        }
    }

    /// Visits every maximal run of suffixes sharing a prefix of length `k`,
    /// passing the sorted `s`-positions and `t`-positions in the run.
    fn for_each_run(&self, k: usize, mut f: impl FnMut(&[usize], &[usize]) -> bool) {
        let (mut in_s, mut in_t) = (Vec::new(), Vec::new());
        let k32 = k as u32;
        for r in 0..self.sa.len() {
            if r > 0 && self.lcp[r] < k32 {
                if !in_s.is_empty() && !in_t.is_empty() {
                    in_s.sort_unstable();
                    in_t.sort_unstable();
                    if !f(&in_s, &in_t) {
                        return;
                    }
                }
                in_s.clear();
                in_t.clear();
            }
            match self.origin(r) {
                Some(Ok(i)) => in_s.push(i),
                Some(Err(j)) => in_t.push(j),
                None => {}
            }
        }
        if !in_s.is_empty() && !in_t.is_empty() {
            in_s.sort_unstable();
            in_t.sort_unstable();
            f(&in_s, &in_t);
        }
    }

    /// Ordered pairs `(i, j)`, `j != i`, with `s[i..i+k] = t[j..j+k]`.
    pub fn count(&self, k: usize) -> Result<MatchStats> {
        check_k(self.n, k)?;
        let k32 = k as u32;
        let mut total = 0u64;
        let (mut cs, mut ct) = (0u64, 0u64);
        for r in 0..self.sa.len() {
            if r > 0 && self.lcp[r] < k32 {
                total += cs * ct;
                cs = 0;
                ct = 0;
            }
            match self.origin(r) {
                Some(Ok(_)) => cs += 1,
                Some(Err(_)) => ct += 1,
                None => {}
            }
        }
        total += cs * ct;
        let diagonal = self.agree.iter().filter(|&&a| a >= k32).count() as u64;
        Ok(MatchStats {
            n: self.n,
            k,
            count: total - diagonal,
        })
    }

    /// Longest common window with no position constraint.
    pub fn max_unconstrained(&self) -> OverlapReport {
        let mut len = 0u32;
        for r in 1..self.sa.len() {
            let (a, b) = (self.origin(r - 1), self.origin(r));
            if let (Some(a), Some(b)) = (a, b) {
                if a.is_ok() != b.is_ok() {
                    len = len.max(self.lcp[r]);
                }
            }
        }
        if len == 0 {
            return OverlapReport { length: 0, witness: None };
        }
        let mut best: Option<(usize, usize)> = None;
        self.for_each_run(len as usize, |s, t| {
            let cand = (s[0], t[0]);
            if best.map_or(true, |b| cand < b) {
                best = Some(cand);
            }
            true
        });
        OverlapReport {
            length: len as usize,
            witness: best,
        }
    }

    /// Smallest off-diagonal `(i, j)` in a run, if any.
    fn off_diagonal(s: &[usize], t: &[usize]) -> Option<(usize, usize)> {
        if s[0] != t[0] {
            return Some((s[0], t[0]));
        }
        match (t.get(1), s.get(1)) {
            (Some(&j), _) => Some((s[0], j)),
            (None, Some(&i)) => Some((i, t[0])),
            (None, None) => None,
        }
    }

    fn constrained_witness(&self, k: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        self.for_each_run(k, |s, t| {
            if let Some(cand) = Self::off_diagonal(s, t) {
                if best.map_or(true, |b| cand < b) {
                    best = Some(cand);
                }
            }
            true
        });
        best
    }

    /// Longest common window at positions `i != j`. Existence is monotone
    /// in `k`, so binary search over `1..=unconstrained`.
    pub fn max_constrained(&self, unconstrained: usize) -> OverlapReport {
        let (mut lo, mut hi) = (0usize, unconstrained);
        while lo < hi {
            let mid = (lo + hi + 1) / 2;
            let mut found = false;
            self.for_each_run(mid, |s, t| {
                found = Self::off_diagonal(s, t).is_some();
                !found
            });
            if found {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        OverlapReport {
            length: lo,
            witness: if lo == 0 { None } else { self.constrained_witness(lo) },
        }
    }

    pub fn max_cross_match(&self) -> CrossOverlapReport {
        let unconstrained = self.max_unconstrained();
        CrossOverlapReport {
            constrained: self.max_constrained(unconstrained.length),
            unconstrained,
        }
    }
}

pub fn cross_count(s: &Sequence, t: &Sequence, k: usize) -> Result<MatchStats> {
    check_pair(s, t)?;
    check_k(s.len(), k)?;
    CrossIndex::new(s, t)?.count(k)
}

/// Direct double loop over ordered off-diagonal pairs. The oracle.
pub fn cross_count_naive(s: &Sequence, t: &Sequence, k: usize) -> Result<MatchStats> {
    check_pair(s, t)?;
    let n = s.len();
    check_k(n, k)?;
    let (x, y) = (s.symbols(), t.symbols());
    let mut count = 0;
    for i in 0..=n - k {
        for j in 0..=n - k {
            if i != j && x[i..i + k] == y[j..j + k] {
                count += 1;
            }
        }
    }
    Ok(MatchStats { n, k, count })
}

pub fn max_cross_match(s: &Sequence, t: &Sequence) -> Result<CrossOverlapReport> {
    Ok(CrossIndex::new(s, t)?.max_cross_match())
}
