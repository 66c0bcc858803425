//! Finite-range, translation-invariant interactions on a finite alphabet.
//!
//! An interaction assigns an energy to every finite set of sites `A` and the
//! symbols it sees. Translation invariance lets us store each term once,
//! anchored so that `min(A) = 0`; a term is an offset set `S ⊆ {0..R}` with
//! `0 ∈ S` together with a dense coupling table over the `m^|S|` patterns on
//! `S`. Translates are generated on demand when a Hamiltonian is evaluated.
//!
//! Boltzmann weights are `exp(-H)`, so with [`Interaction::ising`] a positive
//! `J` favours anti-aligned neighbours and `J < 0` is the ferromagnet.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Index of a symbol in its [`Alphabet`].
pub type Symbol = u8;

/// Largest number of entries a single coupling table may hold.
const MAX_TABLE_LEN: usize = 1 << 20;

/// Ordered set of distinct, opaque tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    tokens: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let tokens: Vec<String> = tokens.into_iter().map(Into::into).collect();
        if tokens.is_empty() {
            return Err(Error::Alphabet("alphabet is empty".into()));
        }
        if tokens.len() > Symbol::MAX as usize {
            return Err(Error::Alphabet(format!(
                "at most {} symbols supported, got {}",
                Symbol::MAX,
                tokens.len()
            )));
        }
        for (i, t) in tokens.iter().enumerate() {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(Error::Alphabet(format!(
                    "token {t:?} must be non-empty and free of whitespace"
                )));
            }
            if tokens[..i].contains(t) {
                return Err(Error::Alphabet(format!("duplicate token {t:?}")));
            }
        }
        Ok(Alphabet { tokens })
    }

    /// `m` single-letter tokens `a, b, c, ...`.
    pub fn letters(m: usize) -> Result<Self> {
        if m == 0 || m > 26 {
            return Err(Error::Alphabet(format!("letters() supports 1..=26 symbols, got {m}")));
        }
        Alphabet::new((0..m).map(|i| ((b'a' + i as u8) as char).to_string()))
    }

    /// The binary alphabet `{0, 1}`.
    pub fn binary() -> Self {
        Alphabet::new(["0", "1"]).expect("static alphabet")
    }

    /// Ising spins `{+1, -1}` (index 0 is `+1`).
    pub fn spins() -> Self {
        Alphabet::new(["+1", "-1"]).expect("static alphabet")
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn token(&self, s: Symbol) -> &str {
        &self.tokens[s as usize]
    }

    pub fn index_of(&self, token: &str) -> Option<Symbol> {
        self.tokens.iter().position(|t| t == token).map(|i| i as Symbol)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<Symbol>> {
        tokens
            .iter()
            .map(|t| {
                self.index_of(t.as_ref())
                    .ok_or_else(|| Error::UnknownSymbol(t.as_ref().to_string()))
            })
            .collect()
    }

    /// Parses a string of single-character tokens.
    pub fn encode_chars(&self, s: &str) -> Result<Vec<Symbol>> {
        let mut buf = [0u8; 4];
        s.chars()
            .map(|c| {
                let t = c.encode_utf8(&mut buf);
                self.index_of(t).ok_or_else(|| Error::UnknownSymbol(t.to_string()))
            })
            .collect()
    }

    /// True when every token is a single character.
    pub fn is_single_char(&self) -> bool {
        self.tokens.iter().all(|t| t.chars().count() == 1)
    }

    pub(crate) fn check(&self, pattern: &[Symbol]) -> Result<()> {
        match pattern.iter().find(|&&s| s as usize >= self.size()) {
            Some(s) => Err(Error::UnknownSymbol(format!("#{s}"))),
            None => Ok(()),
        }
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.tokens.join(","))
    }
}

/// A pattern placed at a base index of the lattice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Window {
    pub pattern: Vec<Symbol>,
    pub base: i64,
}

impl Window {
    pub fn new(pattern: Vec<Symbol>, base: i64) -> Result<Self> {
        if pattern.is_empty() {
            return Err(Error::OutOfRange("window must have length >= 1".into()));
        }
        Ok(Window { pattern, base })
    }

    pub fn len(&self) -> usize {
        self.pattern.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pattern.is_empty()
    }
}

impl AsRef<[Symbol]> for Window {
    fn as_ref(&self) -> &[Symbol] {
        &self.pattern
    }
}

/// One anchored term as written in a model file: `U(offsets, pattern) = value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Term {
    pub offsets: Vec<usize>,
    pub pattern: Vec<Symbol>,
    pub value: f64,
}

/// A finite-range translation-invariant interaction.
///
/// Immutable once built; [`scale`](Interaction::scale) and
/// [`add`](Interaction::add) return new values.
#[derive(Debug, Clone)]
pub struct Interaction {
    name: String,
    alphabet: Alphabet,
    range: usize,
    // offset set (sorted, starts at 0) -> coupling table indexed by pattern code
    tables: BTreeMap<Vec<usize>, Vec<f64>>,
}

impl PartialEq for Interaction {
    /// Structural equality of the couplings; the name is provenance only.
    fn eq(&self, other: &Self) -> bool {
        self.alphabet == other.alphabet
            && self.range == other.range
            && self.nonzero_terms() == other.nonzero_terms()
    }
}

fn pattern_code(m: usize, symbols: impl Iterator<Item = Symbol>) -> usize {
    symbols.fold(0usize, |acc, s| acc * m + s as usize)
}

impl Interaction {
    /// Builds an interaction from anchored terms. Duplicate terms are summed.
    pub fn new(alphabet: Alphabet, range: usize, terms: &[Term]) -> Result<Self> {
        let mut u = Interaction::zero_with_range(alphabet, range)?;
        for t in terms {
            u.validate_term(t)?;
            let m = u.alphabet.size();
            let len = m.pow(t.offsets.len() as u32);
            let table = u
                .tables
                .entry(t.offsets.clone())
                .or_insert_with(|| vec![0.0; len]);
            table[pattern_code(m, t.pattern.iter().copied())] += t.value;
        }
        Ok(u)
    }

    /// Checks the anchoring invariants of a single term.
    pub fn validate_term(&self, t: &Term) -> Result<()> {
        if t.offsets.first() != Some(&0) {
            return Err(Error::Interaction(format!(
                "offsets {:?} must start at 0",
                t.offsets
            )));
        }
        if t.offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Interaction(format!(
                "offsets {:?} must be strictly increasing",
                t.offsets
            )));
        }
        let last = *t.offsets.last().unwrap();
        if last > self.range {
            return Err(Error::Interaction(format!(
                "offsets {:?} exceed range {}",
                t.offsets, self.range
            )));
        }
        if t.pattern.len() != t.offsets.len() {
            return Err(Error::Interaction(format!(
                "pattern length {} does not match {} offsets",
                t.pattern.len(),
                t.offsets.len()
            )));
        }
        self.alphabet.check(&t.pattern)?;
        if !t.value.is_finite() {
            return Err(Error::Interaction(format!("coupling {} is not finite", t.value)));
        }
        if self.alphabet.size().checked_pow(t.offsets.len() as u32).map_or(true, |n| n > MAX_TABLE_LEN) {
            return Err(Error::Interaction(format!(
                "coupling table over {} sites is too large",
                t.offsets.len()
            )));
        }
        Ok(())
    }

    fn zero_with_range(alphabet: Alphabet, range: usize) -> Result<Self> {
        if alphabet.size() < 2 {
            return Err(Error::Interaction(
                "interactions need at least two symbols; a one-symbol sequence is a Dirac sequence"
                    .into(),
            ));
        }
        Ok(Interaction {
            name: String::new(),
            alphabet,
            range,
            tables: BTreeMap::new(),
        })
    }

    /// The zero interaction: uniform product measure on `alphabet`.
    pub fn zero(alphabet: Alphabet) -> Result<Self> {
        Ok(Interaction::zero_with_range(alphabet, 0)?.named("zero"))
    }

    /// Nearest-neighbour Ising chain on `{+1, -1}` with pair coupling `j` and field `h`.
    pub fn ising(j: f64, h: f64) -> Self {
        Interaction::long_range_ising(&[j], h).named(format!("ising(J={j},h={h})"))
    }

    /// Ising chain with couplings `U({i, i+d}) = j[d-1] σ_i σ_{i+d}` for
    /// `d = 1..=j.len()`. Decaying couplings must be truncated by the caller.
    pub fn long_range_ising(j: &[f64], h: f64) -> Self {
        let range = j.len();
        let mut tables = BTreeMap::new();
        // index 0 is +1, index 1 is -1
        tables.insert(vec![0], vec![h, -h]);
        for (d, &jd) in j.iter().enumerate() {
            tables.insert(vec![0, d + 1], vec![jd, -jd, -jd, jd]);
        }
        Interaction {
            name: format!("long_range_ising(J={},h={h})", join_reals(j)),
            alphabet: Alphabet::spins(),
            range,
            tables,
        }
    }

    /// Single-site potential `g(a) = -ln p(a)` on the letter alphabet.
    pub fn iid_weights(p: &[f64]) -> Result<Self> {
        Interaction::iid_weights_on(Alphabet::letters(p.len())?, p)
    }

    /// Single-site potential realizing the product measure with marginals `p`.
    pub fn iid_weights_on(alphabet: Alphabet, p: &[f64]) -> Result<Self> {
        if p.len() != alphabet.size() {
            return Err(Error::Interaction(format!(
                "{} probabilities for {} symbols",
                p.len(),
                alphabet.size()
            )));
        }
        if let Some(x) = p.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
            return Err(Error::Interaction(format!("probability {x} is not strictly positive")));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Interaction(format!("probabilities sum to {total}, not 1")));
        }
        let mut u = Interaction::zero_with_range(alphabet, 0)?;
        u.tables.insert(vec![0], p.iter().map(|x| -x.ln()).collect());
        Ok(u.named(format!("iid({})", join_reals(p))))
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn range(&self) -> usize {
        self.range
    }

    /// Block length of the transfer construction, `max(R, 1)`.
    pub fn block_len(&self) -> usize {
        self.range.max(1)
    }

    /// All terms with a nonzero coupling, in canonical order.
    pub fn nonzero_terms(&self) -> Vec<Term> {
        let m = self.alphabet.size();
        let mut out = Vec::new();
        for (offsets, table) in &self.tables {
            for (code, &value) in table.iter().enumerate() {
                if value != 0.0 {
                    let mut pattern = vec![0; offsets.len()];
                    let mut c = code;
                    for slot in pattern.iter_mut().rev() {
                        *slot = (c % m) as Symbol;
                        c /= m;
                    }
                    out.push(Term {
                        offsets: offsets.clone(),
                        pattern,
                        value,
                    });
                }
            }
        }
        out
    }

    /// True when every coupling is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.tables.values().flatten().all(|&v| v == 0.0)
    }

    /// `qU`: every coupling multiplied by `q`.
    pub fn scale(&self, q: f64) -> Self {
        let mut out = self.clone();
        for v in out.tables.values_mut().flatten() {
            *v *= q;
        }
        out.name = format!("{}*{}", q, self.name);
        out
    }

    /// `U + V`, term by term. The range is the larger of the two.
    pub fn add(&self, other: &Interaction) -> Result<Self> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch(format!(
                "{} vs {}",
                self.alphabet, other.alphabet
            )));
        }
        let mut out = self.clone();
        out.range = self.range.max(other.range);
        for (offsets, table) in &other.tables {
            let dst = out
                .tables
                .entry(offsets.clone())
                .or_insert_with(|| vec![0.0; table.len()]);
            for (d, s) in dst.iter_mut().zip(table) {
                *d += s;
            }
        }
        out.name = format!("({})+({})", self.name, other.name);
        Ok(out)
    }

    /// Sum of all terms whose translate starts at `anchor` and fits inside `pattern`.
    #[inline]
    fn anchored_energy(&self, pattern: &[Symbol], anchor: usize, mut keep: impl FnMut(&[usize]) -> bool) -> f64 {
        let m = self.alphabet.size();
        let mut e = 0.0;
        for (offsets, table) in &self.tables {
            let last = *offsets.last().unwrap();
            if anchor + last < pattern.len() && keep(offsets) {
                let code = pattern_code(m, offsets.iter().map(|&o| pattern[anchor + o]));
                e += table[code];
            }
        }
        e
    }

    /// Free-boundary Hamiltonian: every translate of every term that lies
    /// entirely inside the window.
    pub fn hamiltonian_free(&self, window: impl AsRef<[Symbol]>) -> Result<f64> {
        let pattern = window.as_ref();
        if pattern.is_empty() {
            return Err(Error::OutOfRange("pattern must have length >= 1".into()));
        }
        self.alphabet.check(pattern)?;
        Ok(self.hamiltonian_unchecked(pattern))
    }

    pub(crate) fn hamiltonian_unchecked(&self, pattern: &[Symbol]) -> f64 {
        (0..pattern.len())
            .map(|t| self.anchored_energy(pattern, t, |_| true))
            .sum()
    }

    /// Energy of the terms whose rightmost site is the last symbol of `pattern`.
    /// Charging each term to its rightmost site counts it exactly once along
    /// a left-to-right concatenation.
    pub(crate) fn appended_site_energy(&self, pattern: &[Symbol]) -> f64 {
        let end = pattern.len() - 1;
        let mut e = 0.0;
        for anchor in end.saturating_sub(self.range)..=end {
            e += self.anchored_energy(pattern, anchor, |offsets| {
                anchor + offsets.last().unwrap() == end
            });
        }
        e
    }

    /// Law of the symbol at a site given its `R` left and `R` right neighbours.
    /// Only terms touching the site contribute, so the result is exact.
    pub fn conditional_site_distribution(&self, left: &[Symbol], right: &[Symbol]) -> Result<Vec<f64>> {
        let r = self.range;
        if left.len() != r || right.len() != r {
            return Err(Error::OutOfRange(format!(
                "contexts must have length {r}, got {} and {}",
                left.len(),
                right.len()
            )));
        }
        self.alphabet.check(left)?;
        self.alphabet.check(right)?;
        let mut window: Vec<Symbol> = left.iter().copied().chain([0]).chain(right.iter().copied()).collect();
        let energies: Vec<f64> = (0..self.alphabet.size())
            .map(|a| {
                window[r] = a as Symbol;
                (0..=r)
                    .map(|anchor| {
                        self.anchored_energy(&window, anchor, |offsets| {
                            offsets.iter().any(|&o| anchor + o == r)
                        })
                    })
                    .sum()
            })
            .collect();
        Ok(boltzmann(&energies))
    }

    /// Canonical text rendering used for digests.
    pub fn canonical_string(&self) -> String {
        let mut s = format!("alphabet={};range={}", self.alphabet.tokens.join(","), self.range);
        for t in self.nonzero_terms() {
            s.push_str(&format!(";{:?}:{:?}={:e}", t.offsets, t.pattern, t.value));
        }
        s
    }
}

fn join_reals(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Normalized `exp(-e)` with the minimum energy shifted out for stability.
pub(crate) fn boltzmann(energies: &[f64]) -> Vec<f64> {
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|e| (-(e - e0)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

/// Calls `f` on every word of length `len` over `m` symbols, in
/// lexicographic order.
pub fn for_each_word(m: usize, len: usize, mut f: impl FnMut(&[Symbol])) {
    let mut word = vec![0 as Symbol; len];
    loop {
        f(&word);
        let mut i = len;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            word[i] += 1;
            if (word[i] as usize) < m {
                break;
            }
            word[i] = 0;
        }
    }
}
