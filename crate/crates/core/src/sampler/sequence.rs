use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::potential::{Alphabet, Symbol};

/// Provenance of a sequence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SequenceMeta {
    pub model: String,
    pub seed: Option<u64>,
}

/// A finite word over an alphabet. Position `t` holds the `(t+1)`-th site;
/// the window of length `k` at offset `i` is `symbols[i..i+k]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sequence {
    alphabet: Alphabet,
    symbols: Vec<Symbol>,
    meta: SequenceMeta,
}

impl Sequence {
    pub fn new(alphabet: Alphabet, symbols: Vec<Symbol>, meta: SequenceMeta) -> Self {
        debug_assert!(symbols.iter().all(|&s| (s as usize) < alphabet.size()));
        Sequence {
            alphabet,
            symbols,
            meta,
        }
    }

    pub fn from_tokens<S: AsRef<str>>(alphabet: &Alphabet, tokens: &[S]) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::OutOfRange("sequence length must be >= 1".into()));
        }
        Ok(Sequence::new(alphabet.clone(), alphabet.encode(tokens)?, SequenceMeta::default()))
    }

    /// Builds a sequence from a string of single-character tokens, using the
    /// sorted distinct characters as the alphabet.
    pub fn from_chars(s: &str) -> Result<Self> {
        let mut chars: Vec<char> = s.chars().collect();
        chars.sort_unstable();
        chars.dedup();
        let alphabet = Alphabet::new(chars.iter().map(|c| c.to_string()))?;
        Ok(Sequence::new(alphabet.clone(), alphabet.encode_chars(s)?, SequenceMeta::default()))
    }

    pub fn with_meta(mut self, meta: SequenceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.symbols
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn meta(&self) -> &SequenceMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn window(&self, i: usize, k: usize) -> &[Symbol] {
        &self.symbols[i..i + k]
    }

    /// Concatenated tokens for single-character alphabets, otherwise
    /// space-separated.
    pub fn to_tokens(&self) -> String {
        let sep = if self.alphabet.is_single_char() { "" } else { " " };
        self.symbols
            .iter()
            .map(|&s| self.alphabet.token(s))
            .collect::<Vec<_>>()
            .join(sep)
    }
}

fn header_field(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("_")
}

/// Writes the sequence file format: a header line
/// `# model=<id> n=<n> seed=<s>` followed by the body on one line.
pub fn write_sequence<W: Write>(mut w: W, seq: &Sequence) -> std::io::Result<()> {
    let seed = seq.meta.seed.map_or_else(|| "none".to_string(), |s| s.to_string());
    writeln!(
        w,
        "# model={} n={} seed={}",
        header_field(&seq.meta.model),
        seq.len(),
        seed
    )?;
    writeln!(w, "{}", seq.to_tokens())
}

/// Reads a sequence file, returning its tokens and header metadata.
///
/// The body is either one token per character or whitespace-separated
/// tokens; the header's `n` disambiguates when present.
pub fn read_sequence<R: BufRead>(r: R) -> Result<(Vec<String>, SequenceMeta)> {
    let mut meta = SequenceMeta::default();
    let mut declared_n = None;
    let mut body = Vec::new();
    for line in r.lines() {
        let line = line.map_err(|e| Error::SequenceFormat(e.to_string()))?;
        let trimmed = line.trim();
        if let Some(header) = trimmed.strip_prefix('#') {
            for field in header.split_whitespace() {
                match field.split_once('=') {
                    Some(("model", v)) => meta.model = v.to_string(),
                    Some(("n", v)) => {
                        declared_n = Some(v.parse::<usize>().map_err(|_| {
                            Error::SequenceFormat(format!("bad length {v:?} in header"))
                        })?)
                    }
                    Some(("seed", "none")) => meta.seed = None,
                    Some(("seed", v)) => {
                        meta.seed = Some(v.parse().map_err(|_| {
                            Error::SequenceFormat(format!("bad seed {v:?} in header"))
                        })?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !trimmed.is_empty() {
            body.push(line);
        }
    }
    let words: Vec<&str> = body.iter().flat_map(|l| l.split_whitespace()).collect();
    let as_chars = || -> Vec<String> {
        words.iter().flat_map(|w| w.chars()).map(|c| c.to_string()).collect()
    };
    let tokens = match declared_n {
        Some(n) if words.len() == n => words.iter().map(|s| s.to_string()).collect(),
        Some(n) => {
            let chars = as_chars();
            if chars.len() != n {
                return Err(Error::SequenceFormat(format!(
                    "header declares n={n} but the body holds {} tokens / {} characters",
                    words.len(),
                    chars.len()
                )));
            }
            chars
        }
        None if words.len() == body.len() => as_chars(),
        None => words.iter().map(|s| s.to_string()).collect(),
    };
    if tokens.is_empty() {
        return Err(Error::SequenceFormat("empty sequence".into()));
    }
    Ok((tokens, meta))
}
