//! Stationary Gibbs sequences drawn from the block Markov chain of a
//! [`TransferSystem`], plus the constant (Dirac) sequence.

mod sequence;

pub use sequence::{read_sequence, write_sequence, Sequence, SequenceMeta};

use crate::error::{Error, Result};
use crate::potential::{Alphabet, Symbol};
use crate::rng::{CounterRng, STREAM_PRIMARY, STREAM_SECONDARY};
use crate::thermo::TransferSystem;

/// The block chain `P(x,y) = T(x,y) r(y) / (λ r(x))` with stationary law
/// `π = l ∘ r`.
#[derive(Debug, Clone)]
pub struct StationaryChain {
    transfer: TransferSystem,
    m: usize,
    block_len: usize,
    /// `rows[x * m + a]`: probability of appending `a` to block `x`.
    rows: Vec<f64>,
    pi: Vec<f64>,
    row_cdf: Vec<f64>,
    pi_cdf: Vec<f64>,
}

pub fn build_chain(ts: &TransferSystem) -> StationaryChain {
    StationaryChain::new(ts.clone())
}

fn cumulative(p: &[f64]) -> Vec<f64> {
    p.iter()
        .scan(0.0, |acc, &x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

/// First index whose cumulative mass exceeds `u`; the last index absorbs
/// rounding in the final partial sum.
#[inline]
fn invert(cdf: &[f64], u: f64) -> usize {
    cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1)
}

impl StationaryChain {
    pub fn new(transfer: TransferSystem) -> Self {
        let m = transfer.alphabet_size();
        let rows = transfer.transition_rows();
        let pi = transfer.stationary();
        let row_cdf = rows.chunks(m).flat_map(cumulative).collect();
        let pi_cdf = cumulative(&pi);
        StationaryChain {
            m,
            block_len: transfer.block_len(),
            rows,
            pi,
            row_cdf,
            pi_cdf,
            transfer,
        }
    }

    pub fn transfer(&self) -> &TransferSystem {
        &self.transfer
    }

    pub fn alphabet(&self) -> &Alphabet {
        self.transfer.interaction().alphabet()
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    /// `P(x, y)` for blocks `x, y`; zero unless `y` extends `x` by one symbol.
    pub fn transition(&self, x: usize, y: usize) -> f64 {
        let n = self.pi.len();
        if (x * self.m) % n != y - y % self.m {
            return 0.0;
        }
        self.rows[x * self.m + y % self.m]
    }

    pub fn stationary(&self) -> &[f64] {
        &self.pi
    }

    /// A stationary sequence of length `n` from the primary stream of `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<Sequence> {
        self.sample_stream(n, seed, STREAM_PRIMARY)
    }

    fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<Sequence> {
        let b = self.block_len;
        if n < b {
            return Err(Error::OutOfRange(format!("sample length {n} is shorter than the block length {b}")));
        }
        let mut rng = CounterRng::new(seed, stream);
        let mut symbols = Vec::with_capacity(n);
        let n_states = self.pi.len();
        let mut x = invert(&self.pi_cdf, rng.next_f64());
        let mut c = x;
        for _ in 0..b {
            symbols.push(0);
        }
        for slot in symbols.iter_mut().rev() {
            *slot = (c % self.m) as Symbol;
            c /= self.m;
        }
        for _ in b..n {
            let cdf = &self.row_cdf[x * self.m..(x + 1) * self.m];
            let a = invert(cdf, rng.next_f64());
            symbols.push(a as Symbol);
            x = (x * self.m + a) % n_states;
        }
        Ok(Sequence::new(
            self.alphabet().clone(),
            symbols,
            SequenceMeta {
                model: self.transfer.interaction().name().to_string(),
                seed: Some(seed),
            },
        ))
    }
}

/// Anything that can produce a sequence from a seed: a Gibbs chain or the
/// degenerate constant source.
#[derive(Debug, Clone)]
pub enum Source {
    Gibbs(StationaryChain),
    Dirac { alphabet: Alphabet, symbol: Symbol },
}

impl Source {
    fn sample_stream(&self, n: usize, seed: u64, stream: u64) -> Result<Sequence> {
        match self {
            Source::Gibbs(chain) => chain.sample_stream(n, seed, stream),
            Source::Dirac { alphabet, symbol } => dirac_sequence(alphabet, *symbol, n),
        }
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Sequence> {
        self.sample_stream(n, seed, STREAM_PRIMARY)
    }

    pub fn alphabet(&self) -> &Alphabet {
        match self {
            Source::Gibbs(chain) => chain.alphabet(),
            Source::Dirac { alphabet, .. } => alphabet,
        }
    }
}

impl From<StationaryChain> for Source {
    fn from(c: StationaryChain) -> Self {
        Source::Gibbs(c)
    }
}

pub fn sample(chain: &StationaryChain, n: usize, seed: u64) -> Result<Sequence> {
    chain.sample(n, seed)
}

/// Two independent sequences: the first from the primary stream of `seed`,
/// the second from the secondary stream, so neither depends on how many
/// draws the other consumed.
pub fn sample_pair(first: &Source, second: &Source, n: usize, seed: u64) -> Result<(Sequence, Sequence)> {
    if first.alphabet() != second.alphabet() {
        return Err(Error::AlphabetMismatch(format!(
            "{} vs {}",
            first.alphabet(),
            second.alphabet()
        )));
    }
    Ok((
        first.sample_stream(n, seed, STREAM_PRIMARY)?,
        second.sample_stream(n, seed, STREAM_SECONDARY)?,
    ))
}

/// The constant sequence `a a ... a` of length `n`.
pub fn dirac_sequence(alphabet: &Alphabet, symbol: Symbol, n: usize) -> Result<Sequence> {
    if n == 0 {
        return Err(Error::OutOfRange("sequence length must be >= 1".into()));
    }
    alphabet.check(&[symbol])?;
    Ok(Sequence::new(
        alphabet.clone(),
        vec![symbol; n],
        SequenceMeta {
            model: format!("dirac({})", alphabet.token(symbol)),
            seed: None,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Interaction;
    use crate::thermo::{build_transfer, TransferSystem};

    fn chain(u: &Interaction) -> StationaryChain {
        build_chain(&build_transfer(u).unwrap())
    }

    #[test]
    fn chain_examples() {
        let c = chain(&Interaction::zero(Alphabet::binary()).unwrap());
        for x in 0..2 {
            assert!((c.stationary()[x] - 0.5).abs() < 1e-12);
            for y in 0..2 {
                assert!((c.transition(x, y) - 0.5).abs() < 1e-12);
            }
        }
        let c = chain(&Interaction::ising(0.5, 0.0));
        let same = (-0.5f64).exp() / (2.0 * 0.5f64.cosh());
        assert!((c.transition(0, 0) - same).abs() < 1e-12);
        assert!((c.transition(0, 0) - 0.268941).abs() < 1e-6);
        assert!((c.transition(1, 0) - 0.731059).abs() < 1e-6);
        assert!((c.stationary()[1] - 0.5).abs() < 1e-12);

        let p = [0.6, 0.3, 0.1];
        let c = chain(&Interaction::iid_weights(&p).unwrap());
        for x in 0..3 {
            assert!((c.stationary()[x] - p[x]).abs() < 1e-12);
            for y in 0..3 {
                assert!((c.transition(x, y) - p[y]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn chain_invariants() {
        let u = Interaction::long_range_ising(&[0.4, -0.8], 0.3);
        let c = chain(&u);
        let n = c.stationary().len();
        for x in 0..n {
            let row: f64 = (0..n).map(|y| c.transition(x, y)).sum();
            assert!((row - 1.0).abs() < 1e-12);
            let pi_p: f64 = (0..n).map(|y| c.stationary()[y] * c.transition(y, x)).sum();
            assert!((pi_p - c.stationary()[x]).abs() < 1e-10);
            assert!(c.stationary()[x] > 0.0);
            for y in 0..n {
                assert_eq!(c.transition(x, y) > 0.0, c.transfer().entry(x, y) > 0.0);
            }
        }
    }

    #[test]
    fn zero_interaction_frequencies() {
        let c = chain(&Interaction::zero(Alphabet::binary()).unwrap());
        let n = 10_000;
        let s = c.sample(n, 3).unwrap();
        let freq = s.symbols().iter().filter(|&&x| x == 0).count() as f64 / n as f64;
        assert!((freq - 0.5).abs() < 4.0 * (0.25 / n as f64).sqrt());
    }

    #[test]
    fn ising_flip_rate() {
        let c = chain(&Interaction::ising(0.5, 0.0));
        let n = 100_000;
        let s = c.sample(n, 11).unwrap();
        let flips = s.symbols().windows(2).filter(|w| w[0] != w[1]).count() as f64 / (n - 1) as f64;
        let p = 0.731059;
        assert!((flips - p).abs() < 4.0 * (p * (1.0 - p) / (n - 1) as f64).sqrt(), "{flips}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let c = chain(&Interaction::long_range_ising(&[0.4, -0.8], 0.3));
        assert_eq!(c.sample(500, 9).unwrap(), c.sample(500, 9).unwrap());
        assert_ne!(c.sample(500, 9).unwrap(), c.sample(500, 10).unwrap());
        assert!(c.sample(1, 9).is_err());
        // prefix property of a single stream
        let long = c.sample(800, 9).unwrap();
        assert_eq!(&long.symbols()[..500], c.sample(500, 9).unwrap().symbols());
    }

    /// Frozen output, guards cross-platform reproducibility.
    #[test]
    fn golden_sample() {
        let c = chain(&Interaction::zero(Alphabet::binary()).unwrap());
        let s = c.sample(32, 2024).unwrap();
        let text: String = s.symbols().iter().map(|&x| (b'0' + x) as char).collect();
        assert_eq!(text, GOLDEN_32);
    }

    const GOLDEN_32: &str = "11100001100000010000010100100100";

    #[test]
    fn pair_streams_are_independent() {
        let z = Source::from(chain(&Interaction::zero(Alphabet::binary()).unwrap()));
        let (a, b) = sample_pair(&z, &z, 200, 5).unwrap();
        assert_ne!(a, b);
        assert_eq!(a, z.sample(200, 5).unwrap());

        let n = 100_000;
        let (a, b) = sample_pair(&z, &z, n, 6).unwrap();
        let both = a.symbols().iter().zip(b.symbols()).filter(|(x, y)| **x == 0 && **y == 0).count() as f64 / n as f64;
        let pa = a.symbols().iter().filter(|&&x| x == 0).count() as f64 / n as f64;
        let pb = b.symbols().iter().filter(|&&x| x == 0).count() as f64 / n as f64;
        let se = (pa * pb * (1.0 - pa * pb) / n as f64).sqrt();
        assert!((both - pa * pb).abs() < 4.0 * se);

        let d = Source::Dirac { alphabet: Alphabet::binary(), symbol: 1 };
        let (_, b) = sample_pair(&z, &d, 50, 1).unwrap();
        assert!(b.symbols().iter().all(|&x| x == 1));
    }

    #[test]
    fn dirac_examples() {
        let ab = Alphabet::new(["x"]).unwrap();
        let s = dirac_sequence(&ab, 0, 3).unwrap();
        assert_eq!(s.to_tokens(), "xxx");
        assert!(dirac_sequence(&ab, 0, 0).is_err());
        assert!(dirac_sequence(&ab, 1, 3).is_err());
    }

    #[test]
    fn pattern_frequencies_match_cylinders() {
        let u = Interaction::long_range_ising(&[0.5, -0.3], 0.2);
        let ts = TransferSystem::new(&u).unwrap();
        let c = build_chain(&ts);
        let n = 1_000_000;
        let s = c.sample(n, 77).unwrap();
        let sym = s.symbols();
        for k in 1..=4usize {
            let mut counts = vec![0usize; 1 << k];
            for w in sym.windows(k) {
                counts[w.iter().fold(0, |a, &x| a * 2 + x as usize)] += 1;
            }
            let total = (n - k + 1) as f64;
            for (code, &cnt) in counts.iter().enumerate() {
                let pattern: Vec<u8> = (0..k).rev().map(|i| ((code >> i) & 1) as u8).collect();
                let p = ts.cylinder_prob(&pattern).unwrap();
                let se = (p * (1.0 - p) / total).sqrt();
                assert!((cnt as f64 / total - p).abs() < 5.0 * se, "k={k} {pattern:?}");
            }
        }
    }
}
