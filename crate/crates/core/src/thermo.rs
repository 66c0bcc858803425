//! Exact thermodynamics of a finite-range interaction through its block
//! transfer matrix.
//!
//! States are words of length `B = max(R, 1)`. The only nonzero entries are
//! shift-compatible transitions `x -> y` (suffix of `x` equals prefix of `y`),
//! with weight `exp(-E)` where `E` collects every term whose rightmost site is
//! the newly appended symbol. A free-boundary weight of a word of length
//! `k >= B` is then `w(x_1) * prod T(x_t, x_{t+1})`, so
//! `Z_k = w^T T^{k-B} 1` and the pressure is `ln λ` for the Perron root `λ`.
//!
//! The stationary chain `P(x,y) = T(x,y) r(y) / (λ r(x))`, `π = l ∘ r`
//! realizes the unique Gibbs measure and gives exact cylinder probabilities.

use crate::error::{Error, Result};
use crate::potential::{for_each_word, Interaction, Symbol};

/// Largest number of transfer states, `m^B`.
pub const MAX_STATES: usize = 4096;
/// Default bound on the number of patterns enumerated by brute-force routines.
pub const DEFAULT_CAP: u64 = 1 << 24;
/// Relative residual required from the Perron solver.
pub const PERRON_TOL: f64 = 1e-12;
/// Iteration budget of the Perron solver.
pub const PERRON_MAX_ITER: usize = 100_000;
/// Step in `q` for the central difference behind [`entropy`].
pub const ENTROPY_STEP: f64 = 1e-5;

/// Transfer matrix of an interaction together with its Perron data.
#[derive(Debug, Clone)]
pub struct TransferSystem {
    interaction: Interaction,
    m: usize,
    block_len: usize,
    n_states: usize,
    /// `weights[x * m + a]` is `T(x, shift(x, a))` times `exp(-log_scale)`.
    weights: Vec<f64>,
    log_scale: f64,
    /// Scaled Perron root, `λ = lambda_scaled * exp(log_scale)`.
    lambda_scaled: f64,
    right: Vec<f64>,
    left: Vec<f64>,
    residual: f64,
    iterations: usize,
}

impl TransferSystem {
    pub fn new(u: &Interaction) -> Result<Self> {
        TransferSystem::with_block_len(u, u.block_len())
    }

    /// Builds the transfer system on blocks of length `block_len >= max(R, 1)`.
    /// Longer blocks describe the same measure; they are used to put two
    /// interactions on a common state space.
    pub fn with_block_len(u: &Interaction, block_len: usize) -> Result<Self> {
        if block_len < u.block_len() {
            return Err(Error::OutOfRange(format!(
                "block length {block_len} shorter than the interaction range {}",
                u.range()
            )));
        }
        let m = u.alphabet().size();
        let n_states = m
            .checked_pow(block_len as u32)
            .filter(|&n| n <= MAX_STATES)
            .ok_or_else(|| {
                Error::Interaction(format!(
                    "{m}^{block_len} transfer states exceed the limit of {MAX_STATES}"
                ))
            })?;

        let mut energies = Vec::with_capacity(n_states * m);
        let mut word = vec![0 as Symbol; block_len + 1];
        for x in 0..n_states {
            decode(x, m, &mut word[..block_len]);
            for a in 0..m {
                word[block_len] = a as Symbol;
                energies.push(u.appended_site_energy(&word));
            }
        }
        let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let weights: Vec<f64> = energies.iter().map(|e| (-(e - e_min)).exp()).collect();

        let mut ts = TransferSystem {
            interaction: u.clone(),
            m,
            block_len,
            n_states,
            weights,
            log_scale: -e_min,
            lambda_scaled: 0.0,
            right: Vec::new(),
            left: Vec::new(),
            residual: 0.0,
            iterations: 0,
        };
        ts.solve_perron()?;
        Ok(ts)
    }

    #[inline]
    fn succ(&self, x: usize, a: usize) -> usize {
        (x * self.m + a) % self.n_states
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (x, o) in out.iter_mut().enumerate() {
            let row = &self.weights[x * self.m..(x + 1) * self.m];
            *o = row
                .iter()
                .enumerate()
                .map(|(a, w)| w * v[self.succ(x, a)])
                .sum();
        }
    }

    fn apply_transpose(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for x in 0..self.n_states {
            for a in 0..self.m {
                out[self.succ(x, a)] += v[x] * self.weights[x * self.m + a];
            }
        }
    }

    fn power_iterate(&self, transpose: bool) -> Result<(f64, Vec<f64>, f64, usize)> {
        let n = self.n_states;
        let mut v = vec![1.0 / n as f64; n];
        let mut w = vec![0.0; n];
        let mut residual = f64::INFINITY;
        for it in 1..=PERRON_MAX_ITER {
            if transpose {
                self.apply_transpose(&v, &mut w);
            } else {
                self.apply(&v, &mut w);
            }
            let lambda: f64 = w.iter().sum::<f64>() / v.iter().sum::<f64>();
            // componentwise, so every row of the induced chain sums to 1
            // within the same tolerance
            residual = v
                .iter()
                .zip(&w)
                .map(|(a, b)| (b - lambda * a).abs() / (lambda * a))
                .fold(0.0, f64::max);
            let norm: f64 = w.iter().sum();
            v.iter_mut().zip(&w).for_each(|(a, b)| *a = b / norm);
            if residual <= PERRON_TOL {
                return Ok((lambda, v, residual, it));
            }
        }
        Err(Error::NoConvergence {
            iterations: PERRON_MAX_ITER,
            residual,
        })
    }

    fn solve_perron(&mut self) -> Result<()> {
        let (lambda, mut right, res_r, it_r) = self.power_iterate(false)?;
        let (lambda_l, mut left, res_l, it_l) = self.power_iterate(true)?;
        if (lambda - lambda_l).abs() > 1e-9 * lambda {
            return Err(Error::Reducible(format!(
                "left and right Perron roots disagree ({lambda} vs {lambda_l})"
            )));
        }
        if right.iter().chain(&left).any(|&x| !(x > 0.0)) {
            return Err(Error::Reducible(
                "Perron vector is not strictly positive; the Gibbs measure is not unique".into(),
            ));
        }
        let dot: f64 = left.iter().zip(&right).map(|(l, r)| l * r).sum();
        let c = dot.sqrt();
        right.iter_mut().for_each(|x| *x /= c);
        left.iter_mut().for_each(|x| *x /= c);
        self.lambda_scaled = lambda;
        self.right = right;
        self.left = left;
        self.residual = res_r.max(res_l);
        self.iterations = it_r.max(it_l);
        Ok(())
    }

    pub fn interaction(&self) -> &Interaction {
        &self.interaction
    }

    pub fn alphabet_size(&self) -> usize {
        self.m
    }

    pub fn block_len(&self) -> usize {
        self.block_len
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Spectral radius `λ` of the (unscaled) transfer matrix.
    pub fn lambda(&self) -> f64 {
        (self.lambda_scaled.ln() + self.log_scale).exp()
    }

    /// `p(U) = ln λ`.
    pub fn pressure(&self) -> f64 {
        self.lambda_scaled.ln() + self.log_scale
    }

    /// Unscaled matrix entry `T(x, y)`; zero for incompatible blocks.
    pub fn entry(&self, x: usize, y: usize) -> f64 {
        if (x * self.m) % self.n_states != y - y % self.m {
            return 0.0;
        }
        self.weights[x * self.m + y % self.m] * self.log_scale.exp()
    }

    /// Right Perron vector, normalized so that `Σ l(x) r(x) = 1`.
    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    /// Largest relative residual of the two eigenvector solves.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Stationary block law `π(x) = l(x) r(x)`.
    pub fn stationary(&self) -> Vec<f64> {
        self.left.iter().zip(&self.right).map(|(l, r)| l * r).collect()
    }

    /// `P(x, shift(x, a))`, laid out like the weights.
    pub fn transition_rows(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.weights.len());
        for x in 0..self.n_states {
            for a in 0..self.m {
                let y = self.succ(x, a);
                p.push(self.weights[x * self.m + a] * self.right[y] / (self.lambda_scaled * self.right[x]));
            }
        }
        p
    }

    pub fn encode_block(&self, block: &[Symbol]) -> usize {
        block.iter().fold(0, |acc, &s| acc * self.m + s as usize)
    }

    /// Exact stationary probability that a window equals `pattern`.
    pub fn cylinder_prob(&self, pattern: &[Symbol]) -> Result<f64> {
        if pattern.is_empty() {
            return Err(Error::OutOfRange("pattern must have length >= 1".into()));
        }
        self.interaction.alphabet().check(pattern)?;
        let b = self.block_len;
        if pattern.len() < b {
            let k = pattern.len();
            let stride = self.m.pow((b - k) as u32);
            let start = self.encode_block(pattern) * stride;
            return Ok((start..start + stride)
                .map(|x| self.left[x] * self.right[x])
                .sum());
        }
        let mut x = self.encode_block(&pattern[..b]);
        let mut p = self.left[x] * self.right[x];
        for &a in &pattern[b..] {
            let y = self.succ(x, a as usize);
            p *= self.weights[x * self.m + a as usize] * self.right[y] / (self.lambda_scaled * self.right[x]);
            x = y;
        }
        Ok(p)
    }

    /// Visits the probability of every `k`-pattern in lexicographic order.
    pub fn for_each_cylinder(&self, k: usize, cap: u64, mut f: impl FnMut(&[Symbol], f64)) -> Result<()> {
        check_cap(self.m, k, cap)?;
        if k == 0 {
            return Err(Error::OutOfRange("pattern length must be >= 1".into()));
        }
        let b = self.block_len;
        let mut word = vec![0 as Symbol; k];
        if k < b {
            for_each_word(self.m, k, |w| {
                word.copy_from_slice(w);
                let p = self.cylinder_prob(&word).expect("valid word");
                f(&word, p);
            });
            return Ok(());
        }
        let rows = self.transition_rows();
        for x in 0..self.n_states {
            decode(x, self.m, &mut word[..b]);
            let p0 = self.left[x] * self.right[x];
            self.descend(&rows, &mut word, b, x, p0, &mut f);
        }
        Ok(())
    }

    fn descend(&self, rows: &[f64], word: &mut [Symbol], depth: usize, x: usize, p: f64, f: &mut impl FnMut(&[Symbol], f64)) {
        if depth == word.len() {
            f(word, p);
            return;
        }
        for a in 0..self.m {
            word[depth] = a as Symbol;
            self.descend(rows, word, depth + 1, self.succ(x, a), p * rows[x * self.m + a], f);
        }
    }

    /// `Σ_A P(A)^s` over all `k`-patterns, by enumeration.
    pub fn pattern_power_sum(&self, k: usize, s: f64, cap: u64) -> Result<f64> {
        let mut total = 0.0;
        self.for_each_cylinder(k, cap, |_, p| total += p.powf(s))?;
        Ok(total)
    }

    /// `E[energy per site]` under the stationary measure, computed exactly
    /// from the chain. Used by the energy route to the entropy.
    pub fn mean_energy(&self) -> f64 {
        let pi = self.stationary();
        let rows = self.transition_rows();
        let mut word = vec![0 as Symbol; self.block_len + 1];
        let mut e = 0.0;
        for x in 0..self.n_states {
            decode(x, self.m, &mut word[..self.block_len]);
            for a in 0..self.m {
                word[self.block_len] = a as Symbol;
                e += pi[x] * rows[x * self.m + a] * self.interaction.appended_site_energy(&word);
            }
        }
        e
    }
}

fn decode(mut x: usize, m: usize, out: &mut [Symbol]) {
    for slot in out.iter_mut().rev() {
        *slot = (x % m) as Symbol;
        x /= m;
    }
}

pub(crate) fn check_cap(m: usize, k: usize, cap: u64) -> Result<()> {
    let needed = (m as u128).checked_pow(k as u32).unwrap_or(u128::MAX);
    if needed > cap as u128 {
        return Err(Error::CapExceeded { needed, cap });
    }
    Ok(())
}

/// Empirical constants of the Gibbs bounds on cylinder probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoDiagnostics {
    /// `max(ratio, 1/ratio)` with `ratio = P(A_k) / (e^{-kp} e^{-H(A_k)})`, over `k <= k_max`.
    pub gamma_hat: f64,
    /// Running value of `gamma_hat` at each `k = 1..=k_max`.
    pub gamma_by_k: Vec<f64>,
    /// Largest conditional probability of a single symbol over all contexts.
    pub rho_hat: f64,
    /// `1 - rho_hat`.
    pub delta_hat: f64,
}

pub fn build_transfer(u: &Interaction) -> Result<TransferSystem> {
    TransferSystem::new(u)
}

pub fn pressure(u: &Interaction) -> Result<f64> {
    Ok(TransferSystem::new(u)?.pressure())
}

/// `α = p(U) - p(2U)/2`, the decay rate of `Σ P(A_k)^2`.
pub fn alpha(u: &Interaction) -> Result<f64> {
    Ok(pressure(u)? - pressure(&u.scale(2.0))? / 2.0)
}

/// `α̃ = (p(U) + p(V) - p(U+V)) / 2`, the cross-measure analogue of [`alpha`].
pub fn alpha_tilde(u: &Interaction, v: &Interaction) -> Result<f64> {
    let uv = u.add(v)?;
    Ok(0.5 * pressure(u)? + 0.5 * pressure(v)? - 0.5 * pressure(&uv)?)
}

/// Entropy `s = p(q) - q p'(q)` at `q = 1`, with `p'` from a central difference.
pub fn entropy(u: &Interaction) -> Result<f64> {
    let h = ENTROPY_STEP;
    let p = pressure(u)?;
    let dp = (pressure(&u.scale(1.0 + h))? - pressure(&u.scale(1.0 - h))?) / (2.0 * h);
    Ok(p - dp)
}

pub fn cylinder_prob(u: &Interaction, pattern: &[Symbol]) -> Result<f64> {
    TransferSystem::new(u)?.cylinder_prob(pattern)
}

pub fn pattern_power_sum(u: &Interaction, k: usize, s: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    check_cap(u.alphabet().size(), k, DEFAULT_CAP)?;
    TransferSystem::new(u)?.pattern_power_sum(k, s, DEFAULT_CAP)
}

/// `k*(n) = ln n / α`.
pub fn k_star(u: &Interaction, n: usize) -> Result<f64> {
    k_star_from_alpha(alpha(u)?, n)
}

pub fn k_star_from_alpha(alpha: f64, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::OutOfRange(format!("k* needs n >= 2, got {n}")));
    }
    Ok((n as f64).ln() / alpha)
}

/// Exact `Σ_A P(A_k) Q(A_k)` for two interactions on one alphabet, via the
/// product of their stationary chains on a common block length. No
/// enumeration is involved, so any `k` is allowed.
pub fn overlap_sum(u: &Interaction, v: &Interaction, k: usize) -> Result<f64> {
    if u.alphabet() != v.alphabet() {
        return Err(Error::AlphabetMismatch(format!("{} vs {}", u.alphabet(), v.alphabet())));
    }
    if k == 0 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    let b = u.block_len().max(v.block_len());
    let tu = TransferSystem::with_block_len(u, b)?;
    let tv = TransferSystem::with_block_len(v, b)?;
    overlap_sum_systems(&tu, &tv, k)
}

pub(crate) fn overlap_sum_systems(tu: &TransferSystem, tv: &TransferSystem, k: usize) -> Result<f64> {
    debug_assert_eq!(tu.block_len, tv.block_len);
    let (m, b, n) = (tu.m, tu.block_len, tu.n_states);
    let (pu, pv) = (tu.stationary(), tv.stationary());
    if k < b {
        let stride = m.pow((b - k) as u32);
        return Ok((0..n / stride)
            .map(|c| {
                let r = c * stride..(c + 1) * stride;
                pu[r.clone()].iter().sum::<f64>() * pv[r].iter().sum::<f64>()
            })
            .sum());
    }
    let (ru, rv) = (tu.transition_rows(), tv.transition_rows());
    let mut vec: Vec<f64> = pu.iter().zip(&pv).map(|(a, b)| a * b).collect();
    let mut next = vec![0.0; n];
    for _ in b..k {
        next.iter_mut().for_each(|x| *x = 0.0);
        for x in 0..n {
            for a in 0..m {
                next[tu.succ(x, a)] += vec[x] * ru[x * m + a] * rv[x * m + a];
            }
        }
        std::mem::swap(&mut vec, &mut next);
    }
    Ok(vec.iter().sum())
}

pub fn diagnostics(u: &Interaction, k_max: usize) -> Result<ThermoDiagnostics> {
    diagnostics_capped(u, k_max, DEFAULT_CAP)
}

pub fn diagnostics_capped(u: &Interaction, k_max: usize, cap: u64) -> Result<ThermoDiagnostics> {
    if k_max == 0 {
        return Err(Error::OutOfRange("k_max must be >= 1".into()));
    }
    let m = u.alphabet().size();
    check_cap(m, k_max, cap)?;
    check_cap(m, 2 * u.range(), cap)?;
    let ts = TransferSystem::new(u)?;
    let p = ts.pressure();
    let mut gamma = 1.0f64;
    let mut gamma_by_k = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        ts.for_each_cylinder(k, cap, |w, prob| {
            let log_ratio = prob.ln() + k as f64 * p + u.hamiltonian_unchecked(w);
            gamma = gamma.max(log_ratio.abs().exp());
        })?;
        gamma_by_k.push(gamma);
    }
    let r = u.range();
    let mut rho = 0.0f64;
    let mut err = None;
    for_each_word(m, 2 * r, |ctx| match u.conditional_site_distribution(&ctx[..r], &ctx[r..]) {
        Ok(dist) => rho = dist.into_iter().fold(rho, f64::max),
        Err(e) => err = Some(e),
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(ThermoDiagnostics {
        gamma_hat: gamma,
        gamma_by_k,
        rho_hat: rho,
        delta_hat: 1.0 - rho,
    })
}

/// Exhaustive references that never touch the transfer matrix.
pub mod oracle {
    use super::*;

    /// `ln Z_n` with free boundary conditions, summing `exp(-H)` over all
    /// `m^n` words.
    pub fn log_partition_free(u: &Interaction, n: usize, cap: u64) -> Result<f64> {
        check_cap(u.alphabet().size(), n, cap)?;
        let mut energies = Vec::new();
        for_each_word(u.alphabet().size(), n, |w| energies.push(u.hamiltonian_unchecked(w)));
        let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
        let z: f64 = energies.iter().map(|e| (-(e - e0)).exp()).sum();
        Ok(z.ln() - e0)
    }

    /// Probability of `pattern` in the middle of a free-boundary box that
    /// pads it with `pad` summed-out sites on each side.
    pub fn finite_volume_cylinder(u: &Interaction, pattern: &[Symbol], pad: usize, cap: u64) -> Result<f64> {
        let m = u.alphabet().size();
        let n = pattern.len() + 2 * pad;
        check_cap(m, n, cap)?;
        let mut z = 0.0;
        let mut hit = 0.0;
        for_each_word(m, n, |w| {
            let weight = (-u.hamiltonian_unchecked(w)).exp();
            z += weight;
            if &w[pad..pad + pattern.len()] == pattern {
                hit += weight;
            }
        });
        Ok(hit / z)
    }

    /// Block entropy `-(1/n) Σ P ln P` over all `n`-patterns.
    pub fn block_entropy(ts: &TransferSystem, n: usize, cap: u64) -> Result<f64> {
        let mut h = 0.0;
        ts.for_each_cylinder(n, cap, |_, p| h -= p * p.ln())?;
        Ok(h / n as f64)
    }

    /// `Σ_A P(A) Q(A)` by enumerating every `k`-pattern.
    pub fn overlap_sum_brute(tu: &TransferSystem, tv: &TransferSystem, k: usize, cap: u64) -> Result<f64> {
        let mut total = 0.0;
        let mut err = None;
        tu.for_each_cylinder(k, cap, |w, p| match tv.cylinder_prob(w) {
            Ok(q) => total += p * q,
            Err(e) => err = Some(e),
        })?;
        match err {
            Some(e) => Err(e),
            None => Ok(total),
        }
    }
}
