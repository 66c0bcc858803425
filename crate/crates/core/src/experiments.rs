//! Monte Carlo scans of match statistics against transfer-matrix
//! predictions.
//!
//! Every scan is a pure function of its plan: trial `t` of every cell is
//! sampled with seed `plan.seed + t`, trials may run on any number of
//! workers, and per-cell aggregation always runs sequentially in trial
//! order, so output bytes do not depend on the worker count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matcher::{CrossIndex, SuffixIndex};
use crate::potential::{Interaction, Symbol};
use crate::sampler::{build_chain, Sequence, Source};
use crate::thermo::{alpha, alpha_tilde, overlap_sum, TransferSystem};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 1729;

/// Levels `m` for the exceedance fractions `P(N > m)`.
pub const EXCEEDANCE_LEVELS: [u64; 7] = [1, 2, 4, 8, 16, 32, 64];

/// Trials per cell when the plan leaves it open.
pub fn default_trials(n: usize) -> usize {
    if n >= 1 << 16 {
        200
    } else {
        2000
    }
}

/// Fractional parts this close to an integer are treated as integral when
/// flooring `k*` or taking ceilings, so powers of two land where expected.
const INTEGRAL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    SelfMatch,
    PairSame,
    PairDifferent,
    /// Sequence from the first model against the constant sequence of a symbol.
    Dirac(Symbol),
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::SelfMatch => "self",
            Mode::PairSame => "pair-same",
            Mode::PairDifferent => "pair-different",
            Mode::Dirac(_) => "dirac",
        }
    }
}

/// `k = ⌊k*⌋ + whole + halves·⌊k*/2⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Offset {
    pub whole: i64,
    pub halves: i64,
}

impl Offset {
    pub const ZERO: Offset = Offset { whole: 0, halves: 0 };

    pub fn whole(w: i64) -> Self {
        Offset { whole: w, halves: 0 }
    }

    pub fn halves(h: i64) -> Self {
        Offset { whole: 0, halves: h }
    }

    pub fn apply(&self, k_star: f64) -> i64 {
        let base = (k_star + INTEGRAL_SLACK).floor() as i64;
        let half = (k_star / 2.0 + INTEGRAL_SLACK).floor() as i64;
        base + self.whole + self.halves * half
    }
}

impl fmt::Display for Offset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut out = String::from("k*");
        match self.halves {
            0 => {}
            1 => out.push_str("+half"),
            -1 => out.push_str("-half"),
            h => out.push_str(&format!("{h:+}half")),
        }
        if self.whole != 0 || self.halves == 0 {
            out.push_str(&format!("{:+}", self.whole));
        }
        f.write_str(&out)
    }
}

impl FromStr for Offset {
    type Err = Error;

    /// `"0"`, `"+3"`, `"-2"`, `"-half"`, `"+half"`, `"half"`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let (sign, body) = match t.as_bytes().first() {
            Some(b'-') => (-1, &t[1..]),
            Some(b'+') => (1, &t[1..]),
            _ => (1, t),
        };
        if body == "half" {
            return Ok(Offset::halves(sign));
        }
        body.parse::<i64>()
            .map(|w| Offset::whole(sign * w))
            .map_err(|_| Error::Plan(format!("bad k offset {s:?} (expected an integer or ±half)")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum KRule {
    Explicit(Vec<usize>),
    Offsets(Vec<Offset>),
    /// `k_n = ⌈f·ln n / c⌉` with `c` the per-symbol decay rate of
    /// `P([a]_k)` (`c = ln 2` for fair coins, giving `⌈f·log₂ n⌉`).
    Growth(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scan {
    Regime,
    Tightness,
    Slope,
    Counterexample,
}

impl Scan {
    pub fn name(&self) -> &'static str {
        match self {
            Scan::Regime => "regime",
            Scan::Tightness => "tightness",
            Scan::Slope => "slope",
            Scan::Counterexample => "counterexample",
        }
    }
}

impl FromStr for Scan {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regime" => Ok(Scan::Regime),
            "tightness" => Ok(Scan::Tightness),
            "slope" => Ok(Scan::Slope),
            "counterexample" => Ok(Scan::Counterexample),
            _ => Err(Error::Plan(format!(
                "unknown scan {s:?} (expected regime, tightness, slope or counterexample)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub name: String,
    pub mode: Mode,
    pub model: Interaction,
    pub model2: Option<Interaction>,
    pub n_grid: Vec<usize>,
    pub k_rule: KRule,
    /// `None` uses [`default_trials`].
    pub trials: Option<usize>,
    pub seed: u64,
    /// Bound on `n·P([a]_k)` for the counterexample.
    pub delta: f64,
    pub scans: Vec<Scan>,
}

impl ExperimentPlan {
    pub fn new(mode: Mode, model: Interaction, n_grid: Vec<usize>, k_rule: KRule) -> Self {
        ExperimentPlan {
            name: "experiment".into(),
            mode,
            model,
            model2: None,
            n_grid,
            k_rule,
            trials: None,
            seed: DEFAULT_SEED,
            delta: 0.05,
            scans: vec![Scan::Regime],
        }
    }

    pub fn trials_for(&self, n: usize) -> usize {
        self.trials.unwrap_or_else(|| default_trials(n))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_grid.is_empty() {
            return Err(Error::Plan("n grid is empty".into()));
        }
        if self.n_grid[0] < 2 {
            return Err(Error::Plan("every n must be >= 2".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Plan(format!("n grid must be strictly increasing: {:?}", self.n_grid)));
        }
        if self.trials == Some(0) {
            return Err(Error::Plan("trials must be >= 1".into()));
        }
        if self.scans.is_empty() {
            return Err(Error::Plan("no scans requested".into()));
        }
        match (&self.mode, &self.model2) {
            (Mode::PairDifferent, None) => {
                return Err(Error::Plan("pair-different mode needs a second model".into()))
            }
            (Mode::PairDifferent, Some(v)) if v.alphabet() != self.model.alphabet() => {
                return Err(Error::AlphabetMismatch(format!("{} vs {}", self.model.alphabet(), v.alphabet())))
            }
            (Mode::Dirac(a), _) => self.model.alphabet().check(&[*a])?,
            _ => {}
        }
        match &self.k_rule {
            KRule::Explicit(ks) if ks.is_empty() || ks.contains(&0) => {
                return Err(Error::Plan("explicit k values must be >= 1".into()))
            }
            KRule::Offsets(o) if o.is_empty() => return Err(Error::Plan("offset list is empty".into())),
            KRule::Growth(f) if !(*f > 0.0 && f.is_finite()) => {
                return Err(Error::Plan(format!("growth factor must be positive, got {f}")))
            }
            KRule::Growth(_) if !matches!(self.mode, Mode::Dirac(_)) => {
                return Err(Error::Plan("growth k rule applies to dirac mode only".into()))
            }
            _ => {}
        }
        for scan in &self.scans {
            match scan {
                Scan::Slope if self.mode != Mode::SelfMatch => {
                    return Err(Error::Plan("slope scan requires self mode".into()))
                }
                Scan::Counterexample if !matches!(self.mode, Mode::Dirac(_)) => {
                    return Err(Error::Plan("counterexample scan requires dirac mode".into()))
                }
                Scan::Tightness => match &self.k_rule {
                    KRule::Offsets(o) if o.iter().all(|o| o.halves == 0) => {}
                    _ => {
                        return Err(Error::Plan(
                            "tightness scan requires bounded integer offsets around k*".into(),
                        ))
                    }
                },
                _ => {}
            }
        }
        if !(self.delta > 0.0) {
            return Err(Error::Plan("delta must be positive".into()));
        }
        Ok(())
    }
}

/// Parallelism settings. Output never depends on them.
#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub workers: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { workers: 1 }
    }
}

impl RunOptions {
    /// `None` for a single worker: trials then run on the calling thread,
    /// which also works where threads are unavailable.
    fn pool(&self) -> Result<Option<rayon::ThreadPool>> {
        if self.workers <= 1 {
            return Ok(None);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map(Some)
            .map_err(|e| Error::Plan(format!("cannot start worker pool: {e}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PredictionKind {
    /// Exact first moment.
    Exact,
    /// Reference scale with unspecified constants.
    OrderOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prediction {
    pub value: f64,
    pub kind: PredictionKind,
}

fn check_nk(n: usize, k: usize) -> Result<()> {
    if k == 0 || k >= n {
        return Err(Error::OutOfRange(format!("need 1 <= k < n, got n={n}, k={k}")));
    }
    Ok(())
}

/// Predicted `E N(k)` for sequences of length `n`.
///
/// Pair modes: `(n-k+1)(n-k)·Σ_A P(A_k)Q(A_k)`, exact. Self mode:
/// `(n-k)e^{-kα} + (n-2k)₊² e^{-2kα}`, a scale only. Dirac mode:
/// `n(n-k+1)·P([a]_k)`; see [`dirac_prediction`] for the exact value.
pub fn predicted_mean(mode: Mode, u: &Interaction, v: Option<&Interaction>, n: usize, k: usize) -> Result<Prediction> {
    check_nk(n, k)?;
    let (nf, kf) = (n as f64, k as f64);
    let pairs = (nf - kf + 1.0) * (nf - kf);
    match mode {
        Mode::SelfMatch => {
            let a = alpha(u)?;
            let far = (nf - 2.0 * kf).max(0.0);
            Ok(Prediction {
                value: (nf - kf) * (-kf * a).exp() + far * far * (-2.0 * kf * a).exp(),
                kind: PredictionKind::OrderOnly,
            })
        }
        Mode::PairSame => Ok(Prediction {
            value: pairs * overlap_sum(u, u, k)?,
            kind: PredictionKind::Exact,
        }),
        Mode::PairDifferent => {
            let v = v.ok_or_else(|| Error::Plan("pair-different mode needs a second model".into()))?;
            Ok(Prediction {
                value: pairs * overlap_sum(u, v, k)?,
                kind: PredictionKind::Exact,
            })
        }
        Mode::Dirac(a) => Ok(Prediction {
            value: dirac_prediction(u, a, n, k)?.closed_form,
            kind: PredictionKind::Exact,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiracPrediction {
    /// `P([a]_k)`.
    pub prob: f64,
    /// `n(n-k+1)·P([a]_k)`.
    pub closed_form: f64,
    /// `(n-k)(n-k+1)·P([a]_k)`: each of the `n-k+1` windows of the Gibbs
    /// sequence equal to `a^k` pairs with the `n-k` off-diagonal windows of
    /// the constant sequence.
    pub exact: f64,
    /// `n·P([a]_k)`.
    pub n_prob: f64,
    /// `(n-k+1)·P([a]_k) >= P(N > 0)`.
    pub union_bound: f64,
}

pub fn dirac_prediction(u: &Interaction, a: Symbol, n: usize, k: usize) -> Result<DiracPrediction> {
    check_nk(n, k)?;
    u.alphabet().check(&[a])?;
    let prob = TransferSystem::new(u)?.cylinder_prob(&vec![a; k])?;
    let (nf, kf) = (n as f64, k as f64);
    Ok(DiracPrediction {
        prob,
        closed_form: nf * (nf - kf + 1.0) * prob,
        exact: (nf - kf) * (nf - kf + 1.0) * prob,
        n_prob: nf * prob,
        union_bound: (nf - kf + 1.0) * prob,
    })
}

/// Per-symbol decay rate `c` of `P([a]_k) ≈ C e^{-ck}`.
fn dirac_decay_rate(ts: &TransferSystem, a: Symbol) -> Result<f64> {
    let b = ts.block_len();
    let p_b = ts.cylinder_prob(&vec![a; b])?;
    let p_b1 = ts.cylinder_prob(&vec![a; b + 1])?;
    Ok((p_b / p_b1).ln())
}

/// Counterexample window lengths `k_n = ⌈f·ln n / c⌉`, checking that
/// `n·P([a]_{k_n}) <= delta` and that `n²·P([a]_{k_n})` grows along the grid.
pub fn dirac_window_lengths(u: &Interaction, a: Symbol, n_grid: &[usize], factor: f64, delta: f64) -> Result<Vec<usize>> {
    let ts = TransferSystem::new(u)?;
    let c = dirac_decay_rate(&ts, a)?;
    let mut out = Vec::with_capacity(n_grid.len());
    let mut last_growth = 0.0;
    for &n in n_grid {
        let k = ((factor * (n as f64).ln() / c) - INTEGRAL_SLACK).ceil().max(1.0) as usize;
        if k >= n {
            return Err(Error::NoAdmissibleK {
                n,
                reason: format!("k_n = {k} is not below n"),
            });
        }
        let p = ts.cylinder_prob(&vec![a; k])?;
        let nf = n as f64;
        if nf * p > delta {
            return Err(Error::NoAdmissibleK {
                n,
                reason: format!("n·P([a]_k) = {} exceeds delta = {delta} at k = {k}", nf * p),
            });
        }
        let growth = nf * nf * p;
        if growth <= last_growth {
            return Err(Error::NoAdmissibleK {
                n,
                reason: format!("n²·P([a]_k) = {growth} does not grow along the grid at k = {k}"),
            });
        }
        last_growth = growth;
        out.push(k);
    }
    Ok(out)
}

/// Summary of one `(n, k)` cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub label: String,
    pub n: usize,
    pub k: usize,
    /// Threshold the k rule was resolved against (`NaN` for explicit k).
    pub k_star: f64,
    pub trials: usize,
    pub mean: f64,
    pub var: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub zero_frac: f64,
    /// `P̂(N > m)` for each of [`EXCEEDANCE_LEVELS`].
    pub exceed: Vec<f64>,
    pub pred_mean: f64,
    pub pred_kind: PredictionKind,
    pub ratio: f64,
}

impl CellSummary {
    pub fn std_err(&self) -> f64 {
        (self.var / self.trials as f64).sqrt()
    }

    /// `max_m m·P̂(N > m)`.
    pub fn tail_constant(&self) -> f64 {
        EXCEEDANCE_LEVELS
            .iter()
            .zip(&self.exceed)
            .map(|(&m, &p)| m as f64 * p)
            .fold(0.0, f64::max)
    }
}

/// Linear-interpolation quantile of sorted data.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

struct Moments {
    mean: f64,
    var: f64,
    q05: f64,
    q50: f64,
    q95: f64,
    zero_frac: f64,
    exceed: Vec<f64>,
}

/// Sequential, so the result is independent of how the values were produced.
fn moments(values: &[u64]) -> Moments {
    let t = values.len() as f64;
    let mean = values.iter().map(|&v| v as f64).sum::<f64>() / t;
    let var = if values.len() > 1 {
        values.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / (t - 1.0)
    } else {
        0.0
    };
    let mut sorted: Vec<f64> = values.iter().map(|&v| v as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let frac = |pred: &dyn Fn(u64) -> bool| values.iter().filter(|&&v| pred(v)).count() as f64 / t;
    Moments {
        mean,
        var,
        q05: quantile(&sorted, 0.05),
        q50: quantile(&sorted, 0.50),
        q95: quantile(&sorted, 0.95),
        zero_frac: frac(&|v| v == 0),
        exceed: EXCEEDANCE_LEVELS.iter().map(|&m| frac(&|v| v > m)).collect(),
    }
}

/// A plan with its samplers and thresholds resolved.
struct Prepared<'a> {
    plan: &'a ExperimentPlan,
    first: Source,
    second: Option<Source>,
    alpha: f64,
}

impl<'a> Prepared<'a> {
    fn new(plan: &'a ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        let first = Source::Gibbs(build_chain(&TransferSystem::new(&plan.model)?));
        let (second, alpha) = match plan.mode {
            Mode::SelfMatch => (None, alpha(&plan.model)?),
            Mode::PairSame => (Some(first.clone()), alpha(&plan.model)?),
            Mode::PairDifferent => {
                let v = plan.model2.as_ref().expect("validated");
                (
                    Some(Source::Gibbs(build_chain(&TransferSystem::new(v)?))),
                    alpha_tilde(&plan.model, v)?,
                )
            }
            Mode::Dirac(a) => (
                Some(Source::Dirac {
                    alphabet: plan.model.alphabet().clone(),
                    symbol: a,
                }),
                alpha(&plan.model)?,
            ),
        };
        Ok(Prepared {
            plan,
            first,
            second,
            alpha,
        })
    }

    fn k_star(&self, n: usize) -> f64 {
        (n as f64).ln() / self.alpha
    }

    /// `(label, k, k*)` for every cell at length `n`. Offsets are clamped
    /// to `1..n`.
    fn cells(&self, n: usize, growth: &[usize]) -> Vec<(String, usize, f64)> {
        match &self.plan.k_rule {
            KRule::Explicit(ks) => ks.iter().map(|&k| (format!("k={k}"), k, f64::NAN)).collect(),
            KRule::Offsets(offsets) => {
                let ks = self.k_star(n);
                offsets
                    .iter()
                    .map(|o| (o.to_string(), o.apply(ks).clamp(1, n as i64 - 1) as usize, ks))
                    .collect()
            }
            KRule::Growth(f) => {
                let i = self.plan.n_grid.iter().position(|&m| m == n).expect("grid member");
                vec![(format!("growth {f}"), growth[i], f64::NAN)]
            }
        }
    }

    fn growth_lengths(&self) -> Result<Vec<usize>> {
        match (&self.plan.k_rule, self.plan.mode) {
            (KRule::Growth(f), Mode::Dirac(a)) => {
                dirac_window_lengths(&self.plan.model, a, &self.plan.n_grid, *f, self.plan.delta)
            }
            _ => Ok(Vec::new()),
        }
    }

    fn predict(&self, n: usize, k: usize) -> Result<Prediction> {
        predicted_mean(self.plan.mode, &self.plan.model, self.plan.model2.as_ref(), n, k)
    }

    fn sample_one(&self, n: usize, seed: u64) -> Result<Sequence> {
        self.first.sample(n, seed)
    }

    /// Match counts of one trial at every requested `k`.
    fn trial_counts(&self, n: usize, ks: &[usize], seed: u64) -> Result<Vec<u64>> {
        match self.plan.mode {
            Mode::SelfMatch => {
                let s = self.sample_one(n, seed)?;
                let index = SuffixIndex::new(&s);
                ks.iter().map(|&k| Ok(index.count(k)?.count)).collect()
            }
            Mode::PairSame | Mode::PairDifferent => {
                let second = self.second.as_ref().expect("pair mode");
                let (s, t) = crate::sampler::sample_pair(&self.first, second, n, seed)?;
                let index = CrossIndex::new(&s, &t)?;
                ks.iter().map(|&k| Ok(index.count(k)?.count)).collect()
            }
            Mode::Dirac(a) => {
                let second = self.second.as_ref().expect("dirac mode");
                let (s, _) = crate::sampler::sample_pair(&self.first, second, n, seed)?;
                Ok(ks.iter().map(|&k| dirac_cross_count(s.symbols(), a, k)).collect())
            }
        }
    }
}

/// `N(σ, a^n, k)`: every window of `σ` equal to `a^k` matches the `n-k`
/// off-diagonal windows of the constant sequence.
pub fn dirac_cross_count(s: &[Symbol], a: Symbol, k: usize) -> u64 {
    let n = s.len();
    if k == 0 || k > n {
        return 0;
    }
    let mut run = 0usize;
    let mut windows = 0u64;
    for &c in s {
        run = if c == a { run + 1 } else { 0 };
        if run >= k {
            windows += 1;
        }
    }
    windows * (n - k) as u64
}

fn run_trials<T: Send>(
    pool: &Option<rayon::ThreadPool>,
    trials: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    match pool {
        Some(pool) => pool.install(|| (0..trials).into_par_iter().map(&f).collect()),
        None => (0..trials).map(f).collect(),
    }
}

fn trial_seed(base: u64, t: usize) -> u64 {
    base.wrapping_add(t as u64)
}

/// Match-count summaries for every `(n, k)` cell of the plan.
pub fn regime_scan(plan: &ExperimentPlan, opts: RunOptions) -> Result<Vec<CellSummary>> {
    let prep = Prepared::new(plan)?;
    let growth = prep.growth_lengths()?;
    let pool = opts.pool()?;
    let mut out = Vec::new();
    for &n in &plan.n_grid {
        let cells = prep.cells(n, &growth);
        for (_, k, _) in &cells {
            check_nk(n, *k)?;
        }
        let ks: Vec<usize> = cells.iter().map(|c| c.1).collect();
        let trials = plan.trials_for(n);
        let per_trial = run_trials(&pool, trials, |t| prep.trial_counts(n, &ks, trial_seed(plan.seed, t)))?;
        for (c, (label, k, k_star)) in cells.into_iter().enumerate() {
            let values: Vec<u64> = per_trial.iter().map(|row| row[c]).collect();
            let m = moments(&values);
            let pred = prep.predict(n, k)?;
            out.push(CellSummary {
                label,
                n,
                k,
                k_star,
                trials,
                mean: m.mean,
                var: m.var,
                q05: m.q05,
                q50: m.q50,
                q95: m.q95,
                zero_frac: m.zero_frac,
                exceed: m.exceed,
                pred_mean: pred.value,
                pred_kind: pred.kind,
                ratio: m.mean / pred.value,
            });
        }
    }
    Ok(out)
}

/// Cells of one label, in grid order.
pub fn series<'a>(cells: &'a [CellSummary], label: &str) -> Vec<&'a CellSummary> {
    cells.iter().filter(|c| c.label == label).collect()
}

/// Labels in first-appearance order.
pub fn labels(cells: &[CellSummary]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in cells {
        if !out.contains(&c.label) {
            out.push(c.label.clone());
        }
    }
    out
}

/// Trends of one k-rule label along the n grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegimeVerdict {
    pub label: String,
    pub means_increasing: bool,
    pub zero_frac_nondecreasing: bool,
    pub last_zero_frac: f64,
    /// `max ratio / min ratio` along the grid.
    pub ratio_spread: f64,
}

pub fn regime_verdicts(cells: &[CellSummary]) -> Vec<RegimeVerdict> {
    labels(cells)
        .into_iter()
        .map(|label| {
            let s = series(cells, &label);
            let ratios: Vec<f64> = s.iter().map(|c| c.ratio).collect();
            let (lo, hi) = ratios
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), &r| (lo.min(r), hi.max(r)));
            RegimeVerdict {
                means_increasing: s.windows(2).all(|w| w[1].mean > w[0].mean),
                zero_frac_nondecreasing: s.windows(2).all(|w| w[1].zero_frac >= w[0].zero_frac),
                last_zero_frac: s.last().map_or(f64::NAN, |c| c.zero_frac),
                ratio_spread: hi / lo,
                label,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub label: String,
    pub n: usize,
    pub k: usize,
    /// `P̂(N > 0)`.
    pub p_positive: f64,
    /// `m·P̂(N > m)` for each of [`EXCEEDANCE_LEVELS`].
    pub weighted: Vec<f64>,
    /// `max_m m·P̂(N > m)`.
    pub tail_constant: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessSeries {
    pub label: String,
    /// `max_n C(n) / min_n C(n)` with `C(n) = max_m m·P̂(N > m)`.
    pub spread: f64,
    /// `max_n C(n) / median_n C(n)`.
    pub spread_vs_median: f64,
    pub min_p_positive: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessTable {
    pub cells: Vec<CellSummary>,
    pub rows: Vec<TightnessRow>,
    pub series: Vec<TightnessSeries>,
}

pub fn tightness_scan(plan: &ExperimentPlan, opts: RunOptions) -> Result<TightnessTable> {
    let mut checked = plan.clone();
    checked.scans = vec![Scan::Tightness];
    checked.validate()?;
    let cells = regime_scan(plan, opts)?;
    Ok(tightness_from_cells(cells))
}

pub fn tightness_from_cells(cells: Vec<CellSummary>) -> TightnessTable {
    let rows: Vec<TightnessRow> = cells
        .iter()
        .map(|c| TightnessRow {
            label: c.label.clone(),
            n: c.n,
            k: c.k,
            p_positive: 1.0 - c.zero_frac,
            weighted: EXCEEDANCE_LEVELS.iter().zip(&c.exceed).map(|(&m, &p)| m as f64 * p).collect(),
            tail_constant: c.tail_constant(),
        })
        .collect();
    let series = labels(&cells)
        .into_iter()
        .map(|label| {
            let mut cs: Vec<f64> = rows.iter().filter(|r| r.label == label).map(|r| r.tail_constant).collect();
            let min_p = rows
                .iter()
                .filter(|r| r.label == label)
                .map(|r| r.p_positive)
                .fold(f64::INFINITY, f64::min);
            cs.sort_by(f64::total_cmp);
            let (lo, hi) = (cs[0], cs[cs.len() - 1]);
            let median = quantile(&cs, 0.5);
            TightnessSeries {
                label,
                spread: hi / lo,
                spread_vs_median: hi / median,
                min_p_positive: min_p,
            }
        })
        .collect();
    TightnessTable { cells, rows, series }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopePoint {
    pub n: usize,
    pub ln_n: f64,
    pub trials: usize,
    pub mean_m: f64,
    pub var_m: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
    pub zero_frac: f64,
    /// `ln n / α`.
    pub k_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlopeFit {
    pub points: Vec<SlopePoint>,
    pub slope: f64,
    pub intercept: f64,
    pub slope_std_err: f64,
    /// `1/α`.
    pub target: f64,
    pub rel_error: f64,
}

/// Least-squares fit of mean `M` against `ln n`.
pub fn slope_fit(plan: &ExperimentPlan, opts: RunOptions) -> Result<SlopeFit> {
    let mut checked = plan.clone();
    checked.scans = vec![Scan::Slope];
    let prep = Prepared::new(&checked)?;
    let grid = &plan.n_grid;
    if grid.len() < 3 || (grid[grid.len() - 1] as f64) < 1000.0 * grid[0] as f64 {
        return Err(Error::Plan(
            "slope fit needs at least 3 lengths spanning a factor of 1000 or more".into(),
        ));
    }
    let pool = opts.pool()?;
    let mut points = Vec::with_capacity(grid.len());
    for &n in grid {
        let trials = plan.trials_for(n);
        let ms = run_trials(&pool, trials, |t| {
            let s = prep.sample_one(n, trial_seed(plan.seed, t))?;
            Ok(SuffixIndex::new(&s).max_match().length as u64)
        })?;
        let m = moments(&ms);
        points.push(SlopePoint {
            n,
            ln_n: (n as f64).ln(),
            trials,
            mean_m: m.mean,
            var_m: m.var,
            q05: m.q05,
            q50: m.q50,
            q95: m.q95,
            zero_frac: m.zero_frac,
            k_star: prep.k_star(n),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.ln_n).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mean_m).collect();
    let (slope, intercept, slope_std_err) = least_squares(&xs, &ys);
    let target = 1.0 / prep.alpha;
    Ok(SlopeFit {
        points,
        slope,
        intercept,
        slope_std_err,
        target,
        rel_error: (slope - target).abs() / target,
    })
}

/// `(slope, intercept, standard error of the slope)`.
pub fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let p = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / p;
    let my = ys.iter().sum::<f64>() / p;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let se = if xs.len() > 2 {
        (sse / (p - 2.0) / sxx).sqrt()
    } else {
        f64::NAN
    };
    (slope, intercept, se)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiracRow {
    pub cell: CellSummary,
    pub prediction: DiracPrediction,
}

/// Gibbs sequence against a constant sequence: predicted mean diverging,
/// `P̂(N = 0)` reported alongside.
pub fn counterexample_dirac(plan: &ExperimentPlan, opts: RunOptions) -> Result<Vec<DiracRow>> {
    let a = match plan.mode {
        Mode::Dirac(a) => a,
        _ => return Err(Error::Plan("counterexample scan requires dirac mode".into())),
    };
    let cells = regime_scan(plan, opts)?;
    cells
        .into_iter()
        .map(|cell| {
            let prediction = dirac_prediction(&plan.model, a, cell.n, cell.k)?;
            Ok(DiracRow { cell, prediction })
        })
        .collect()
}

/// Formats a real with 17 significant digits, independent of locale.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub const CSV_HEADER: &str = "n,k,trials,mean,var,q05,q50,q95,zero_frac,pred_mean,ratio";

pub fn cells_csv(cells: &[CellSummary]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            c.n,
            c.k,
            c.trials,
            fmt_real(c.mean),
            fmt_real(c.var),
            fmt_real(c.q05),
            fmt_real(c.q50),
            fmt_real(c.q95),
            fmt_real(c.zero_frac),
            fmt_real(c.pred_mean),
            fmt_real(c.ratio)
        ));
    }
    out
}

/// Slope points in the common column layout: `mean` is the mean of `M`,
/// `k` is `⌊k*⌋`, and the prediction is `k* = ln n / α`.
pub fn slope_csv(fit: &SlopeFit) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for p in &fit.points {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            p.n,
            (p.k_star + INTEGRAL_SLACK).floor() as usize,
            p.trials,
            fmt_real(p.mean_m),
            fmt_real(p.var_m),
            fmt_real(p.q05),
            fmt_real(p.q50),
            fmt_real(p.q95),
            fmt_real(p.zero_frac),
            fmt_real(p.k_star),
            fmt_real(p.mean_m / p.k_star)
        ));
    }
    out
}

/// Output of one plan: file name to contents, in a fixed order.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<(String, String)>,
    pub plot_files: Vec<(String, String)>,
    pub summary: serde_json::Map<String, serde_json::Value>,
}

fn series_file(rows: impl IntoIterator<Item = (f64, f64)>) -> String {
    rows.into_iter()
        .map(|(x, y)| format!("{} {}\n", fmt_real(x), fmt_real(y)))
        .collect()
}

fn file_label(label: &str) -> String {
    label
        .chars()
        .map(|c| match c {
            'a'..='z' | 'A'..='Z' | '0'..='9' => c,
            '+' => 'p',
            '-' => 'm',
            _ => '_',
        })
        .collect()
}

/// Runs every scan of the plan.
pub fn run_plan(plan: &ExperimentPlan, opts: RunOptions) -> Result<RunReport> {
    plan.validate()?;
    let mut report = RunReport::default();
    for scan in &plan.scans {
        let name = scan.name();
        match scan {
            Scan::Regime => {
                let cells = regime_scan(plan, opts)?;
                report.files.push((format!("{name}.csv"), cells_csv(&cells)));
                for label in labels(&cells) {
                    let s = series(&cells, &label);
                    report.plot_files.push((
                        format!("{name}_mean_{}.dat", file_label(&label)),
                        series_file(s.iter().map(|c| (c.n as f64, c.mean))),
                    ));
                    report.plot_files.push((
                        format!("{name}_zero_frac_{}.dat", file_label(&label)),
                        series_file(s.iter().map(|c| (c.n as f64, c.zero_frac))),
                    ));
                }
                report.summary.insert(name.into(), serde_json::to_value(regime_verdicts(&cells)).unwrap());
            }
            Scan::Tightness => {
                let table = tightness_scan(plan, opts)?;
                report.files.push((format!("{name}.csv"), cells_csv(&table.cells)));
                let mut ex = String::from("n,k,m,p_exceed,m_p_exceed\n");
                for (c, r) in table.cells.iter().zip(&table.rows) {
                    for ((&m, &p), &w) in EXCEEDANCE_LEVELS.iter().zip(&c.exceed).zip(&r.weighted) {
                        ex.push_str(&format!("{},{},{},{},{}\n", c.n, c.k, m, fmt_real(p), fmt_real(w)));
                    }
                }
                report.files.push((format!("{name}_exceedance.csv"), ex));
                for label in labels(&table.cells) {
                    let rows: Vec<&TightnessRow> = table.rows.iter().filter(|r| r.label == label).collect();
                    report.plot_files.push((
                        format!("{name}_tail_constant_{}.dat", file_label(&label)),
                        series_file(rows.iter().map(|r| (r.n as f64, r.tail_constant))),
                    ));
                    report.plot_files.push((
                        format!("{name}_p_positive_{}.dat", file_label(&label)),
                        series_file(rows.iter().map(|r| (r.n as f64, r.p_positive))),
                    ));
                }
                report.summary.insert(name.into(), serde_json::to_value(&table.series).unwrap());
            }
            Scan::Slope => {
                let fit = slope_fit(plan, opts)?;
                report.files.push((format!("{name}.csv"), slope_csv(&fit)));
                report.files.push((
                    format!("{name}_fit.csv"),
                    format!(
                        "slope,intercept,slope_std_err,target,rel_error\n{},{},{},{},{}\n",
                        fmt_real(fit.slope),
                        fmt_real(fit.intercept),
                        fmt_real(fit.slope_std_err),
                        fmt_real(fit.target),
                        fmt_real(fit.rel_error)
                    ),
                ));
                report.plot_files.push((
                    format!("{name}_mean_m.dat"),
                    series_file(fit.points.iter().map(|p| (p.ln_n, p.mean_m))),
                ));
                report.plot_files.push((
                    format!("{name}_k_star.dat"),
                    series_file(fit.points.iter().map(|p| (p.ln_n, p.k_star))),
                ));
                report.summary.insert(
                    name.into(),
                    serde_json::json!({
                        "slope": fit.slope,
                        "intercept": fit.intercept,
                        "slope_std_err": fit.slope_std_err,
                        "target": fit.target,
                        "rel_error": fit.rel_error,
                    }),
                );
            }
            Scan::Counterexample => {
                let rows = counterexample_dirac(plan, opts)?;
                let cells: Vec<CellSummary> = rows.iter().map(|r| r.cell.clone()).collect();
                report.files.push((format!("{name}.csv"), cells_csv(&cells)));
                let mut cf = String::from("n,k,prob,closed_form,exact,n_prob,union_bound\n");
                for r in &rows {
                    let p = &r.prediction;
                    cf.push_str(&format!(
                        "{},{},{},{},{},{},{}\n",
                        r.cell.n,
                        r.cell.k,
                        fmt_real(p.prob),
                        fmt_real(p.closed_form),
                        fmt_real(p.exact),
                        fmt_real(p.n_prob),
                        fmt_real(p.union_bound)
                    ));
                }
                report.files.push((format!("{name}_closed_form.csv"), cf));
                report.plot_files.push((
                    format!("{name}_pred_mean.dat"),
                    series_file(rows.iter().map(|r| (r.cell.n as f64, r.prediction.closed_form))),
                ));
                report.plot_files.push((
                    format!("{name}_zero_frac.dat"),
                    series_file(rows.iter().map(|r| (r.cell.n as f64, r.cell.zero_frac))),
                ));
                report.summary.insert(name.into(), serde_json::to_value(&rows).unwrap());
            }
        }
    }
    Ok(report)
}
