//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.
//!
//! `cargo test --release --test acceptance` runs everything;
//! `-- 4 7` runs selected criteria; `-- --pilot` reruns the calibration
//! pilot for the tightness floor.

use std::time::{Duration, Instant};

use serde::Deserialize;

use shiftmatch::experiments::{
    cells_csv, counterexample_dirac, dirac_prediction, dirac_window_lengths, regime_scan, regime_verdicts,
    slope_csv, slope_fit, tightness_scan, ExperimentPlan, KRule, Mode, Offset, RunOptions, Scan,
};
use shiftmatch::matcher::{
    count_matches_naive, duality_check, first_occurrence, match_profile_naive, max_match, SuffixIndex,
};
use shiftmatch::rng::{CounterRng, STREAM_PRIMARY};
use shiftmatch::sampler::build_chain;
use shiftmatch::thermo::{self, oracle, TransferSystem, DEFAULT_CAP};
use shiftmatch::{Alphabet, Interaction, Sequence};

const GOLDEN: &str = include_str!("../golden/acceptance.toml");

#[derive(Deserialize)]
struct Golden {
    pilot_seed: u64,
    first_moment: FirstMoment,
    duality: Duality,
    oracle: OracleCfg,
    slope: SlopeCfg,
    regime: RegimeCfg,
    tightness: TightnessCfg,
    counterexample: CounterCfg,
}

#[derive(Deserialize)]
struct FirstMoment {
    seed: u64,
    n: usize,
    k: usize,
    trials: usize,
}

#[derive(Deserialize)]
struct Duality {
    seed: u64,
    instances: usize,
}

#[derive(Deserialize)]
struct OracleCfg {
    seed: u64,
    cases: usize,
    max_n: usize,
    witness_max_n: usize,
}

#[derive(Deserialize)]
struct SlopeCfg {
    seed: u64,
    n: Vec<usize>,
    trials: usize,
    tolerance: f64,
    max_seconds_per_sequence: f64,
    timing_sequences: usize,
}

#[derive(Deserialize)]
struct RegimeCfg {
    seed: u64,
    n: Vec<usize>,
    min_zero_frac: f64,
}

#[derive(Deserialize)]
struct TightnessCfg {
    seed: u64,
    n: Vec<usize>,
    max_spread: f64,
    floor: f64,
}

#[derive(Deserialize)]
struct CounterCfg {
    seed: u64,
    n: usize,
    k: usize,
    trials: usize,
    min_zero_frac: f64,
    growth_n: Vec<usize>,
    growth_factor: f64,
    delta: f64,
}

type Outcome = std::result::Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn zero2() -> Interaction {
    Interaction::zero(Alphabet::binary()).unwrap()
}

fn iid82() -> Interaction {
    Interaction::iid_weights_on(Alphabet::binary(), &[0.8, 0.2]).unwrap()
}

fn workers() -> RunOptions {
    RunOptions {
        workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
    }
}

/// Shared by criterion 11: every CSV produced, keyed by criterion.
#[derive(Default)]
struct Csvs(Vec<(u32, String)>);

fn analytic_alpha(_: &Golden, _: &mut Csvs) -> Outcome {
    let a0 = thermo::alpha(&zero2()).map_err(err)?;
    let want0 = std::f64::consts::LN_2 / 2.0;
    ensure((a0 - want0).abs() < 1e-9, || format!("alpha(zero) = {a0}, want {want0}"))?;
    let u = iid82();
    let a = thermo::alpha(&u).map_err(err)?;
    let want = -0.5 * 0.68f64.ln();
    ensure((a - want).abs() < 1e-9, || format!("alpha(iid) = {a}, want {want}"))?;
    let mut worst = 0.0f64;
    let mut prev = 0.0;
    for k in 1..=12 {
        let s = thermo::pattern_power_sum(&u, k, 2.0).map_err(err)?.ln();
        let slope = -0.5 * (s - prev);
        prev = s;
        worst = worst.max((slope - a).abs());
    }
    ensure(worst < 1e-9, || format!("k-slope deviates from alpha by {worst:e}"))?;
    Ok(format!("alpha(zero) = {a0:.12}, alpha(iid) = {a:.12}, max k-slope gap {worst:.1e}"))
}

fn pressure_oracle(_: &Golden, _: &mut Csvs) -> Outcome {
    let u = Interaction::ising(0.5, 0.0);
    let reference = (2.0 * 0.5f64.cosh()).ln();
    let p1 = TransferSystem::with_block_len(&u, 1).map_err(err)?.pressure();
    let p2 = TransferSystem::with_block_len(&u, 2).map_err(err)?.pressure();
    let p3 = TransferSystem::with_block_len(&u, 3).map_err(err)?.pressure();
    let spread = (p1 - p2).abs().max((p1 - p3).abs());
    ensure(spread < 1e-12, || format!("transfer pressure unstable across block lengths: {spread:e}"))?;
    ensure((p1 - reference).abs() < 1e-12, || format!("pressure {p1} vs ln(2 cosh 0.5) = {reference}"))?;
    let mut gaps = Vec::new();
    for n in [14usize, 16] {
        let z = oracle::log_partition_free(&u, n, DEFAULT_CAP).map_err(err)?;
        gaps.push(((z / n as f64 - p1).abs(), n));
    }
    let (g14, g16) = (gaps[0].0, gaps[1].0);
    ensure(g16 < g14, || format!("exhaustive gap does not shrink: {g14:e} -> {g16:e}"))?;
    ensure(g14 * 14.0 < 1.0 && g16 * 16.0 < 1.0, || format!("gap not O(1/n): {g14:e}, {g16:e}"))?;
    Ok(format!("p = {p1:.15}, |(1/n)ln Z_n - p| = {g14:.3e} (n=14), {g16:.3e} (n=16)"))
}

fn ratio_range(u: &Interaction) -> std::result::Result<(f64, f64), String> {
    let a = thermo::alpha(u).map_err(err)?;
    let scaled = |k: usize| -> std::result::Result<f64, String> {
        Ok(thermo::pattern_power_sum(u, k, 2.0).map_err(err)? * (2.0 * k as f64 * a).exp())
    };
    let base = scaled(8)?;
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for k in 4..=14 {
        let r = scaled(k)? / base;
        lo = lo.min(r);
        hi = hi.max(r);
    }
    Ok((lo, hi))
}

fn ratio_bound(_: &Golden, _: &mut Csvs) -> Outcome {
    let mut lines = Vec::new();
    // the zero-field chain is symmetric, so the ratio is exactly 1; the
    // field-biased and longer-range models exercise the bound for real
    for u in [
        Interaction::ising(0.5, 0.0),
        Interaction::ising(0.5, 0.3),
        Interaction::long_range_ising(&[0.5, -0.4], 0.2),
    ] {
        let (lo, hi) = ratio_range(&u)?;
        ensure(hi < 3.0 && lo > 1.0 / 3.0, || format!("{}: ratio to k=8 ranges over [{lo}, {hi}]", u.name()))?;
        lines.push(format!("{}: [{lo:.6}, {hi:.6}]", u.name()));
    }
    Ok(format!("S_k e^(2k alpha) / (k=8 value) for k = 4..14: {}", lines.join("; ")))
}

fn first_moment_plan(g: &Golden) -> ExperimentPlan {
    let c = &g.first_moment;
    let mut plan = ExperimentPlan::new(Mode::PairSame, zero2(), vec![c.n], KRule::Explicit(vec![c.k]));
    plan.trials = Some(c.trials);
    plan.seed = c.seed;
    plan
}

fn first_moment(g: &Golden, csvs: &mut Csvs) -> Outcome {
    let cells = regime_scan(&first_moment_plan(g), workers()).map_err(err)?;
    let c = &cells[0];
    ensure((c.pred_mean - 285.0).abs() < 1e-9, || format!("predicted {} != 285", c.pred_mean))?;
    let z = (c.mean - 285.0) / c.std_err();
    ensure(z.abs() <= 4.0, || format!("mean {} is {z:.2} standard errors from 285", c.mean))?;
    csvs.0.push((4, cells_csv(&cells)));
    Ok(format!("mean N = {:.3} (SE {:.3}, z = {z:+.2}) vs exact 285", c.mean, c.std_err()))
}

/// Random sequence: uniform over `m` symbols, a sticky two-state chain, or
/// an Ising sample, so that long repeats are common.
fn random_sequence(rng: &mut CounterRng, n: usize, chains: &[shiftmatch::StationaryChain]) -> Sequence {
    match rng.below(4) {
        0 | 1 => {
            let m = 2 + rng.below(3) as usize;
            let ab = Alphabet::letters(m).unwrap();
            let s = (0..n).map(|_| rng.below(m as u64) as u8).collect();
            Sequence::new(ab, s, Default::default())
        }
        2 => {
            let ab = Alphabet::binary();
            let mut c = rng.below(2) as u8;
            let s = (0..n)
                .map(|_| {
                    if rng.next_f64() < 0.1 {
                        c ^= 1;
                    }
                    c
                })
                .collect();
            Sequence::new(ab, s, Default::default())
        }
        _ => {
            let chain = &chains[rng.below(chains.len() as u64) as usize];
            chain.sample(n.max(chain.block_len()), rng.next_u64()).unwrap()
        }
    }
}

fn test_chains() -> Vec<shiftmatch::StationaryChain> {
    [Interaction::ising(0.5, 0.0), Interaction::ising(-1.0, 0.2), Interaction::long_range_ising(&[0.3, -0.9], 0.1)]
        .iter()
        .map(|u| build_chain(&TransferSystem::new(u).unwrap()))
        .collect()
}

fn duality(g: &Golden, _: &mut Csvs) -> Outcome {
    let mut rng = CounterRng::new(g.duality.seed, STREAM_PRIMARY);
    let chains = test_chains();
    let mut matched = 0;
    for inst in 0..g.duality.instances {
        let n = 1 + rng.below(300) as usize;
        let s = random_sequence(&mut rng, n, &chains);
        let n = s.len();
        let k = 1 + rng.below(n.min(24) as u64) as usize;
        // three separate routes: direct window comparison, suffix array, rolling hash
        let no_pairs = count_matches_naive(&s, k).map_err(err)?.count == 0;
        let short = max_match(&s).length < k;
        let late = first_occurrence(&s, k).map_err(err)?.exceeds(n);
        ensure(no_pairs == short && short == late, || {
            format!("instance {inst}: N=0 {no_pairs}, M<k {short}, T>n {late} (n={n}, k={k})")
        })?;
        ensure(duality_check(&s, k).map_err(err)?, || format!("duality_check false on instance {inst}"))?;
        if !no_pairs {
            matched += 1;
        }
    }
    Ok(format!(
        "{} instances agree ({matched} with a match, {} without)",
        g.duality.instances,
        g.duality.instances - matched
    ))
}

fn oracle_equivalence(g: &Golden, _: &mut Csvs) -> Outcome {
    let c = &g.oracle;
    let mut rng = CounterRng::new(c.seed, STREAM_PRIMARY);
    let chains = test_chains();
    let mut witnesses = 0;
    let mut small = 0;
    let mut literal = 0;
    for case in 0..c.cases {
        let n = 1 + rng.below(c.max_n as u64) as usize;
        let s = random_sequence(&mut rng, n, &chains);
        let n = s.len();
        let profile = match_profile_naive(&s);
        let index = SuffixIndex::new(&s);
        for k in 1..=n {
            let fast = index.count(k).map_err(err)?.count;
            ensure(fast == profile[k - 1], || {
                format!("case {case}: n={n} k={k}: fast {fast} vs naive {}", profile[k - 1])
            })?;
        }
        // the literal per-window oracle, on a subset of k
        let ks: Vec<usize> = if n <= 200 { (1..=n).collect() } else { (0..4).map(|_| 1 + rng.below(n.min(40) as u64) as usize).collect() };
        for k in ks {
            let naive = count_matches_naive(&s, k).map_err(err)?.count;
            ensure(naive == profile[k - 1], || format!("case {case}: literal naive disagrees at k={k}"))?;
            literal += 1;
        }
        let r = index.max_match();
        let m = profile.iter().take_while(|&&x| x > 0).count();
        ensure(r.length == m, || format!("case {case}: M = {} but naive says {m}", r.length))?;
        match r.witness {
            Some((i, j)) => {
                ensure(i < j && s.window(i, m) == s.window(j, m), || format!("case {case}: bad witness ({i},{j})"))?;
                if n <= c.witness_max_n {
                    let longer = m < n && count_matches_naive(&s, m + 1).map_err(err)?.count > 0;
                    ensure(!longer, || format!("case {case}: a match longer than M exists"))?;
                    for a in 0..=n - m {
                        for b in a + 1..=n - m {
                            if (a, b) >= (i, j) {
                                break;
                            }
                            ensure(s.window(a, m) != s.window(b, m), || {
                                format!("case {case}: ({a},{b}) precedes witness ({i},{j})")
                            })?;
                        }
                    }
                    small += 1;
                }
                witnesses += 1;
            }
            None => ensure(m == 0, || format!("case {case}: missing witness"))?,
        }
    }
    Ok(format!(
        "{} cases, all k equal; {literal} literal naive checks; {witnesses} witnesses equal and maximal, \
         {small} with n <= {} also checked against the literal oracle and for minimality",
        c.cases,
        c.witness_max_n
    ))
}

fn slope_plan(g: &Golden, u: Interaction) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(Mode::SelfMatch, u, g.slope.n.clone(), KRule::Offsets(vec![Offset::ZERO]));
    plan.trials = Some(g.slope.trials);
    plan.seed = g.slope.seed;
    plan.scans = vec![Scan::Slope];
    plan
}

fn slope_law(g: &Golden, csvs: &mut Csvs) -> Outcome {
    let mut lines = Vec::new();
    for (name, u, target) in [("zero", zero2(), 2.0 / std::f64::consts::LN_2), ("iid(0.8,0.2)", iid82(), 1.0 / 0.192831)] {
        let fit = slope_fit(&slope_plan(g, u), workers()).map_err(err)?;
        ensure((fit.target - target).abs() < 1e-4 * target, || format!("{name}: target {} vs {target}", fit.target))?;
        ensure(fit.rel_error <= g.slope.tolerance, || {
            format!("{name}: slope {:.4} vs {:.4} (rel err {:.3})", fit.slope, fit.target, fit.rel_error)
        })?;
        csvs.0.push((7, slope_csv(&fit)));
        lines.push(format!(
            "{name}: slope {:.3} ± {:.3} vs {:.3} ({:.1}%)",
            fit.slope,
            fit.slope_std_err,
            fit.target,
            100.0 * fit.rel_error
        ));
    }
    let n = *g.slope.n.last().unwrap();
    let chain = build_chain(&TransferSystem::new(&zero2()).map_err(err)?);
    let mut total = Duration::ZERO;
    for t in 0..g.slope.timing_sequences {
        let s = chain.sample(n, g.slope.seed + 1_000_000 + t as u64).map_err(err)?;
        let start = Instant::now();
        let m = SuffixIndex::new(&s).max_match();
        total += start.elapsed();
        ensure(m.length > 0, || "empty maximal match".into())?;
    }
    let avg = total.as_secs_f64() / g.slope.timing_sequences as f64;
    ensure(avg < g.slope.max_seconds_per_sequence, || format!("suffix-array M at n={n} takes {avg:.3} s"))?;
    lines.push(format!("M at n={n}: {avg:.3} s/sequence"));
    Ok(lines.join("; "))
}

fn regime_plan(g: &Golden) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(
        Mode::SelfMatch,
        zero2(),
        g.regime.n.clone(),
        KRule::Offsets(vec![Offset::halves(-1), Offset::halves(1)]),
    );
    plan.seed = g.regime.seed;
    plan
}

fn regime(g: &Golden, csvs: &mut Csvs) -> Outcome {
    let cells = regime_scan(&regime_plan(g), workers()).map_err(err)?;
    let verdicts = regime_verdicts(&cells);
    let below = verdicts.iter().find(|v| v.label == "k*-half").ok_or("missing -half series")?;
    let above = verdicts.iter().find(|v| v.label == "k*+half").ok_or("missing +half series")?;
    let means: Vec<String> = cells
        .iter()
        .filter(|c| c.label == "k*-half")
        .map(|c| format!("{:.1}", c.mean))
        .collect();
    ensure(below.means_increasing, || format!("means at -half not increasing: {means:?}"))?;
    ensure(above.last_zero_frac > g.regime.min_zero_frac, || {
        format!("zero fraction at +half, largest n: {}", above.last_zero_frac)
    })?;
    csvs.0.push((8, cells_csv(&cells)));
    Ok(format!(
        "means at -half: {}; zero fraction at +half, largest n: {:.4}",
        means.join(" < "),
        above.last_zero_frac
    ))
}

fn tightness_plan(g: &Golden, mode: Mode, seed: u64) -> ExperimentPlan {
    let mut plan = ExperimentPlan::new(mode, zero2(), g.tightness.n.clone(), KRule::Offsets(vec![Offset::ZERO]));
    plan.seed = seed;
    plan.scans = vec![Scan::Tightness];
    plan
}

fn tightness(g: &Golden, csvs: &mut Csvs) -> Outcome {
    let mut lines = Vec::new();
    for mode in [Mode::SelfMatch, Mode::PairSame] {
        let table = tightness_scan(&tightness_plan(g, mode, g.tightness.seed), workers()).map_err(err)?;
        let s = &table.series[0];
        let cs: Vec<String> = table.rows.iter().map(|r| format!("{:.3}", r.tail_constant)).collect();
        ensure(s.spread < g.tightness.max_spread, || {
            format!("{}: max_m m·P(N>m) varies {:.2}x over the grid: {cs:?}", mode.label(), s.spread)
        })?;
        ensure(s.min_p_positive >= g.tightness.floor, || {
            format!("{}: min P(N>0) = {} below floor {}", mode.label(), s.min_p_positive, g.tightness.floor)
        })?;
        csvs.0.push((9, cells_csv(&table.cells)));
        lines.push(format!(
            "{}: C(n) = [{}] spread {:.2}x, min P(N>0) = {:.3} >= {}",
            mode.label(),
            cs.join(", "),
            s.spread,
            s.min_p_positive,
            g.tightness.floor
        ));
    }
    Ok(lines.join("; "))
}

fn counterexample_plan(g: &Golden) -> ExperimentPlan {
    let c = &g.counterexample;
    let mut plan = ExperimentPlan::new(Mode::Dirac(0), zero2(), vec![c.n], KRule::Explicit(vec![c.k]));
    plan.trials = Some(c.trials);
    plan.seed = c.seed;
    plan.delta = c.delta;
    plan.scans = vec![Scan::Counterexample];
    plan
}

fn counterexample(g: &Golden, csvs: &mut Csvs) -> Outcome {
    let c = &g.counterexample;
    let rows = counterexample_dirac(&counterexample_plan(g), workers()).map_err(err)?;
    let r = &rows[0];
    let closed = c.n as f64 * (c.n - c.k + 1) as f64 * 0.5f64.powi(c.k as i32);
    ensure((r.prediction.closed_form - closed).abs() < 1e-9, || {
        format!("closed form {} vs {closed}", r.prediction.closed_form)
    })?;
    ensure((r.prediction.closed_form - 95.19).abs() < 5e-3, || format!("E N = {}", r.prediction.closed_form))?;
    ensure(r.prediction.union_bound <= 1.0 - 0.990, || format!("union bound {}", r.prediction.union_bound))?;
    ensure(r.cell.zero_frac >= c.min_zero_frac, || format!("P(N=0) = {}", r.cell.zero_frac))?;
    let ks = dirac_window_lengths(&zero2(), 0, &c.growth_n, c.growth_factor, c.delta).map_err(err)?;
    let preds: Vec<f64> = c
        .growth_n
        .iter()
        .zip(&ks)
        .map(|(&n, &k)| dirac_prediction(&zero2(), 0, n, k).map(|p| p.closed_form))
        .collect::<Result<_, _>>()
        .map_err(err)?;
    ensure(preds.windows(2).all(|w| w[1] > w[0]), || format!("E N not increasing: {preds:?}"))?;
    csvs.0.push((10, cells_csv(&[r.cell.clone()])));
    Ok(format!(
        "E N = {:.4}, P(N=0) = {:.3} over {} trials; k_n = {ks:?} gives E N = [{}]",
        r.prediction.closed_form,
        r.cell.zero_frac,
        r.cell.trials,
        preds.iter().map(|p| format!("{p:.2}")).collect::<Vec<_>>().join(" < ")
    ))
}

/// Reruns every Monte Carlo criterion with one worker and compares bytes
/// with the multi-worker output collected above. The slope criterion is
/// rerun with its full grid and seeds but 3 trials per n on both sides,
/// since a single-worker rerun at 50 trials would double its cost.
fn reproducibility(g: &Golden, csvs: &mut Csvs) -> Outcome {
    let one = RunOptions { workers: 1 };
    let many = RunOptions { workers: 4 };
    let mut compared = 0;
    let mut check = |id: u32, a: String, b: String| -> std::result::Result<(), String> {
        ensure(a == b, || format!("criterion {id}: CSV differs between worker counts"))?;
        compared += 1;
        Ok(())
    };
    let first = |id: u32| csvs.0.iter().filter(|(i, _)| *i == id).map(|(_, s)| s.clone()).collect::<Vec<_>>();

    let mut fresh = vec![cells_csv(&regime_scan(&first_moment_plan(g), one).map_err(err)?)];
    let mut earlier = first(4);
    if earlier.is_empty() {
        earlier = vec![cells_csv(&regime_scan(&first_moment_plan(g), many).map_err(err)?)];
    }
    check(4, earlier.concat(), fresh.concat())?;

    fresh = vec![cells_csv(&regime_scan(&regime_plan(g), one).map_err(err)?)];
    earlier = first(8);
    if earlier.is_empty() {
        earlier = vec![cells_csv(&regime_scan(&regime_plan(g), many).map_err(err)?)];
    }
    check(8, earlier.concat(), fresh.concat())?;

    let tight = |opts| -> std::result::Result<Vec<String>, String> {
        [Mode::SelfMatch, Mode::PairSame]
            .into_iter()
            .map(|m| Ok(cells_csv(&tightness_scan(&tightness_plan(g, m, g.tightness.seed), opts).map_err(err)?.cells)))
            .collect()
    };
    fresh = tight(one)?;
    earlier = first(9);
    if earlier.is_empty() {
        earlier = tight(many)?;
    }
    check(9, earlier.concat(), fresh.concat())?;

    let dirac = |opts| -> std::result::Result<String, String> {
        let rows = counterexample_dirac(&counterexample_plan(g), opts).map_err(err)?;
        Ok(cells_csv(&rows.into_iter().map(|r| r.cell).collect::<Vec<_>>()))
    };
    fresh = vec![dirac(one)?];
    earlier = first(10);
    if earlier.is_empty() {
        earlier = vec![dirac(many)?];
    }
    check(10, earlier.concat(), fresh.concat())?;

    let short_slope = |opts| -> std::result::Result<String, String> {
        let mut out = String::new();
        for u in [zero2(), iid82()] {
            let mut plan = slope_plan(g, u);
            plan.trials = Some(3);
            out.push_str(&slope_csv(&slope_fit(&plan, opts).map_err(err)?));
        }
        Ok(out)
    };
    check(7, short_slope(many)?, short_slope(one)?)?;

    Ok(format!("{compared} criteria produce identical CSV bytes with 1 and 4 workers"))
}

fn pilot(g: &Golden) {
    for mode in [Mode::SelfMatch, Mode::PairSame] {
        let table = tightness_scan(&tightness_plan(g, mode, g.pilot_seed), workers()).unwrap();
        for r in &table.rows {
            println!(
                "pilot {} n={} k={} P(N>0)={:.4} C={:.4}",
                mode.label(),
                r.n,
                r.k,
                r.p_positive,
                r.tail_constant
            );
        }
        let s = &table.series[0];
        println!(
            "pilot {}: min P(N>0) = {:.4}, spread {:.3}",
            mode.label(),
            s.min_p_positive,
            s.spread
        );
    }
}

type Criterion = fn(&Golden, &mut Csvs) -> Outcome;

fn main() {
    let g: Golden = toml::from_str(GOLDEN).expect("golden config parses");
    let args: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with("--") || a == "--pilot").collect();
    if args.iter().any(|a| a == "--pilot") {
        pilot(&g);
        return;
    }
    let criteria: [(u32, &str, Duration, Criterion); 11] = [
        (1, "analytic alpha", Duration::from_secs(1), analytic_alpha),
        (2, "pressure oracle", Duration::from_secs(10), pressure_oracle),
        (3, "power-sum ratio bound", Duration::from_secs(30), ratio_bound),
        (4, "exact first moment", Duration::from_secs(60), first_moment),
        (5, "duality", Duration::from_secs(60), duality),
        (6, "oracle equivalence", Duration::from_secs(120), oracle_equivalence),
        (7, "slope law", Duration::from_secs(600), slope_law),
        (8, "regime separation", Duration::from_secs(600), regime),
        (9, "tightness", Duration::from_secs(600), tightness),
        (10, "dirac counterexample", Duration::from_secs(120), counterexample),
        (11, "reproducibility", Duration::from_secs(1200), reproducibility),
    ];
    let selected: Vec<u32> = args.iter().filter_map(|a| a.parse().ok()).collect();
    let mut csvs = Csvs::default();
    let mut failed = 0;
    for (id, name, budget, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f(&g, &mut csvs);
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > budget => Err(format!("{detail}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {id:>2} {name} ({took:.2?}): {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {id:>2} {name} ({took:.2?}): {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
