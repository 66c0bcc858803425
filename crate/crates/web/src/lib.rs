//! Browser front end. Models are entered as the same TOML the command-line
//! tool reads; results come back as JSON strings.

use serde_json::json;
use wasm_bindgen::prelude::*;

use shiftmatch::experiments::{slope_fit, ExperimentPlan, KRule, Mode, Offset, RunOptions};
use shiftmatch::matcher::{first_occurrence, SuffixIndex};
use shiftmatch::model::parse_model;
use shiftmatch::sampler::build_chain;
use shiftmatch::thermo::{self, TransferSystem};
use shiftmatch::Interaction;

const PREVIEW: usize = 400;
const MAX_N: usize = 1 << 20;
const SLOPE_GRID: [usize; 6] = [64, 256, 1024, 4096, 16384, 65536];

fn model(src: &str) -> Result<Interaction, String> {
    parse_model(src, "model").map_err(|e| e.to_string())
}

fn finite(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

/// Pressure, entropy, α and k* of a model.
pub fn thermo_json(src: &str) -> Result<String, String> {
    let u = model(src)?;
    let ts = TransferSystem::new(&u).map_err(|e| e.to_string())?;
    let alpha = thermo::alpha(&u).map_err(|e| e.to_string())?;
    let entropy = thermo::entropy(&u).map_err(|e| e.to_string())?;
    let k_star: Vec<_> = [1_000usize, 10_000, 100_000, 1_000_000]
        .iter()
        .map(|&n| json!({"n": n, "k_star": finite(thermo::k_star_from_alpha(alpha, n).unwrap_or(f64::NAN))}))
        .collect();
    Ok(json!({
        "name": u.name(),
        "alphabet": u.alphabet().tokens(),
        "range": u.range(),
        "states": ts.n_states(),
        "pressure": ts.pressure(),
        "entropy": entropy,
        "alpha": alpha,
        "k_star": k_star,
    })
    .to_string())
}

/// Pressure, entropy and α of `ising(J, h)` for `steps + 1` couplings in
/// `[j_lo, j_hi]`.
pub fn ising_sweep_json(h: f64, j_lo: f64, j_hi: f64, steps: usize) -> Result<String, String> {
    if !(j_lo.is_finite() && j_hi.is_finite() && h.is_finite()) || j_hi <= j_lo {
        return Err("need finite h and j_lo < j_hi".into());
    }
    let steps = steps.clamp(1, 400);
    let mut j = Vec::with_capacity(steps + 1);
    let mut pressure = Vec::with_capacity(steps + 1);
    let mut entropy = Vec::with_capacity(steps + 1);
    let mut alpha = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let jj = j_lo + (j_hi - j_lo) * i as f64 / steps as f64;
        let u = Interaction::ising(jj, h);
        j.push(jj);
        pressure.push(thermo::pressure(&u).map_err(|e| e.to_string())?);
        entropy.push(thermo::entropy(&u).map_err(|e| e.to_string())?);
        alpha.push(thermo::alpha(&u).map_err(|e| e.to_string())?);
    }
    Ok(json!({"j": j, "pressure": pressure, "entropy": entropy, "alpha": alpha}).to_string())
}

/// Samples one sequence and reports N(k), the maximal match M and the
/// hitting time T(k). `k = 0` means the nearest integer to k*.
pub fn sample_and_match_json(src: &str, n: usize, seed: u64, k: usize) -> Result<String, String> {
    if !(2..=MAX_N).contains(&n) {
        return Err(format!("n must be between 2 and {MAX_N}"));
    }
    let u = model(src)?;
    let ts = TransferSystem::new(&u).map_err(|e| e.to_string())?;
    let alpha = thermo::alpha(&u).map_err(|e| e.to_string())?;
    let k_star = thermo::k_star_from_alpha(alpha, n).map_err(|e| e.to_string())?;
    let chain = build_chain(&ts);
    let s = chain.sample(n.max(chain.block_len()), seed).map_err(|e| e.to_string())?;
    let n = s.len();
    let k = if k == 0 { (k_star.round() as usize).clamp(1, n) } else { k.min(n) };
    let index = SuffixIndex::new(&s);
    let count = index.count(k).map_err(|e| e.to_string())?.count;
    let mm = index.max_match();
    let hit = first_occurrence(&s, k).map_err(|e| e.to_string())?;
    let window = |w: Option<(usize, usize)>, len: usize| {
        w.map(|(i, j)| json!({"i": i, "j": j, "window": s.window(i, len).iter().map(|&c| s.alphabet().token(c)).collect::<Vec<_>>()}))
    };
    let preview: Vec<&str> = s.symbols()[..n.min(PREVIEW)].iter().map(|&c| s.alphabet().token(c)).collect();
    Ok(json!({
        "n": n,
        "k": k,
        "k_star": k_star,
        "alpha": alpha,
        "count": count,
        "max_match": mm.length,
        "max_witness": window(mm.witness, mm.length),
        "hitting_time": hit.time,
        "hitting_witness": window(hit.witness, k),
        "preview": preview,
    })
    .to_string())
}

/// Mean maximal match over a fixed grid of n, with the least-squares slope
/// against ln n and its target 1/α.
pub fn slope_scan_json(src: &str, trials: usize, seed: u64) -> Result<String, String> {
    let u = model(src)?;
    let mut plan = ExperimentPlan::new(Mode::SelfMatch, u, SLOPE_GRID.to_vec(), KRule::Offsets(vec![Offset::ZERO]));
    plan.trials = Some(trials.clamp(1, 200));
    plan.seed = seed;
    let fit = slope_fit(&plan, RunOptions { workers: 1 }).map_err(|e| e.to_string())?;
    serde_json::to_string(&fit).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn thermo_summary(model_src: &str) -> Result<String, JsValue> {
    thermo_json(model_src).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn ising_sweep(h: f64, j_lo: f64, j_hi: f64, steps: usize) -> Result<String, JsValue> {
    ising_sweep_json(h, j_lo, j_hi, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sample_and_match(model_src: &str, n: usize, seed: u64, k: usize) -> Result<String, JsValue> {
    sample_and_match_json(model_src, n, seed, k).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn slope_scan(model_src: &str, trials: usize, seed: u64) -> Result<String, JsValue> {
    slope_scan_json(model_src, trials, seed).map_err(|e| JsValue::from_str(&e))
}
