//! `shiftmatch` command-line tool.
//!
//! Errors are reported on stderr as a single line `error[<kind>]: <message>`
//! with a nonzero exit status. Every run prints a `seed=... model=...
//! digest=...` line on stderr.

use std::collections::BTreeSet;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use shiftmatch::experiments::{fmt_real, run_plan, ExperimentPlan, KRule, Offset, RunOptions, DEFAULT_SEED};
use shiftmatch::matcher::{first_occurrence, CrossIndex, SuffixIndex};
use shiftmatch::model::{load_model, load_plan, model_digest};
use shiftmatch::sampler::{build_chain, read_sequence, sample_pair, write_sequence, Source};
use shiftmatch::thermo::{self, TransferSystem, DEFAULT_CAP};
use shiftmatch::{Alphabet, Error, Interaction, Result, Sequence, SequenceMeta};

#[derive(Parser)]
#[command(name = "shiftmatch", version, about = "Gibbs thermodynamics and shift-match statistics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pressure, entropy, match exponent and cylinder diagnostics of a model.
    Thermo(ThermoArgs),
    /// Sample a stationary sequence (or an independent pair) from a model.
    Sample(SampleArgs),
    /// Match counts N, maximal overlap M and hitting times T of sequence files.
    Match(MatchArgs),
    /// Run the Monte Carlo scans of a plan file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct ThermoArgs {
    #[arg(long)]
    model: PathBuf,
    /// Second model, for the cross exponent α̃.
    #[arg(long)]
    model2: Option<PathBuf>,
    /// Lengths at which to report k* = ln n / α.
    #[arg(long = "n")]
    n: Vec<usize>,
    /// Largest pattern length for the cylinder diagnostics.
    #[arg(long, default_value_t = 8)]
    k_max: usize,
    /// Brute-force enumeration cap.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    #[arg(long)]
    csv: bool,
    #[arg(long)]
    pressure: bool,
    #[arg(long)]
    entropy: bool,
    #[arg(long)]
    alpha: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    model: PathBuf,
    /// Second model; samples an independent pair.
    #[arg(long)]
    model2: Option<PathBuf>,
    /// Replace the second sequence by the constant sequence of this token.
    #[arg(long)]
    dirac: Option<String>,
    #[arg(long = "n")]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Output file (stdout if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output file for the second sequence of a pair.
    #[arg(long)]
    out2: Option<PathBuf>,
}

#[derive(Args)]
struct MatchArgs {
    /// One or two sequence files.
    #[arg(long = "seq", required = true)]
    seq: Vec<PathBuf>,
    /// `5`, `3..8` (inclusive), `kstar`, `kstar+2`, `kstar-1` or `kstar±2`.
    /// Defaults to `1..M+1`.
    #[arg(long, allow_hyphen_values = true)]
    k: Option<String>,
    /// Model giving the alphabet and, for `kstar`, the exponent α.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Second model; `kstar` then uses α̃.
    #[arg(long)]
    model2: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    plan: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Override the plan's models.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    model2: Option<PathBuf>,
    /// Override the n grid.
    #[arg(long = "n", value_delimiter = ',')]
    n: Vec<usize>,
    /// Override the k rule: `k:5,6`, `offsets:-half,0,+half` or `growth:1.5`.
    #[arg(long, allow_hyphen_values = true)]
    k_rule: Option<String>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Also write two-column series files for plotting.
    #[arg(long)]
    plot_data: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("error[usage]: {}", first.trim_start_matches("error: "));
            return ExitCode::from(2);
        }
    };
    let result = match cli.command {
        Command::Thermo(a) => thermo_cmd(a),
        Command::Sample(a) => sample_cmd(a),
        Command::Match(a) => match_cmd(a),
        Command::Experiment(a) => experiment_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.kind());
            ExitCode::FAILURE
        }
    }
}

fn log_run(seed: Option<u64>, models: &[&Interaction]) {
    let seed = seed.map_or_else(|| "none".into(), |s| s.to_string());
    if models.is_empty() {
        eprintln!("seed={seed} model=none digest=none");
    }
    for u in models {
        eprintln!("seed={seed} model={} digest={}", u.name(), model_digest(u));
    }
}

fn require_file(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "no such file")))
    }
}

fn require_parent(path: &Path) -> Result<()> {
    let dir = parent_dir(path);
    if dir.is_dir() {
        Ok(())
    } else {
        Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "output directory does not exist")))
    }
}

fn parent_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes through a temporary file in the target directory, then renames,
/// so a failed run never leaves a partial file behind.
fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = parent_dir(path);
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(contents).map_err(|e| Error::io(tmp.path(), e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn thermo_cmd(a: ThermoArgs) -> Result<()> {
    require_file(&a.model)?;
    if let Some(p) = &a.model2 {
        require_file(p)?;
    }
    if let Some(p) = &a.out {
        require_parent(p)?;
    }
    if let Some(&n) = a.n.iter().find(|&&n| n < 2) {
        return Err(Error::OutOfRange(format!("k* needs n >= 2, got {n}")));
    }
    let u = load_model(&a.model)?;
    let v = a.model2.as_deref().map(load_model).transpose()?;
    let mut logged = vec![&u];
    logged.extend(v.as_ref());
    log_run(None, &logged);

    let selected = a.pressure || a.entropy || a.alpha;
    let mut rows: Vec<(String, String)> = Vec::new();
    let ts = TransferSystem::new(&u)?;
    let al = thermo::alpha(&u)?;
    if !selected || a.pressure {
        rows.push(("pressure".into(), fmt_real(ts.pressure())));
    }
    if !selected || a.entropy {
        rows.push(("entropy".into(), fmt_real(thermo::entropy(&u)?)));
    }
    if !selected || a.alpha {
        rows.push(("alpha".into(), fmt_real(al)));
    }
    if let Some(v) = &v {
        if !selected || a.alpha {
            rows.push(("alpha_tilde".into(), fmt_real(thermo::alpha_tilde(&u, v)?)));
        }
    }
    if !selected {
        let d = thermo::diagnostics_capped(&u, a.k_max, a.cap)?;
        rows.push(("rho_hat".into(), fmt_real(d.rho_hat)));
        rows.push(("delta_hat".into(), fmt_real(d.delta_hat)));
        rows.push((format!("gamma_hat(k_max={})", a.k_max), fmt_real(d.gamma_hat)));
        rows.push(("perron_residual".into(), fmt_real(ts.residual())));
        for &n in &a.n {
            rows.push((format!("k_star(n={n})"), fmt_real(thermo::k_star_from_alpha(al, n)?)));
        }
    }
    let text = if a.csv {
        let mut s = String::from("quantity,value\n");
        for (k, v) in &rows {
            s.push_str(&format!("{k},{v}\n"));
        }
        s
    } else {
        let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    };
    emit(&a.out, &text)
}

fn sequence_text(s: &Sequence) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_sequence(&mut buf, s).map_err(|e| Error::io("<buffer>", e))?;
    Ok(buf)
}

fn sample_cmd(a: SampleArgs) -> Result<()> {
    require_file(&a.model)?;
    if let Some(p) = &a.model2 {
        require_file(p)?;
    }
    for p in a.out.iter().chain(&a.out2) {
        require_parent(p)?;
    }
    let pair = a.model2.is_some() || a.dirac.is_some();
    if a.model2.is_some() && a.dirac.is_some() {
        return Err(Error::OutOfRange("give either --model2 or --dirac, not both".into()));
    }
    if pair && (a.out.is_none() || a.out2.is_none()) {
        return Err(Error::OutOfRange("a pair needs both --out and --out2".into()));
    }
    if !pair && a.out2.is_some() {
        return Err(Error::OutOfRange("--out2 needs --model2 or --dirac".into()));
    }
    let u = load_model(&a.model)?;
    let first = Source::Gibbs(build_chain(&TransferSystem::new(&u)?));
    if !pair {
        log_run(Some(a.seed), &[&u]);
        let s = first.sample(a.n, a.seed)?;
        let bytes = sequence_text(&s)?;
        return match &a.out {
            Some(p) => write_atomic(p, &bytes),
            None => {
                std::io::stdout().write_all(&bytes).map_err(|e| Error::io("<stdout>", e))
            }
        };
    }
    let second = if let Some(tok) = &a.dirac {
        let sym = u
            .alphabet()
            .index_of(tok)
            .ok_or_else(|| Error::UnknownSymbol(tok.clone()))?;
        log_run(Some(a.seed), &[&u]);
        Source::Dirac {
            alphabet: u.alphabet().clone(),
            symbol: sym,
        }
    } else {
        let v = load_model(a.model2.as_ref().unwrap())?;
        log_run(Some(a.seed), &[&u, &v]);
        Source::Gibbs(build_chain(&TransferSystem::new(&v)?))
    };
    let (s, t) = sample_pair(&first, &second, a.n, a.seed)?;
    let (bs, bt) = (sequence_text(&s)?, sequence_text(&t)?);
    write_atomic(a.out.as_ref().unwrap(), &bs)?;
    write_atomic(a.out2.as_ref().unwrap(), &bt)
}

enum KSpec {
    Values(Vec<usize>),
    Star { lo: i64, hi: i64 },
}

fn parse_k(spec: &str) -> Result<KSpec> {
    let bad = || Error::OutOfRange(format!("bad --k {spec:?} (expected 5, 3..8, kstar, kstar+2 or kstar±2)"));
    let s = spec.trim();
    if let Some(rest) = s.strip_prefix("kstar") {
        if rest.is_empty() {
            return Ok(KSpec::Star { lo: 0, hi: 0 });
        }
        for pm in ["±", "+-", "+/-"] {
            if let Some(w) = rest.strip_prefix(pm) {
                let w: i64 = w.parse().map_err(|_| bad())?;
                return Ok(KSpec::Star { lo: -w.abs(), hi: w.abs() });
            }
        }
        let o: Offset = rest.parse().map_err(|_| bad())?;
        if o.halves != 0 {
            return Err(bad());
        }
        return Ok(KSpec::Star { lo: o.whole, hi: o.whole });
    }
    if let Some((a, b)) = s.split_once("..") {
        let a: usize = a.parse().map_err(|_| bad())?;
        let b: usize = b.trim_start_matches('=').parse().map_err(|_| bad())?;
        if a == 0 || b < a {
            return Err(bad());
        }
        return Ok(KSpec::Values((a..=b).collect()));
    }
    let k: usize = s.parse().map_err(|_| bad())?;
    Ok(KSpec::Values(vec![k]))
}

fn load_sequences(paths: &[PathBuf], model: Option<&Interaction>) -> Result<Vec<Sequence>> {
    let mut raw = Vec::new();
    for p in paths {
        let f = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
        let (tokens, meta) = read_sequence(BufReader::new(f)).map_err(|e| match e {
            Error::SequenceFormat(m) => Error::SequenceFormat(format!("{}: {m}", p.display())),
            other => other,
        })?;
        raw.push((tokens, meta));
    }
    let alphabet = match model {
        Some(u) => u.alphabet().clone(),
        None => {
            let all: BTreeSet<&str> = raw.iter().flat_map(|(t, _)| t.iter().map(String::as_str)).collect();
            Alphabet::new(all)?
        }
    };
    raw.into_iter()
        .map(|(tokens, meta): (Vec<String>, SequenceMeta)| Ok(Sequence::from_tokens(&alphabet, &tokens)?.with_meta(meta)))
        .collect()
}

fn opt_pair(w: Option<(usize, usize)>) -> (String, String) {
    w.map_or_else(|| (String::new(), String::new()), |(i, j)| (i.to_string(), j.to_string()))
}

fn match_cmd(a: MatchArgs) -> Result<()> {
    if a.seq.len() > 2 {
        return Err(Error::OutOfRange(format!("--seq given {} times; expected one or two", a.seq.len())));
    }
    for p in a.seq.iter().chain(&a.model).chain(&a.model2) {
        require_file(p)?;
    }
    if let Some(p) = &a.out {
        require_parent(p)?;
    }
    let kspec = a.k.as_deref().map(parse_k).transpose()?;
    if matches!(kspec, Some(KSpec::Star { .. })) && a.model.is_none() {
        return Err(Error::OutOfRange("--k kstar needs --model".into()));
    }
    let u = a.model.as_deref().map(load_model).transpose()?;
    let v = a.model2.as_deref().map(load_model).transpose()?;
    let seqs = load_sequences(&a.seq, u.as_ref())?;
    if seqs.len() == 2 && seqs[0].len() != seqs[1].len() {
        return Err(Error::LengthMismatch(seqs[0].len(), seqs[1].len()));
    }
    let mut logged: Vec<&Interaction> = u.iter().collect();
    logged.extend(v.iter());
    log_run(seqs[0].meta().seed, &logged);

    let n = seqs[0].len();
    let resolve = |default_max: usize| -> Result<Vec<usize>> {
        let ks = match &kspec {
            None => (1..=default_max.min(n)).collect(),
            Some(KSpec::Values(ks)) => ks.clone(),
            Some(KSpec::Star { lo, hi }) => {
                let u = u.as_ref().unwrap();
                let al = match &v {
                    Some(v) => thermo::alpha_tilde(u, v)?,
                    None => thermo::alpha(u)?,
                };
                let ks = thermo::k_star_from_alpha(al, n)?;
                (*lo..=*hi).map(|o| Offset::whole(o).apply(ks).clamp(1, n as i64) as usize).collect()
            }
        };
        if let Some(&k) = ks.iter().find(|&&k| k == 0 || k > n) {
            return Err(Error::OutOfRange(format!("window length k={k} must satisfy 1 <= k <= n={n}")));
        }
        Ok(ks)
    };

    let mut out = String::new();
    if seqs.len() == 1 {
        let s = &seqs[0];
        let index = SuffixIndex::new(s);
        let mm = index.max_match();
        let (mi, mj) = opt_pair(mm.witness);
        out.push_str("n,k,N,M,M_i,M_j,T,T_i,T_j\n");
        for k in resolve(mm.length + 1)? {
            let count = index.count(k)?.count;
            let hit = first_occurrence(s, k)?;
            let t = hit.time.map_or_else(|| "inf".into(), |t| t.to_string());
            let (ti, tj) = opt_pair(hit.witness);
            out.push_str(&format!("{n},{k},{count},{},{mi},{mj},{t},{ti},{tj}\n", mm.length));
        }
    } else {
        let index = CrossIndex::new(&seqs[0], &seqs[1])?;
        let r = index.max_cross_match();
        let (ci, cj) = opt_pair(r.constrained.witness);
        let (ui, uj) = opt_pair(r.unconstrained.witness);
        out.push_str("n,k,N,M_constrained,Mc_i,Mc_j,M_unconstrained,Mu_i,Mu_j\n");
        for k in resolve(r.unconstrained.length + 1)? {
            let count = index.count(k)?.count;
            out.push_str(&format!(
                "{n},{k},{count},{},{ci},{cj},{},{ui},{uj}\n",
                r.constrained.length, r.unconstrained.length
            ));
        }
    }
    emit(&a.out, &out)
}

fn parse_k_rule(s: &str) -> Result<KRule> {
    let bad = || Error::Plan(format!("bad --k-rule {s:?} (expected k:5,6, offsets:-half,0,+half or growth:1.5)"));
    let (kind, body) = s.split_once(':').ok_or_else(bad)?;
    let items = || body.split(',').map(str::trim).filter(|x| !x.is_empty());
    match kind {
        "k" => Ok(KRule::Explicit(items().map(|x| x.parse().map_err(|_| bad())).collect::<Result<_>>()?)),
        "offsets" => Ok(KRule::Offsets(items().map(str::parse).collect::<Result<_>>()?)),
        "growth" => Ok(KRule::Growth(body.trim().parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

fn experiment_cmd(a: ExperimentArgs) -> Result<()> {
    require_file(&a.plan)?;
    for p in a.model.iter().chain(&a.model2) {
        require_file(p)?;
    }
    require_parent(&a.out)?;
    if a.workers == 0 {
        return Err(Error::Plan("--workers must be >= 1".into()));
    }
    let mut plan: ExperimentPlan = load_plan(&a.plan)?;
    if let Some(p) = &a.model {
        plan.model = load_model(p)?;
    }
    if let Some(p) = &a.model2 {
        plan.model2 = Some(load_model(p)?);
    }
    if !a.n.is_empty() {
        plan.n_grid = a.n.clone();
    }
    if let Some(r) = &a.k_rule {
        plan.k_rule = parse_k_rule(r)?;
    }
    if let Some(t) = a.trials {
        plan.trials = Some(t);
    }
    if let Some(s) = a.seed {
        plan.seed = s;
    }
    plan.validate()?;
    let mut logged = vec![&plan.model];
    logged.extend(plan.model2.as_ref());
    log_run(Some(plan.seed), &logged);

    let start = Instant::now();
    let report = run_plan(&plan, RunOptions { workers: a.workers })?;
    let wall = start.elapsed().as_secs_f64();

    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let mut written = Vec::new();
    let files = report.files.iter().chain(if a.plot_data { &report.plot_files[..] } else { &[] });
    for (name, body) in files {
        write_atomic(&a.out.join(name), body.as_bytes())?;
        written.push(name.clone());
    }
    let models: Vec<serde_json::Value> = std::iter::once(&plan.model)
        .chain(plan.model2.as_ref())
        .map(|u| {
            serde_json::json!({
                "id": u.name(),
                "digest": model_digest(u),
                "couplings": u.canonical_string(),
            })
        })
        .collect();
    let trials: Vec<serde_json::Value> = plan
        .n_grid
        .iter()
        .map(|&n| serde_json::json!({"n": n, "trials": plan.trials_for(n)}))
        .collect();
    let manifest = serde_json::json!({
        "name": plan.name,
        "mode": plan.mode.label(),
        "models": models,
        "seed": plan.seed,
        "trial_seeds": "seed + trial index",
        "n_grid": plan.n_grid,
        "trials": trials,
        "k_rule": format!("{:?}", plan.k_rule),
        "scans": plan.scans,
        "workers": a.workers,
        "wall_time_s": wall,
        "files": written,
        "summary": report.summary,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
    write_atomic(&a.out.join("manifest.json"), text.as_bytes())
}
