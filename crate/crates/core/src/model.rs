//! Model and plan files.
//!
//! A model file is TOML:
//!
//! ```toml
//! id = "nn-ising"
//! alphabet = ["+1", "-1"]
//! range = 1
//!
//! [[terms]]
//! offsets = [0, 1]
//! pattern = ["+1", "+1"]
//! value = 0.5
//! ```
//!
//! Shorthand stanzas may replace or add to the explicit terms:
//! `[ising] j = 0.5, h = 0.0` (`j` may be a list of couplings at distances
//! 1, 2, ...), `[iid] p = [0.8, 0.2]` and `[zero]`. All parts are summed;
//! a top-level `scale` multiplies the result. Without an explicit
//! `alphabet`, `[ising]` uses `+1 -1`, `[iid]` uses `a b c ...` and
//! `[zero]` uses `0 1`.
//!
//! A plan file describes an [`ExperimentPlan`]; see [`parse_plan`].

use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use sha2::{Digest, Sha256};
use toml::Spanned;

use crate::error::{Error, Result};
use crate::experiments::{ExperimentPlan, KRule, Mode, Offset, Scan, DEFAULT_SEED};
use crate::potential::{Alphabet, Interaction, Term};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpec {
    id: Option<String>,
    alphabet: Option<Spanned<Vec<String>>>,
    range: Option<Spanned<usize>>,
    #[serde(default)]
    terms: Vec<Spanned<TermSpec>>,
    ising: Option<Spanned<IsingSpec>>,
    iid: Option<Spanned<IidSpec>>,
    zero: Option<Spanned<ZeroSpec>>,
    scale: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermSpec {
    offsets: Spanned<Vec<i64>>,
    pattern: Spanned<Vec<String>>,
    value: Spanned<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged, expecting = "expected a number or a list of numbers")]
enum Couplings {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IsingSpec {
    j: Couplings,
    #[serde(default)]
    h: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IidSpec {
    p: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ZeroSpec {}

/// 1-based line of a byte offset.
fn line_of(src: &str, offset: usize) -> usize {
    src[..offset.min(src.len())].matches('\n').count() + 1
}

const MODEL_FILE: &str = "model file";

fn at(src: &str, span: Range<usize>, msg: impl Into<String>) -> Error {
    Error::ModelParse {
        file: MODEL_FILE.into(),
        line: line_of(src, span.start),
        msg: msg.into(),
    }
}

fn from_toml(src: &str, e: toml::de::Error) -> Error {
    Error::ModelParse {
        file: MODEL_FILE.into(),
        line: e.span().map_or(1, |s| line_of(src, s.start)),
        msg: e.message().trim().to_string(),
    }
}

/// Re-expresses an interaction over another alphabet of the same size,
/// symbol by symbol.
fn relabel(u: &Interaction, alphabet: &Alphabet) -> Result<Interaction> {
    if u.alphabet().size() != alphabet.size() {
        return Err(Error::AlphabetMismatch(format!(
            "{} symbols needed, alphabet {} has {}",
            u.alphabet().size(),
            alphabet,
            alphabet.size()
        )));
    }
    Interaction::new(alphabet.clone(), u.range(), &u.nonzero_terms())
}

impl ModelSpec {
    fn build(&self, src: &str) -> Result<Interaction> {
        let explicit = match &self.alphabet {
            Some(a) => Some(Alphabet::new(a.get_ref().iter()).map_err(|e| at(src, a.span(), e.to_string()))?),
            None => None,
        };
        let alphabet = match (&explicit, &self.ising, &self.iid) {
            (Some(a), _, _) => a.clone(),
            (None, Some(_), _) => Alphabet::spins(),
            (None, None, Some(iid)) => {
                Alphabet::letters(iid.get_ref().p.len()).map_err(|e| at(src, iid.span(), e.to_string()))?
            }
            (None, None, None) if self.terms.is_empty() => Alphabet::binary(),
            (None, None, None) => {
                return Err(at(src, self.terms[0].span(), "explicit terms need an `alphabet`"));
            }
        };

        let mut parts: Vec<Interaction> = Vec::new();
        if let Some(ising) = &self.ising {
            let spec = ising.get_ref();
            let j = match &spec.j {
                Couplings::One(j) => vec![*j],
                Couplings::Many(j) => j.clone(),
            };
            let u = Interaction::long_range_ising(&j, spec.h);
            parts.push(relabel(&u, &alphabet).map_err(|e| at(src, ising.span(), e.to_string()))?);
        }
        if let Some(iid) = &self.iid {
            parts.push(
                Interaction::iid_weights_on(alphabet.clone(), &iid.get_ref().p)
                    .map_err(|e| at(src, iid.span(), e.to_string()))?,
            );
        }
        if let Some(z) = &self.zero {
            parts.push(Interaction::zero(alphabet.clone()).map_err(|e| at(src, z.span(), e.to_string()))?);
        }

        let inferred = self
            .terms
            .iter()
            .flat_map(|t| t.get_ref().offsets.get_ref().iter().copied())
            .chain(parts.iter().map(|p| p.range() as i64))
            .max()
            .unwrap_or(0)
            .max(0) as usize;
        let range = match &self.range {
            Some(r) => {
                if let Some(p) = parts.iter().find(|p| p.range() > *r.get_ref()) {
                    return Err(at(
                        src,
                        r.span(),
                        format!("range {} is smaller than the range {} of a shorthand stanza", r.get_ref(), p.range()),
                    ));
                }
                *r.get_ref()
            }
            None => inferred,
        };

        let mut terms = Vec::with_capacity(self.terms.len());
        let shell = Interaction::new(alphabet.clone(), range, &[]).map_err(|e| at(src, 0..0, e.to_string()))?;
        for t in &self.terms {
            let term = term_from_spec(src, t.get_ref(), &alphabet, range)?;
            shell.validate_term(&term).map_err(|e| at(src, t.span(), e.to_string()))?;
            terms.push(term);
        }
        let mut u = Interaction::new(alphabet.clone(), range, &terms)?;
        for p in &parts {
            u = u.add(p)?;
        }
        if let Some(q) = self.scale {
            if !q.is_finite() {
                return Err(Error::ModelParse {
                    file: MODEL_FILE.into(),
                    line: 1,
                    msg: format!("scale {q} is not finite"),
                });
            }
            u = u.scale(q);
        }
        Ok(u)
    }
}

fn term_from_spec(src: &str, t: &TermSpec, alphabet: &Alphabet, range: usize) -> Result<Term> {
    let offsets = t.offsets.get_ref();
    let bad_offsets = |msg: String| at(src, t.offsets.span(), msg);
    if offsets.is_empty() {
        return Err(bad_offsets("term has an empty offset set".into()));
    }
    if let Some(o) = offsets.iter().find(|&&o| o < 0) {
        return Err(bad_offsets(format!("offset {o} is negative; offsets are anchored at 0")));
    }
    if offsets[0] != 0 {
        return Err(bad_offsets(format!("offset set {offsets:?} must contain 0 as its smallest element")));
    }
    if offsets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad_offsets(format!("offset set {offsets:?} must be strictly increasing")));
    }
    let last = *offsets.last().unwrap() as usize;
    if last > range {
        return Err(bad_offsets(format!("offset {last} exceeds the declared range {range}")));
    }
    let tokens = t.pattern.get_ref();
    if tokens.len() != offsets.len() {
        return Err(at(
            src,
            t.pattern.span(),
            format!("pattern has {} symbols but the offset set has {}", tokens.len(), offsets.len()),
        ));
    }
    let pattern = alphabet.encode(tokens).map_err(|e| at(src, t.pattern.span(), e.to_string()))?;
    let value = *t.value.get_ref();
    if !value.is_finite() {
        return Err(at(src, t.value.span(), format!("coupling value {value} is not finite")));
    }
    Ok(Term {
        offsets: offsets.iter().map(|&o| o as usize).collect(),
        pattern,
        value,
    })
}

/// Parses a model file. The interaction is named after `id`, or `fallback_id`.
pub fn parse_model(src: &str, fallback_id: &str) -> Result<Interaction> {
    let spec: ModelSpec = toml::from_str(src).map_err(|e| from_toml(src, e))?;
    let id = spec.id.clone().unwrap_or_else(|| fallback_id.to_string());
    Ok(spec.build(src)?.named(id))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "model".into(), |s| s.to_string_lossy().into_owned())
}

/// Reads a model file; the id defaults to the file stem. Parse errors
/// carry the path.
pub fn load_model(path: &Path) -> Result<Interaction> {
    let src = read(path)?;
    parse_model(&src, &stem(path)).map_err(|e| with_path(path, e))
}

fn with_path(path: &Path, e: Error) -> Error {
    match e {
        Error::ModelParse { line, msg, .. } => Error::ModelParse {
            file: path.display().to_string(),
            line,
            msg,
        },
        Error::Plan(msg) => Error::Plan(format!("{}: {msg}", path.display())),
        other => other,
    }
}

/// SHA-256 of the canonical rendering of the couplings, hex encoded.
pub fn model_digest(u: &Interaction) -> String {
    Sha256::digest(u.canonical_string().as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[derive(Debug, Deserialize)]
#[serde(untagged, expecting = "expected an integer offset or \"-half\" / \"+half\"")]
enum OffsetSpec {
    Int(i64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanSpec {
    name: Option<String>,
    mode: Spanned<String>,
    model: Option<Spanned<ModelSpec>>,
    model_path: Option<Spanned<String>>,
    model2: Option<Spanned<ModelSpec>>,
    model2_path: Option<Spanned<String>>,
    dirac_symbol: Option<Spanned<String>>,
    n: Spanned<Vec<usize>>,
    k: Option<Spanned<Vec<usize>>>,
    k_offsets: Option<Spanned<Vec<OffsetSpec>>>,
    k_growth: Option<Spanned<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    delta: Option<f64>,
    scans: Option<Spanned<Vec<String>>>,
}

fn plan_err(src: &str, span: Range<usize>, msg: impl std::fmt::Display) -> Error {
    Error::Plan(format!("line {}: {msg}", line_of(src, span.start)))
}

fn resolve_model(
    src: &str,
    inline: &Option<Spanned<ModelSpec>>,
    path: &Option<Spanned<String>>,
    base: &Path,
    key: &str,
) -> Result<Option<Interaction>> {
    match (inline, path) {
        (Some(_), Some(p)) => Err(plan_err(src, p.span(), format!("give either `{key}` or `{key}_path`, not both"))),
        (Some(spec), None) => Ok(Some(spec.get_ref().build(src)?.named(spec.get_ref().id.clone().unwrap_or_else(|| key.into())))),
        (None, Some(p)) => load_model(&base.join(p.get_ref())).map(Some),
        (None, None) => Ok(None),
    }
}

/// Parses a plan file. Relative model paths resolve against `base`.
///
/// ```toml
/// name = "regimes"
/// mode = "self"              # self | pair-same | pair-different | dirac
/// model_path = "zero.toml"   # or an inline [model] table
/// n = [1024, 16384]
/// k_offsets = ["-half", 0, "+half"]   # or k = [5, 6], or k_growth = 1.5
/// trials = 2000              # default: 2000 below 2^16, 200 from 2^16
/// seed = 7
/// scans = ["regime", "tightness"]
/// ```
pub fn parse_plan(src: &str, base: &Path) -> Result<ExperimentPlan> {
    let spec: PlanSpec = toml::from_str(src).map_err(|e| match from_toml(src, e) {
        Error::ModelParse { line, msg, .. } => Error::Plan(format!("line {line}: {msg}")),
        other => other,
    })?;
    let model = resolve_model(src, &spec.model, &spec.model_path, base, "model")?
        .ok_or_else(|| Error::Plan("plan needs `model` or `model_path`".into()))?;
    let model2 = resolve_model(src, &spec.model2, &spec.model2_path, base, "model2")?;

    let mode = match spec.mode.get_ref().as_str() {
        "self" => Mode::SelfMatch,
        "pair-same" => Mode::PairSame,
        "pair-different" => Mode::PairDifferent,
        "dirac" => {
            let sym = spec
                .dirac_symbol
                .as_ref()
                .ok_or_else(|| plan_err(src, spec.mode.span(), "dirac mode needs `dirac_symbol`"))?;
            let a = model
                .alphabet()
                .index_of(sym.get_ref())
                .ok_or_else(|| plan_err(src, sym.span(), format!("symbol {:?} is not in {}", sym.get_ref(), model.alphabet())))?;
            Mode::Dirac(a)
        }
        other => {
            return Err(plan_err(
                src,
                spec.mode.span(),
                format!("unknown mode {other:?} (expected self, pair-same, pair-different or dirac)"),
            ))
        }
    };

    let rules = [spec.k.is_some(), spec.k_offsets.is_some(), spec.k_growth.is_some()];
    if rules.iter().filter(|&&r| r).count() != 1 {
        return Err(Error::Plan("give exactly one of `k`, `k_offsets`, `k_growth`".into()));
    }
    let k_rule = if let Some(k) = &spec.k {
        KRule::Explicit(k.get_ref().clone())
    } else if let Some(o) = &spec.k_offsets {
        let offsets = o
            .get_ref()
            .iter()
            .map(|x| match x {
                OffsetSpec::Int(i) => Ok(Offset::whole(*i)),
                OffsetSpec::Text(s) => s.parse::<Offset>(),
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| plan_err(src, o.span(), e))?;
        KRule::Offsets(offsets)
    } else {
        KRule::Growth(*spec.k_growth.as_ref().unwrap().get_ref())
    };

    let scans = match &spec.scans {
        Some(s) => s
            .get_ref()
            .iter()
            .map(|x| x.parse::<Scan>())
            .collect::<Result<Vec<_>>>()
            .map_err(|e| plan_err(src, s.span(), e))?,
        None => vec![match mode {
            Mode::Dirac(_) => Scan::Counterexample,
            _ => Scan::Regime,
        }],
    };

    let plan = ExperimentPlan {
        name: spec.name.unwrap_or_else(|| "experiment".into()),
        mode,
        model,
        model2,
        n_grid: spec.n.get_ref().clone(),
        k_rule,
        trials: spec.trials,
        seed: spec.seed.unwrap_or(DEFAULT_SEED),
        delta: spec.delta.unwrap_or(0.05),
        scans,
    };
    plan.validate().map_err(|e| match e {
        Error::Plan(msg) => plan_err(src, spec.n.span(), msg),
        other => other,
    })?;
    Ok(plan)
}

pub fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let src = read(path)?;
    let base: PathBuf = path.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
    parse_plan(&src, &base).map_err(|e| with_path(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn explicit_terms() {
        let src = r#"
id = "nn"
alphabet = ["+1", "-1"]
range = 1

[[terms]]
offsets = [0, 1]
pattern = ["+1", "+1"]
value = 0.5

[[terms]]
offsets = [0, 1]
pattern = ["-1", "-1"]
value = 0.5

[[terms]]
offsets = [0, 1]
pattern = ["+1", "-1"]
value = -0.5

[[terms]]
offsets = [0, 1]
pattern = ["-1", "+1"]
value = -0.5
"#;
        let u = parse_model(src, "x").unwrap();
        assert_eq!(u.name(), "nn");
        assert_eq!(u, Interaction::ising(0.5, 0.0));
    }

    #[test]
    fn shorthand_stanzas() {
        assert_eq!(parse_model("[ising]\nj = 0.5\nh = 0.25\n", "m").unwrap(), Interaction::ising(0.5, 0.25));
        assert_eq!(
            parse_model("[ising]\nj = [0.5, -0.1]\n", "m").unwrap(),
            Interaction::long_range_ising(&[0.5, -0.1], 0.0)
        );
        assert_eq!(
            parse_model("[iid]\np = [0.8, 0.2]\n", "m").unwrap(),
            Interaction::iid_weights(&[0.8, 0.2]).unwrap()
        );
        let z = parse_model("[zero]\n", "zero").unwrap();
        assert_eq!(z, Interaction::zero(Alphabet::binary()).unwrap());
        assert_eq!(z.name(), "zero");
        let u = parse_model("alphabet = [\"0\", \"1\"]\n[iid]\np = [0.8, 0.2]\n", "m").unwrap();
        assert_eq!(u, Interaction::iid_weights_on(Alphabet::binary(), &[0.8, 0.2]).unwrap());
        let u = parse_model("scale = 2.0\n[ising]\nj = 0.5\n", "m").unwrap();
        assert_eq!(u, Interaction::ising(1.0, 0.0));
    }

    #[test]
    fn stanzas_and_terms_add() {
        let src = "alphabet = [\"+1\", \"-1\"]\n[ising]\nj = 0.3\n[[terms]]\noffsets = [0]\npattern = [\"+1\"]\nvalue = 0.1\n[[terms]]\noffsets = [0]\npattern = [\"-1\"]\nvalue = -0.1\n";
        assert_eq!(parse_model(src, "m").unwrap(), Interaction::ising(0.3, 0.1));
    }

    fn err_line(src: &str) -> (usize, String) {
        match parse_model(src, "m") {
            Err(Error::ModelParse { line, msg, .. }) => (line, msg),
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn offset_violations_are_line_numbered() {
        let head = "alphabet = [\"a\", \"b\"]\nrange = 2\n\n";
        let (line, msg) = err_line(&format!("{head}[[terms]]\noffsets = [1, 2]\npattern = [\"a\", \"a\"]\nvalue = 1.0\n"));
        assert_eq!(line, 5);
        assert!(msg.contains("smallest"), "{msg}");
        let (line, msg) = err_line(&format!(
            "{head}[[terms]]\noffsets = [0]\npattern = [\"a\"]\nvalue = 1.0\n\n[[terms]]\noffsets = [0, 3]\npattern = [\"a\", \"b\"]\nvalue = 1.0\n"
        ));
        assert_eq!(line, 10);
        assert!(msg.contains("range"), "{msg}");
        let (line, msg) = err_line(&format!("{head}[[terms]]\noffsets = [0, 2, 1]\npattern = [\"a\", \"a\", \"b\"]\nvalue = 1.0\n"));
        assert_eq!(line, 5);
        assert!(msg.contains("increasing"), "{msg}");
        let (_, msg) = err_line(&format!("{head}[[terms]]\noffsets = [0, -1]\npattern = [\"a\", \"a\"]\nvalue = 1.0\n"));
        assert!(msg.contains("negative"), "{msg}");
        let (line, msg) = err_line(&format!("{head}[[terms]]\noffsets = [0]\npattern = [\"c\"]\nvalue = 1.0\n"));
        assert_eq!(line, 6);
        assert!(msg.contains("\"c\""), "{msg}");
        let (line, msg) = err_line(&format!("{head}[[terms]]\noffsets = [0]\npattern = [\"a\"]\nvalue = nan\n"));
        assert_eq!(line, 7);
        assert!(msg.contains("finite"), "{msg}");
    }

    #[test]
    fn syntax_errors_are_line_numbered() {
        let (line, _) = err_line("alphabet = [\"a\", \"b\"]\nrange = \n");
        assert_eq!(line, 2);
        let (line, msg) = err_line("alphabet = [\"a\", \"b\"]\n\nbogus = 1\n");
        assert_eq!(line, 3);
        assert!(msg.contains("bogus"), "{msg}");
        let (_, msg) = err_line("[[terms]]\noffsets = [0]\npattern = [\"a\"]\nvalue = 1.0\n");
        assert!(msg.contains("alphabet"));
    }

    #[test]
    fn digest_is_structural() {
        let a = parse_model("[ising]\nj = 0.5\n", "a").unwrap();
        let b = Interaction::ising(0.5, 0.0);
        assert_eq!(model_digest(&a), model_digest(&b));
        assert_ne!(model_digest(&a), model_digest(&Interaction::ising(0.5, 0.1)));
        assert_eq!(model_digest(&a).len(), 64);
    }

    #[test]
    fn plans() {
        let src = r#"
name = "r"
mode = "self"
n = [1024, 4096]
k_offsets = ["-half", 0, "+2"]
seed = 9
scans = ["regime", "tightness"]

[model]
zero = {}
"#;
        let p = parse_plan(src, Path::new(".")).unwrap_err();
        assert!(p.to_string().contains("tightness"), "{p}");
        let src = src.replace("\"-half\", 0, \"+2\"", "-1, 0, 1");
        let p = parse_plan(&src, Path::new(".")).unwrap();
        assert_eq!(p.mode, Mode::SelfMatch);
        assert_eq!(p.seed, 9);
        assert_eq!(p.k_rule, KRule::Offsets(vec![Offset::whole(-1), Offset::ZERO, Offset::whole(1)]));
        assert_eq!(p.model, Interaction::zero(Alphabet::binary()).unwrap());

        let dirac = "mode = \"dirac\"\ndirac_symbol = \"1\"\nn = [1000, 10000]\nk_growth = 1.5\n[model]\nzero = {}\n";
        let p = parse_plan(dirac, Path::new(".")).unwrap();
        assert_eq!(p.mode, Mode::Dirac(1));
        assert_eq!(p.scans, [Scan::Counterexample]);

        let bad = "mode = \"dirac\"\ndirac_symbol = \"x\"\nn = [10]\nk = [2]\n[model]\nzero = {}\n";
        assert!(parse_plan(bad, Path::new(".")).unwrap_err().to_string().contains("line 2"));
        let bad = "mode = \"self\"\nn = [10]\n[model]\nzero = {}\n";
        assert!(parse_plan(bad, Path::new(".")).is_err());
        let bad = "mode = \"self\"\nn = [10]\nk = [2]\nmodel_path = \"/nonexistent/m.toml\"\n";
        assert!(matches!(parse_plan(bad, Path::new(".")), Err(Error::Io { .. })));
    }
}
