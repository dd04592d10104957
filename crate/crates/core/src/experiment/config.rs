//! Experiment configuration files.
//!
//! # Grammar
//!
//! ```text
//! file     := line*
//! line     := blank | comment | section | entry
//! comment  := ws* '#' any*
//! section  := ws* '[' name ']' ws*
//! entry    := ws* key ws* '=' ws* value ws* comment?
//! name,key := [a-z0-9_-]+
//! value    := grid | list | number | bool | word
//! grid     := 'linspace(' number ',' number ',' integer ')'
//!           | 'logspace(' integer ',' integer ',' integer ')'
//! list     := number (',' number)+
//! bool     := 'true' | 'false'
//! word     := [A-Za-z0-9_./-]+  or a double-quoted string
//! ```
//!
//! Entries before the first section belong to the top level, which holds only
//! `study`. Keys are unique within a section and unknown keys are rejected.
//! `logspace(e0, e1, k)` means `10^{e0 + j/k}` for `j = 0..=(e1-e0)k`.
//!
//! ```text
//! study = spectrum-scan
//!
//! [seeds]
//! base = 0
//! count = 1
//!
//! [study]
//! t = 1000
//! gamma = linspace(-2, 2, 201)
//! threshold = 1000
//!
//! [cocycle]
//! kind = diagonal-flow
//! rates = -1, 1
//! ```
//!
//! Sections: `[seeds]` (`base` and `count`, or `list`), `[study]` with the
//! per-study keys listed on [`StudyParams`], `[cocycle]` for the studies that
//! act on a linear cocycle, and `[output]` (`dir`, `svg`). Serialization writes
//! every field explicitly with shortest round-trip number formatting, so
//! `parse(render(c)) == c`.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cocycle::CocycleSpec;
use crate::error::{Error, Result};
use crate::numeric::{linspace, log_grid};
use crate::pitchfork::PitchforkParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    DensitySweep,
    Ftle,
    Attractivity,
    SpectrumScan,
    Conjugacy,
    Endpoints,
}

impl StudyKind {
    pub const ALL: [StudyKind; 6] = [
        StudyKind::DensitySweep,
        StudyKind::Ftle,
        StudyKind::Attractivity,
        StudyKind::SpectrumScan,
        StudyKind::Conjugacy,
        StudyKind::Endpoints,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StudyKind::DensitySweep => "density-sweep",
            StudyKind::Ftle => "ftle",
            StudyKind::Attractivity => "attractivity",
            StudyKind::SpectrumScan => "spectrum-scan",
            StudyKind::Conjugacy => "conjugacy",
            StudyKind::Endpoints => "endpoints",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        StudyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown study kind '{s}'")))
    }
}

/// A list of values, written either explicitly or as a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Grid {
    List(Vec<f64>),
    Linspace { lo: f64, hi: f64, n: usize },
    Logspace { lo_exp: i32, hi_exp: i32, per_decade: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Linspace { lo, hi, n } => linspace(*lo, *hi, *n),
            Grid::Logspace { lo_exp, hi_exp, per_decade } => log_grid(*lo_exp, *hi_exp, *per_decade),
        }
    }

    fn render(&self) -> String {
        match self {
            Grid::List(v) => render_list(v),
            Grid::Linspace { lo, hi, n } => format!("linspace({}, {}, {n})", num(*lo), num(*hi)),
            Grid::Logspace { lo_exp, hi_exp, per_decade } => format!("logspace({lo_exp}, {hi_exp}, {per_decade})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Seeds {
    Range { base: u64, count: usize },
    List(Vec<u64>),
}

impl Seeds {
    pub fn resolve(&self) -> Vec<u64> {
        match self {
            Seeds::Range { base, count } => (0..*count as u64).map(|i| base.wrapping_add(i)).collect(),
            Seeds::List(v) => v.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Seeds::Range { count, .. } => *count,
            Seeds::List(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Seeds moved by `k`, keeping the written form.
    pub fn offset(&self, k: u64) -> Seeds {
        match self {
            Seeds::Range { base, count } => Seeds::Range { base: base.wrapping_add(k), count: *count },
            Seeds::List(v) => Seeds::List(v.iter().map(|s| s.wrapping_add(k)).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CocycleModel {
    Pitchfork { alpha: f64, sigma: f64, dt: f64, tol: f64 },
    Constant { rate: f64 },
    DiagonalFlow { rates: Vec<f64> },
    MatrixFlow { dim: usize, entries: Vec<f64> },
    ScalarIid { multipliers: Vec<f64> },
    DiagonalIid { blocks: Vec<Vec<f64>> },
    MatrixIid { dim: usize, generators: Vec<Vec<f64>>, probs: Vec<f64> },
    RotationTower { n_max: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocycleConfig {
    pub model: CocycleModel,
    /// Growth-rate shift `c` applied as `e^{ct} Phi`.
    pub shift: Option<f64>,
}

impl CocycleConfig {
    pub fn build(&self) -> Result<CocycleSpec> {
        let square = |dim: usize, e: &[f64]| -> Result<DMatrix<f64>> {
            if e.len() != dim * dim {
                return Err(Error::Config(format!("expected {} entries for a {dim}x{dim} matrix, got {}", dim * dim, e.len())));
            }
            Ok(DMatrix::from_row_slice(dim, dim, e))
        };
        let spec = match &self.model {
            CocycleModel::Pitchfork { alpha, sigma, dt, tol } => {
                CocycleSpec::pitchfork(PitchforkParams::new(*alpha, *sigma)?, *dt, *tol)?
            }
            CocycleModel::Constant { rate } => CocycleSpec::constant_scalar(*rate),
            CocycleModel::DiagonalFlow { rates } => CocycleSpec::diagonal_flow(rates)?,
            CocycleModel::MatrixFlow { dim, entries } => CocycleSpec::matrix_flow(square(*dim, entries)?)?,
            CocycleModel::ScalarIid { multipliers } => CocycleSpec::scalar_iid(multipliers)?,
            CocycleModel::DiagonalIid { blocks } => CocycleSpec::diagonal_iid(blocks)?,
            CocycleModel::MatrixIid { dim, generators, probs } => {
                let g = generators.iter().map(|e| square(*dim, e)).collect::<Result<Vec<_>>>()?;
                CocycleSpec::matrix_iid(g, probs.clone())?
            }
            CocycleModel::RotationTower { n_max } => CocycleSpec::rotation_tower(*n_max)?,
        };
        Ok(match self.shift {
            Some(c) => spec.rescaled(c),
            None => spec,
        })
    }
}

/// Per-study parameters, read from the `[study]` section.
///
/// - density-sweep: `alpha`, `sigma` (grids), optional `x` for density profiles.
/// - ftle: `t`, `bins`; needs `[cocycle]`.
/// - attractivity: `alpha`, `sigma`, `dt`, `tol`, `delta`, `times`, optional `threshold`.
/// - spectrum-scan: `t`, `gamma`, `threshold`, `refine_levels`, `refine_factor`, `manifolds`; needs `[cocycle]`.
/// - conjugacy: `alpha`, `sigma`, `dt`, `tol`, `fp_tol`, `level`, `x` (positive half of the grid),
///   `tables` (how many per-seed tables to write), optional `probe` (|x| values for the uniformity probe).
/// - endpoints: `t` (increasing schedule); needs `[cocycle]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StudyParams {
    DensitySweep { alpha: Grid, sigma: Grid, x: Option<Grid> },
    Ftle { t: f64, bins: usize, cocycle: CocycleConfig },
    Attractivity { alpha: f64, sigma: f64, dt: f64, tol: f64, delta: f64, times: Grid, threshold: Option<f64> },
    SpectrumScan {
        t: f64,
        gamma: Grid,
        threshold: f64,
        refine_levels: u32,
        refine_factor: usize,
        manifolds: bool,
        cocycle: CocycleConfig,
    },
    Conjugacy {
        alpha: f64,
        sigma: f64,
        dt: f64,
        tol: f64,
        fp_tol: f64,
        level: f64,
        x: Grid,
        tables: usize,
        probe: Option<Grid>,
    },
    Endpoints { t: Grid, cocycle: CocycleConfig },
}

impl StudyParams {
    pub fn kind(&self) -> StudyKind {
        match self {
            StudyParams::DensitySweep { .. } => StudyKind::DensitySweep,
            StudyParams::Ftle { .. } => StudyKind::Ftle,
            StudyParams::Attractivity { .. } => StudyKind::Attractivity,
            StudyParams::SpectrumScan { .. } => StudyKind::SpectrumScan,
            StudyParams::Conjugacy { .. } => StudyKind::Conjugacy,
            StudyParams::Endpoints { .. } => StudyKind::Endpoints,
        }
    }

    pub fn cocycle(&self) -> Option<&CocycleConfig> {
        match self {
            StudyParams::Ftle { cocycle, .. } | StudyParams::SpectrumScan { cocycle, .. } | StudyParams::Endpoints { cocycle, .. } => {
                Some(cocycle)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputConfig {
    pub dir: Option<String>,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub params: StudyParams,
    pub seeds: Seeds,
    pub output: OutputConfig,
}

// ---------------------------------------------------------------- parsing

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

#[derive(Debug, Default)]
struct Document {
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

fn valid_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_' || c == '-')
}

fn strip_comment(line: &str) -> &str {
    let mut in_quotes = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => in_quotes = !in_quotes,
            '#' if !in_quotes => return &line[..i],
            _ => {}
        }
    }
    line
}

fn parse_document(text: &str) -> Result<Document> {
    let mut doc = Document::default();
    let mut current = String::new();
    doc.sections.insert(current.clone(), BTreeMap::new());
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| Error::Config(format!("line {line_no}: unterminated section header")))?
                .trim();
            if !valid_name(name) {
                return Err(Error::Config(format!("line {line_no}: invalid section name '{name}'")));
            }
            if doc.sections.contains_key(name) {
                return Err(Error::Config(format!("line {line_no}: duplicate section [{name}]")));
            }
            current = name.to_string();
            doc.sections.insert(current.clone(), BTreeMap::new());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line_no}: expected 'key = value'")))?;
        let (k, v) = (k.trim(), v.trim());
        if !valid_name(k) {
            return Err(Error::Config(format!("line {line_no}: invalid key '{k}'")));
        }
        if v.is_empty() {
            return Err(Error::Config(format!("line {line_no}: empty value for '{k}'")));
        }
        let section = doc.sections.get_mut(&current).expect("current section exists");
        if section.insert(k.to_string(), Entry { value: v.to_string(), line: line_no }).is_some() {
            return Err(Error::Config(format!("line {line_no}: duplicate key '{k}'")));
        }
    }
    Ok(doc)
}

/// Typed reader over one section that tracks consumed keys.
struct Section<'a> {
    name: &'a str,
    entries: BTreeMap<String, Entry>,
}

impl<'a> Section<'a> {
    fn take(doc: &mut Document, name: &'a str) -> Option<Self> {
        doc.sections.remove(name).map(|entries| Section { name, entries })
    }

    fn err(&self, e: &Entry, key: &str, msg: &str) -> Error {
        Error::Config(format!("line {}: [{}] {key}: {msg}", e.line, self.name))
    }

    fn raw(&mut self, key: &str) -> Option<Entry> {
        self.entries.remove(key)
    }

    fn missing(&self, key: &str) -> Error {
        Error::Config(format!("[{}] is missing '{key}'", self.name))
    }

    fn opt_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => {
                let v = parse_number(&e.value).ok_or_else(|| self.err(&e, key, "expected a number"))?;
                Ok(Some(v))
            }
        }
    }

    fn f64(&mut self, key: &str) -> Result<f64> {
        self.opt_f64(key)?.ok_or_else(|| self.missing(key))
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn opt_uint(&mut self, key: &str) -> Result<Option<u64>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => e.value.parse::<u64>().map(Some).map_err(|_| self.err(&e, key, "expected a non-negative integer")),
        }
    }

    fn uint_or(&mut self, key: &str, default: u64) -> Result<u64> {
        Ok(self.opt_uint(key)?.unwrap_or(default))
    }

    fn uint(&mut self, key: &str) -> Result<u64> {
        self.opt_uint(key)?.ok_or_else(|| self.missing(key))
    }

    fn bool_or(&mut self, key: &str, default: bool) -> Result<bool> {
        match self.raw(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(self.err(&e, key, "expected true or false")),
            },
        }
    }

    fn opt_word(&mut self, key: &str) -> Result<Option<String>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => parse_word(&e.value).map(Some).ok_or_else(|| self.err(&e, key, "expected a word or quoted string")),
        }
    }

    fn word(&mut self, key: &str) -> Result<String> {
        self.opt_word(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => parse_list(&e.value).map(Some).ok_or_else(|| self.err(&e, key, "expected a comma-separated list of numbers")),
        }
    }

    fn list(&mut self, key: &str) -> Result<Vec<f64>> {
        self.opt_list(key)?.ok_or_else(|| self.missing(key))
    }

    fn opt_grid(&mut self, key: &str) -> Result<Option<Grid>> {
        match self.raw(key) {
            None => Ok(None),
            Some(e) => parse_grid(&e.value).map(Some).ok_or_else(|| self.err(&e, key, "expected a list, linspace(...) or logspace(...)")),
        }
    }

    fn grid(&mut self, key: &str) -> Result<Grid> {
        self.opt_grid(key)?.ok_or_else(|| self.missing(key))
    }

    /// Keys `prefix1`, `prefix2`, ... in numeric order.
    fn numbered_lists(&mut self, prefix: &str) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        for i in 1.. {
            match self.opt_list(&format!("{prefix}{i}"))? {
                Some(v) => out.push(v),
                None => break,
            }
        }
        Ok(out)
    }

    fn finish(self) -> Result<()> {
        if let Some((k, e)) = self.entries.iter().next() {
            return Err(Error::Config(format!("line {}: unknown key '{k}' in [{}]", e.line, self.name)));
        }
        Ok(())
    }
}

fn parse_number(s: &str) -> Option<f64> {
    let v: f64 = s.trim().parse().ok()?;
    v.is_finite().then_some(v)
}

fn parse_list(s: &str) -> Option<Vec<f64>> {
    s.split(',').map(parse_number).collect()
}

fn parse_word(s: &str) -> Option<String> {
    if let Some(inner) = s.strip_prefix('"').and_then(|r| r.strip_suffix('"')) {
        return (!inner.contains('"')).then(|| inner.to_string());
    }
    s.chars()
        .all(|c| c.is_ascii_alphanumeric() || "_./-".contains(c))
        .then(|| s.to_string())
}

fn call_args<'s>(s: &'s str, name: &str) -> Option<Vec<&'s str>> {
    let inner = s.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

fn parse_grid(s: &str) -> Option<Grid> {
    if let Some(a) = call_args(s, "linspace") {
        if a.len() != 3 {
            return None;
        }
        return Some(Grid::Linspace { lo: parse_number(a[0])?, hi: parse_number(a[1])?, n: a[2].parse().ok()? });
    }
    if let Some(a) = call_args(s, "logspace") {
        if a.len() != 3 {
            return None;
        }
        return Some(Grid::Logspace { lo_exp: a[0].parse().ok()?, hi_exp: a[1].parse().ok()?, per_decade: a[2].parse().ok()? });
    }
    parse_list(s).map(Grid::List)
}

fn parse_seeds(doc: &mut Document) -> Result<Seeds> {
    let mut s = Section::take(doc, "seeds").ok_or_else(|| Error::Config("missing [seeds] section".into()))?;
    let seeds = match s.raw("list") {
        Some(e) => {
            let v = e
                .value
                .split(',')
                .map(|p| p.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| s.err(&e, "list", "expected comma-separated non-negative integers"))?;
            Seeds::List(v)
        }
        None => Seeds::Range { base: s.uint_or("base", 0)?, count: s.uint("count")? as usize },
    };
    s.finish()?;
    Ok(seeds)
}

fn parse_cocycle(doc: &mut Document) -> Result<CocycleConfig> {
    let mut s = Section::take(doc, "cocycle").ok_or_else(|| Error::Config("missing [cocycle] section".into()))?;
    let kind = s.word("kind")?;
    let model = match kind.as_str() {
        "pitchfork" => CocycleModel::Pitchfork {
            alpha: s.f64("alpha")?,
            sigma: s.f64("sigma")?,
            dt: s.f64_or("dt", 1e-3)?,
            tol: s.f64_or("tol", 1e-10)?,
        },
        "constant" => CocycleModel::Constant { rate: s.f64("rate")? },
        "diagonal-flow" => CocycleModel::DiagonalFlow { rates: s.list("rates")? },
        "matrix-flow" => CocycleModel::MatrixFlow { dim: s.uint("dim")? as usize, entries: s.list("entries")? },
        "scalar-iid" => CocycleModel::ScalarIid { multipliers: s.list("multipliers")? },
        "diagonal-iid" => CocycleModel::DiagonalIid { blocks: s.numbered_lists("block")? },
        "matrix-iid" => CocycleModel::MatrixIid {
            dim: s.uint("dim")? as usize,
            generators: s.numbered_lists("generator")?,
            probs: s.list("probs")?,
        },
        "rotation-tower" => CocycleModel::RotationTower {
            n_max: u32::try_from(s.uint("n_max")?).map_err(|_| Error::Config("[cocycle] n_max too large".into()))?,
        },
        other => return Err(Error::Config(format!("unknown cocycle kind '{other}'"))),
    };
    let shift = s.opt_f64("shift")?;
    s.finish()?;
    Ok(CocycleConfig { model, shift })
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = parse_document(text)?;
        let mut top = Section::take(&mut doc, "").expect("top level exists");
        let kind = StudyKind::parse(&top.word("study")?)?;
        top.finish()?;
        let seeds = parse_seeds(&mut doc)?;
        let mut s = Section::take(&mut doc, "study").ok_or_else(|| Error::Config("missing [study] section".into()))?;
        let params = match kind {
            StudyKind::DensitySweep => StudyParams::DensitySweep { alpha: s.grid("alpha")?, sigma: s.grid("sigma")?, x: s.opt_grid("x")? },
            StudyKind::Ftle => StudyParams::Ftle { t: s.f64("t")?, bins: s.uint_or("bins", 40)? as usize, cocycle: parse_cocycle(&mut doc)? },
            StudyKind::Attractivity => StudyParams::Attractivity {
                alpha: s.f64("alpha")?,
                sigma: s.f64("sigma")?,
                dt: s.f64_or("dt", 1e-3)?,
                tol: s.f64_or("tol", 1e-10)?,
                delta: s.f64("delta")?,
                times: s.grid("times")?,
                threshold: s.opt_f64("threshold")?,
            },
            StudyKind::SpectrumScan => StudyParams::SpectrumScan {
                t: s.f64("t")?,
                gamma: s.grid("gamma")?,
                threshold: s.f64_or("threshold", 1e3)?,
                refine_levels: s.uint_or("refine_levels", 3)? as u32,
                refine_factor: s.uint_or("refine_factor", 4)? as usize,
                manifolds: s.bool_or("manifolds", false)?,
                cocycle: parse_cocycle(&mut doc)?,
            },
            StudyKind::Conjugacy => StudyParams::Conjugacy {
                alpha: s.f64("alpha")?,
                sigma: s.f64("sigma")?,
                dt: s.f64_or("dt", 1e-3)?,
                tol: s.f64_or("tol", 1e-6)?,
                fp_tol: s.f64_or("fp_tol", 1e-12)?,
                level: s.f64_or("level", crate::conjugacy::DEFAULT_LEVEL)?,
                x: s.opt_grid("x")?.unwrap_or(Grid::Logspace { lo_exp: -3, hi_exp: 1, per_decade: 15 }),
                tables: s.uint_or("tables", 1)? as usize,
                probe: s.opt_grid("probe")?,
            },
            StudyKind::Endpoints => StudyParams::Endpoints { t: s.grid("t")?, cocycle: parse_cocycle(&mut doc)? },
        };
        s.finish()?;
        let output = match Section::take(&mut doc, "output") {
            Some(mut o) => {
                let out = OutputConfig { dir: o.opt_word("dir")?, svg: o.bool_or("svg", false)? };
                o.finish()?;
                out
            }
            None => OutputConfig::default(),
        };
        if let Some(name) = doc.sections.keys().next() {
            return Err(Error::Config(format!("unexpected section [{name}] for study {}", kind.name())));
        }
        let cfg = ExperimentConfig { params, seeds, output };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn kind(&self) -> StudyKind {
        self.params.kind()
    }

    /// Check tolerances, seeds and grids.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must be positive, got {v}")))
            }
        };
        let nonempty = |name: &str, g: &Grid| {
            let v = g.values();
            if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                Err(Error::Config(format!("{name} grid must be non-empty and finite")))
            } else {
                Ok(v)
            }
        };
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if let Some(c) = self.params.cocycle() {
            if let CocycleModel::Pitchfork { dt, tol, .. } = c.model {
                positive("cocycle dt", dt)?;
                positive("cocycle tol", tol)?;
            }
            c.build()?;
        }
        match &self.params {
            StudyParams::DensitySweep { alpha, sigma, x } => {
                nonempty("alpha", alpha)?;
                for s in nonempty("sigma", sigma)? {
                    positive("sigma", s)?;
                }
                if let Some(x) = x {
                    nonempty("x", x)?;
                }
            }
            StudyParams::Ftle { t, bins, .. } => {
                positive("t", *t)?;
                if *bins == 0 {
                    return Err(Error::Config("bins must be >= 1".into()));
                }
            }
            StudyParams::Attractivity { sigma, dt, tol, delta, times, threshold, .. } => {
                positive("sigma", *sigma)?;
                positive("dt", *dt)?;
                positive("tol", *tol)?;
                positive("delta", *delta)?;
                if let Some(th) = threshold {
                    positive("threshold", *th)?;
                }
                if nonempty("times", times)?.iter().any(|t| *t < 0.0) {
                    return Err(Error::Config("times must be >= 0".into()));
                }
            }
            StudyParams::SpectrumScan { t, gamma, threshold, refine_factor, .. } => {
                positive("t", *t)?;
                if !(*threshold > 1.0) {
                    return Err(Error::Config(format!("threshold must exceed 1, got {threshold}")));
                }
                if *refine_factor < 2 {
                    return Err(Error::Config("refine_factor must be >= 2".into()));
                }
                if nonempty("gamma", gamma)?.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("gamma grid must be increasing".into()));
                }
            }
            StudyParams::Conjugacy { sigma, dt, tol, fp_tol, level, x, probe, .. } => {
                positive("sigma", *sigma)?;
                positive("dt", *dt)?;
                positive("tol", *tol)?;
                positive("fp_tol", *fp_tol)?;
                positive("level", *level)?;
                for v in nonempty("x", x)? {
                    positive("x", v)?;
                }
                if let Some(p) = probe {
                    for v in nonempty("probe", p)? {
                        positive("probe", v)?;
                    }
                }
            }
            StudyParams::Endpoints { t, .. } => {
                let v = nonempty("t", t)?;
                if v.windows(2).any(|w| !(w[1] > w[0])) || v[0] <= 0.0 {
                    return Err(Error::Config("T schedule must be positive and increasing".into()));
                }
            }
        }
        Ok(())
    }

    /// Canonical text form; every field is written explicitly.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "study = {}", self.kind().name());
        out.push_str("\n[seeds]\n");
        match &self.seeds {
            Seeds::Range { base, count } => {
                let _ = writeln!(out, "base = {base}\ncount = {count}");
            }
            Seeds::List(v) => {
                let s: Vec<String> = v.iter().map(u64::to_string).collect();
                let _ = writeln!(out, "list = {}", s.join(", "));
            }
        }
        out.push_str("\n[study]\n");
        let kv = |out: &mut String, k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.params {
            StudyParams::DensitySweep { alpha, sigma, x } => {
                kv(&mut out, "alpha", alpha.render());
                kv(&mut out, "sigma", sigma.render());
                if let Some(x) = x {
                    kv(&mut out, "x", x.render());
                }
            }
            StudyParams::Ftle { t, bins, .. } => {
                kv(&mut out, "t", num(*t));
                kv(&mut out, "bins", bins.to_string());
            }
            StudyParams::Attractivity { alpha, sigma, dt, tol, delta, times, threshold } => {
                kv(&mut out, "alpha", num(*alpha));
                kv(&mut out, "sigma", num(*sigma));
                kv(&mut out, "dt", num(*dt));
                kv(&mut out, "tol", num(*tol));
                kv(&mut out, "delta", num(*delta));
                kv(&mut out, "times", times.render());
                if let Some(th) = threshold {
                    kv(&mut out, "threshold", num(*th));
                }
            }
            StudyParams::SpectrumScan { t, gamma, threshold, refine_levels, refine_factor, manifolds, .. } => {
                kv(&mut out, "t", num(*t));
                kv(&mut out, "gamma", gamma.render());
                kv(&mut out, "threshold", num(*threshold));
                kv(&mut out, "refine_levels", refine_levels.to_string());
                kv(&mut out, "refine_factor", refine_factor.to_string());
                kv(&mut out, "manifolds", manifolds.to_string());
            }
            StudyParams::Conjugacy { alpha, sigma, dt, tol, fp_tol, level, x, tables, probe } => {
                kv(&mut out, "alpha", num(*alpha));
                kv(&mut out, "sigma", num(*sigma));
                kv(&mut out, "dt", num(*dt));
                kv(&mut out, "tol", num(*tol));
                kv(&mut out, "fp_tol", num(*fp_tol));
                kv(&mut out, "level", num(*level));
                kv(&mut out, "x", x.render());
                kv(&mut out, "tables", tables.to_string());
                if let Some(p) = probe {
                    kv(&mut out, "probe", p.render());
                }
            }
            StudyParams::Endpoints { t, .. } => kv(&mut out, "t", t.render()),
        }
        if let Some(c) = self.params.cocycle() {
            out.push_str("\n[cocycle]\n");
            match &c.model {
                CocycleModel::Pitchfork { alpha, sigma, dt, tol } => {
                    kv(&mut out, "kind", "pitchfork".into());
                    kv(&mut out, "alpha", num(*alpha));
                    kv(&mut out, "sigma", num(*sigma));
                    kv(&mut out, "dt", num(*dt));
                    kv(&mut out, "tol", num(*tol));
                }
                CocycleModel::Constant { rate } => {
                    kv(&mut out, "kind", "constant".into());
                    kv(&mut out, "rate", num(*rate));
                }
                CocycleModel::DiagonalFlow { rates } => {
                    kv(&mut out, "kind", "diagonal-flow".into());
                    kv(&mut out, "rates", render_list(rates));
                }
                CocycleModel::MatrixFlow { dim, entries } => {
                    kv(&mut out, "kind", "matrix-flow".into());
                    kv(&mut out, "dim", dim.to_string());
                    kv(&mut out, "entries", render_list(entries));
                }
                CocycleModel::ScalarIid { multipliers } => {
                    kv(&mut out, "kind", "scalar-iid".into());
                    kv(&mut out, "multipliers", render_list(multipliers));
                }
                CocycleModel::DiagonalIid { blocks } => {
                    kv(&mut out, "kind", "diagonal-iid".into());
                    for (i, b) in blocks.iter().enumerate() {
                        kv(&mut out, &format!("block{}", i + 1), render_list(b));
                    }
                }
                CocycleModel::MatrixIid { dim, generators, probs } => {
                    kv(&mut out, "kind", "matrix-iid".into());
                    kv(&mut out, "dim", dim.to_string());
                    for (i, g) in generators.iter().enumerate() {
                        kv(&mut out, &format!("generator{}", i + 1), render_list(g));
                    }
                    kv(&mut out, "probs", render_list(probs));
                }
                CocycleModel::RotationTower { n_max } => {
                    kv(&mut out, "kind", "rotation-tower".into());
                    kv(&mut out, "n_max", n_max.to_string());
                }
            }
            if let Some(c) = c.shift {
                kv(&mut out, "shift", num(c));
            }
        }
        if self.output != OutputConfig::default() {
            out.push_str("\n[output]\n");
            if let Some(d) = &self.output.dir {
                kv(&mut out, "dir", render_word(d));
            }
            kv(&mut out, "svg", self.output.svg.to_string());
        }
        out
    }
}

/// Shortest text that parses back to the same `f64`.
fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Lists always carry a comma so a one-element list is not read as a scalar elsewhere.
fn render_list(v: &[f64]) -> String {
    let s: Vec<String> = v.iter().map(|x| num(*x)).collect();
    s.join(", ")
}

fn render_word(s: &str) -> String {
    if s.chars().all(|c| c.is_ascii_alphanumeric() || "_./-".contains(c)) && !s.is_empty() {
        s.to_string()
    } else {
        format!("\"{s}\"")
    }
}
