//! Dispatch of a configuration to its study and persistence of the results.
//!
//! A run produces a numeric payload (JSON), CSV tables and an envelope that
//! adds the configuration hash, schema version and wall-clock metadata. The
//! payload and the tables depend only on the configuration, never on the
//! worker count or the clock, and are written to separate files so that
//! reruns can be compared byte for byte.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, StudyKind, StudyParams};
use super::plotdata::emit_plotdata;
use crate::cocycle::{ftle_ensemble, MaxGrowth, OnestepReport};
use crate::conjugacy::{conjugacy_for_seed, delta_gate, symmetric_grid, uniformity_probe, ConjugacySettings};
use crate::ensemble::{map_seeds, Workers};
use crate::error::{Error, Result};
use crate::numeric::{fmt17, mean, wilson_interval};
use crate::pitchfork::{uniform_attractivity_probe, EnsembleSettings, PitchforkParams};
use crate::spectrum::{estimate_endpoints, scan_spectrum, spectral_manifolds, EndpointKind, ScanSettings, Verdict};
use crate::stationary::{stationary_density, sweep, sweep_csv};

/// Bumped on any change to the payload layout.
pub const SCHEMA_VERSION: u32 = 1;

pub const PAYLOAD_FILE: &str = "payload.json";
pub const ENVELOPE_FILE: &str = "envelope.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    /// Estimation finished but some verdict or diagnostic is inconclusive.
    Inconclusive,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => 0,
            RunStatus::Inconclusive => 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Everything a study computes, before anything touches the file system.
#[derive(Debug, Clone)]
pub struct StudyOutput {
    pub payload: Value,
    pub artifacts: Vec<Artifact>,
    pub status: RunStatus,
    pub diagnostics: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMeta {
    pub started_unix_ms: u128,
    pub elapsed_ms: u128,
    pub workers: usize,
    pub package_version: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultEnvelope {
    pub version: u32,
    pub study: StudyKind,
    pub config_hash: String,
    pub config: String,
    pub status: RunStatus,
    pub diagnostics: Vec<String>,
    pub artifacts: Vec<String>,
    pub meta: RunMeta,
    pub payload: Value,
}

/// SHA-256 of the canonical configuration text.
pub fn config_hash(config: &ExperimentConfig) -> String {
    let digest = Sha256::digest(config.render().as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// JSON number, with non-finite values spelled out as strings.
pub fn jnum(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn jvec(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| jnum(*x)).collect())
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact { name: name.to_string(), contents }
}

fn growth_json(g: &MaxGrowth) -> Value {
    json!({
        "slope": jnum(g.slope),
        "diverging": g.diverging,
        "levels": g.levels.iter().map(|(n, m)| json!([n, jnum(*m)])).collect::<Vec<_>>(),
    })
}

fn onestep_json(o: &OnestepReport) -> Value {
    json!({
        "n": o.n,
        "max_plus": jnum(o.max_plus),
        "max_minus": jnum(o.max_minus),
        "growth_plus": growth_json(&o.growth_plus),
        "growth_minus": growth_json(&o.growth_minus),
        "unbounded_above": o.unbounded_above(),
        "unbounded_below": o.unbounded_below(),
    })
}

fn histogram(values: &[f64], bins: usize) -> (Vec<f64>, Vec<usize>) {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(lo.is_finite() && hi.is_finite()) {
        return (vec![], vec![]);
    }
    let width = if hi > lo { (hi - lo) / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for v in values {
        let b = (((v - lo) / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let centers = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    (centers, counts)
}

fn kind_name(k: EndpointKind) -> &'static str {
    match k {
        EndpointKind::Grid => "grid",
        EndpointKind::Unbounded => "unbounded",
        EndpointKind::BeyondGrid => "beyond-grid",
        EndpointKind::RankJump => "rank-jump",
    }
}

/// Run the study described by `config`. Results do not depend on `workers`.
pub fn execute(config: &ExperimentConfig, workers: Workers) -> Result<StudyOutput> {
    config.validate()?;
    let seeds = config.seeds.resolve();
    let mut diagnostics = Vec::new();
    let mut status = RunStatus::Ok;
    let (payload, artifacts) = match &config.params {
        StudyParams::DensitySweep { alpha, sigma, x } => {
            let rows = sweep(&alpha.values(), &sigma.values())?;
            let mut artifacts = vec![artifact("sweep.csv", sweep_csv(&rows))];
            if let Some(x) = x {
                let xs = x.values();
                let mut csv = String::from("alpha,sigma,x,p\n");
                for r in &rows {
                    let d = stationary_density(PitchforkParams::new(r.alpha, r.sigma)?, &xs)?;
                    for (xv, p) in d.x.iter().zip(&d.p) {
                        csv.push_str(&format!("{},{},{},{}\n", fmt17(r.alpha), fmt17(r.sigma), fmt17(*xv), fmt17(*p)));
                    }
                }
                artifacts.push(artifact("density.csv", csv));
            }
            let max_disc = rows.iter().map(|r| r.discrepancy).fold(0.0, f64::max);
            let payload = json!({
                "rows": rows.iter().map(|r| json!({
                    "alpha": jnum(r.alpha),
                    "sigma": jnum(r.sigma),
                    "ex2": jnum(r.ex2),
                    "lambda": jnum(r.lambda),
                    "lambda_integral": jnum(r.lambda_integral),
                    "discrepancy": jnum(r.discrepancy),
                })).collect::<Vec<_>>(),
                "max_discrepancy": jnum(max_disc),
                "all_negative": rows.iter().all(|r| r.lambda < 0.0),
            });
            (payload, artifacts)
        }
        StudyParams::Ftle { t, bins, cocycle } => {
            let spec = cocycle.build()?;
            let ens = ftle_ensemble(&spec, *t, &seeds, workers)?;
            let (k, frac) = ens.fraction_lmax_above(0.0);
            let (ci_lo, ci_hi) = wilson_interval(k, ens.lmax.len(), 1.96);
            let (centers, counts) = histogram(&ens.lmax, *bins);
            let payload = json!({
                "cocycle": spec.describe(),
                "t": jnum(*t),
                "n": ens.lmax.len(),
                "max_lmax": jnum(ens.max_lmax()),
                "min_lmin": jnum(ens.min_lmin()),
                "mean_lmax": jnum(mean(&ens.lmax)),
                "positive_count": k,
                "positive_fraction": jnum(frac),
                "positive_fraction_ci95": [jnum(ci_lo), jnum(ci_hi)],
                "histogram": {"bin_center": jvec(&centers), "count": counts},
                "seeds": seeds,
                "lmax": jvec(&ens.lmax),
                "lmin": jvec(&ens.lmin),
            });
            (payload, vec![artifact("ftle.csv", ens.to_csv())])
        }
        StudyParams::Attractivity { alpha, sigma, dt, tol, delta, times, threshold } => {
            let params = PitchforkParams::new(*alpha, *sigma)?;
            let times = times.values();
            let table = uniform_attractivity_probe(params, &seeds, *delta, &times, EnsembleSettings { dt: *dt, tol: *tol, workers })?;
            let reference: Option<Vec<f64>> = (*alpha < 0.0).then(|| times.iter().map(|t| delta * (alpha * t).exp()).collect());
            let threshold = threshold.or((*alpha > 0.0).then(|| alpha.sqrt() / 4.0));
            let above: Option<Vec<Value>> = threshold.map(|th| {
                (0..times.len())
                    .map(|j| {
                        let f = table.fraction_above(j, th);
                        let k = (f * seeds.len() as f64).round() as usize;
                        let (lo, hi) = wilson_interval(k, seeds.len(), 1.96);
                        json!({"fraction": jnum(f), "ci95": [jnum(lo), jnum(hi)]})
                    })
                    .collect()
            });
            let violations = reference
                .as_ref()
                .map(|r| table.sup.iter().zip(r).filter(|(s, r)| s > r).count())
                .unwrap_or(0);
            let payload = json!({
                "alpha": jnum(*alpha),
                "sigma": jnum(*sigma),
                "delta": jnum(*delta),
                "n": seeds.len(),
                "t": jvec(&times),
                "S": jvec(&table.sup),
                "reference": reference.as_deref().map(jvec).unwrap_or(Value::Null),
                "reference_violations": violations,
                "threshold": threshold.map(jnum).unwrap_or(Value::Null),
                "above_threshold": above.map(Value::Array).unwrap_or(Value::Null),
            });
            (payload, vec![artifact("decay.csv", table.to_csv())])
        }
        StudyParams::SpectrumScan { t, gamma, threshold, refine_levels, refine_factor, manifolds, cocycle } => {
            let spec = cocycle.build()?;
            let mut settings = ScanSettings::new(*t, seeds.clone(), *threshold).with_workers(workers);
            settings.refine_levels = *refine_levels;
            settings.refine_factor = *refine_factor;
            let est = scan_spectrum(&spec, &gamma.values(), &settings)?;
            if !est.is_consistent() {
                status = RunStatus::Inconclusive;
                diagnostics.extend(est.failures.iter().cloned());
            }
            let manifold_json = if *manifolds && !est.intervals.is_empty() {
                match spectral_manifolds(&spec, &est, crate::cocycle::Omega::new(seeds[0]), *t) {
                    Ok(m) => {
                        if m.inconclusive {
                            status = RunStatus::Inconclusive;
                            diagnostics.push("spectral manifold intersection is ill-conditioned".into());
                        }
                        json!({
                            "seed": seeds[0],
                            "dims": m.dims(),
                            "stability": jvec(&m.stability),
                            "bases": m.bases.iter().map(|b| {
                                (0..b.ncols()).map(|j| jvec(b.column(j).as_slice())).collect::<Vec<_>>()
                            }).collect::<Vec<_>>(),
                        })
                    }
                    Err(e) => {
                        status = RunStatus::Inconclusive;
                        diagnostics.push(format!("manifolds: {e}"));
                        Value::Null
                    }
                }
            } else {
                Value::Null
            };
            let verdict = |v: Verdict| match v {
                Verdict::Dichotomy => "dichotomy",
                Verdict::NoDichotomy => "no-dichotomy",
                Verdict::Inconclusive => "inconclusive",
            };
            let payload = json!({
                "cocycle": spec.describe(),
                "t": jnum(est.t),
                "n": est.n,
                "ratio_threshold": jnum(est.ratio_threshold),
                "refine_levels": est.refine_levels,
                "refine_factor": est.refine_factor,
                "unbounded_above": est.unbounded_above,
                "unbounded_below": est.unbounded_below,
                "intervals": est.intervals.iter().map(|i| json!({
                    "lower": jnum(i.lower),
                    "upper": jnum(i.upper),
                    "lower_kind": kind_name(i.lower_kind),
                    "upper_kind": kind_name(i.upper_kind),
                    "inconclusive_points": i.inconclusive_points,
                })).collect::<Vec<_>>(),
                "gap_ranks": est.gap_ranks,
                "failures": est.failures,
                "points": est.points.iter().map(|p| json!({
                    "gamma": jnum(p.gamma),
                    "verdict": verdict(p.verdict),
                    "rank": p.rank,
                    "min_log_gap": jnum(p.min_log_gap),
                    "k": jnum(p.k_fit),
                    "alpha": jnum(p.alpha_fit),
                    "residual": jnum(p.residual),
                })).collect::<Vec<_>>(),
                "manifolds": manifold_json,
            });
            (payload, vec![artifact("gamma_gap.csv", est.gap_csv())])
        }
        StudyParams::Conjugacy { alpha, sigma, dt, tol, fp_tol, level, x, tables, probe } => {
            let params = PitchforkParams::new(*alpha, *sigma)?;
            let gate = delta_gate(params)?;
            let settings = ConjugacySettings { dt: *dt, tol: *tol, fp_tol: *fp_tol, level: *level, ..Default::default() };
            let grid = symmetric_grid(&x.values());
            let results = map_seeds(&seeds, workers, |seed| conjugacy_for_seed(params, seed, &grid, settings))?;
            let mut artifacts = Vec::new();
            for t in results.iter().take(*tables) {
                artifacts.push(artifact(&format!("conjugacy_seed{}.csv", t.seed), t.to_csv()));
            }
            let unresolved: usize = results.iter().map(|t| t.unresolved).sum();
            let monotone = results.iter().all(|t| t.is_strictly_increasing() && t.signs_consistent());
            if unresolved > 0 {
                status = RunStatus::Inconclusive;
                diagnostics.push(format!("{unresolved} grid points have no root at level {level}"));
            }
            if !monotone {
                status = RunStatus::Inconclusive;
                diagnostics.push("a conjugacy table is not strictly increasing".into());
            }
            let probe_json = match probe {
                Some(p) => {
                    let u = uniformity_probe(params, &seeds, &p.values(), settings, workers)?;
                    artifacts.push(artifact("uniformity.csv", u.to_csv()));
                    json!({
                        "x_abs": jvec(&u.x_abs),
                        "max_g": jvec(&u.max_g),
                        "max_g_quarter": jvec(&u.max_g_quarter),
                        "growth_ratio": jvec(&u.growth_ratio()),
                        "unresolved": u.unresolved,
                    })
                }
                None => Value::Null,
            };
            let first = &results[0];
            let payload = json!({
                "alpha": jnum(*alpha),
                "sigma": jnum(*sigma),
                "ex2": jnum(gate.ex2),
                "delta": jnum(gate.delta),
                "level": jnum(*level),
                "shifts": jvec(&first.shifts),
                "max_rho": jnum(results.iter().map(|t| t.max_rho()).fold(0.0, f64::max)),
                "max_r_defect": jnum(results.iter().map(|t| t.max_r_defect()).fold(0.0, f64::max)),
                "unresolved": unresolved,
                "monotone": monotone,
                "realizations": results.iter().map(|t| json!({
                    "seed": t.seed,
                    "onset": jnum(t.onset),
                    "max_rho": jnum(t.max_rho()),
                    "max_r_defect": jnum(t.max_r_defect()),
                    "unresolved": t.unresolved,
                    "monotone": t.is_strictly_increasing(),
                })).collect::<Vec<_>>(),
                "first_table": {"seed": first.seed, "x": jvec(&first.x), "r": jvec(&first.r), "g": jvec(&first.g)},
                "probe": probe_json,
            });
            (payload, artifacts)
        }
        StudyParams::Endpoints { t, cocycle } => {
            let spec = cocycle.build()?;
            let est = estimate_endpoints(&spec, &t.values(), &seeds, workers)?;
            if !est.subadditive || !est.superadditive_min {
                status = RunStatus::Inconclusive;
                diagnostics.push("extremal growth is not sub-/superadditive within two standard errors".into());
            }
            let payload = json!({
                "cocycle": spec.describe(),
                "n": est.n,
                "rows": est.rows.iter().map(|r| json!({
                    "t": jnum(r.t),
                    "sup": jnum(r.max_lmax),
                    "inf": jnum(r.min_lmin),
                    "se_sup": jnum(r.se_max),
                    "se_inf": jnum(r.se_min),
                })).collect::<Vec<_>>(),
                "sup": jnum(est.sup),
                "inf": jnum(est.inf),
                "unbounded_above": est.unbounded_above,
                "unbounded_below": est.unbounded_below,
                "subadditive": est.subadditive,
                "superadditive_min": est.superadditive_min,
                "onestep": onestep_json(&est.onestep),
            });
            (payload, vec![artifact("endpoints.csv", est.to_csv()), artifact("onestep.csv", est.onestep.to_csv())])
        }
    };
    validate_payload(config.kind(), &payload)?;
    Ok(StudyOutput { payload, artifacts, status, diagnostics })
}

fn require(payload: &Value, keys: &[(&str, fn(&Value) -> bool)], kind: StudyKind) -> Result<()> {
    for (k, check) in keys {
        match payload.get(*k) {
            Some(v) if check(v) => {}
            Some(_) => return Err(Error::Config(format!("{} payload: field '{k}' has the wrong type", kind.name()))),
            None => return Err(Error::Config(format!("{} payload: missing field '{k}'", kind.name()))),
        }
    }
    Ok(())
}

fn is_num(v: &Value) -> bool {
    v.is_number() || matches!(v.as_str(), Some("inf" | "-inf" | "nan"))
}

fn is_num_array(v: &Value) -> bool {
    v.as_array().map(|a| a.iter().all(is_num)).unwrap_or(false)
}

fn is_array(v: &Value) -> bool {
    v.is_array()
}

fn is_bool(v: &Value) -> bool {
    v.is_boolean()
}

fn is_count(v: &Value) -> bool {
    v.is_u64()
}

/// Check the payload of `kind` against its schema.
pub fn validate_payload(kind: StudyKind, payload: &Value) -> Result<()> {
    match kind {
        StudyKind::DensitySweep => {
            require(payload, &[("rows", is_array), ("max_discrepancy", is_num), ("all_negative", is_bool)], kind)?;
            for row in payload["rows"].as_array().expect("checked") {
                require(row, &[("alpha", is_num), ("sigma", is_num), ("ex2", is_num), ("lambda", is_num)], kind)?;
            }
            Ok(())
        }
        StudyKind::Ftle => require(
            payload,
            &[("t", is_num), ("n", is_count), ("max_lmax", is_num), ("positive_fraction", is_num), ("lmax", is_num_array), ("lmin", is_num_array), ("histogram", Value::is_object)],
            kind,
        ),
        StudyKind::Attractivity => require(payload, &[("t", is_num_array), ("S", is_num_array), ("delta", is_num), ("alpha", is_num), ("n", is_count)], kind),
        StudyKind::SpectrumScan => {
            require(payload, &[("intervals", is_array), ("points", is_array), ("gap_ranks", is_array), ("failures", is_array), ("t", is_num)], kind)?;
            for p in payload["points"].as_array().expect("checked") {
                require(p, &[("gamma", is_num), ("min_log_gap", is_num)], kind)?;
            }
            for i in payload["intervals"].as_array().expect("checked") {
                require(i, &[("lower", is_num), ("upper", is_num)], kind)?;
            }
            Ok(())
        }
        StudyKind::Conjugacy => require(
            payload,
            &[("ex2", is_num), ("delta", is_num), ("max_rho", is_num), ("unresolved", is_count), ("monotone", is_bool), ("realizations", is_array), ("first_table", Value::is_object)],
            kind,
        ),
        StudyKind::Endpoints => require(payload, &[("rows", is_array), ("sup", is_num), ("inf", is_num), ("onestep", Value::is_object)], kind),
    }
}

/// Output directory: explicit override, then `STOSPEC_OUT`, then the config, then `./out`.
pub fn resolve_out_dir(config: &ExperimentConfig, cli: Option<&Path>) -> PathBuf {
    if let Some(p) = cli {
        return p.to_path_buf();
    }
    if let Ok(env) = std::env::var("STOSPEC_OUT") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    config.output.dir.as_deref().map(PathBuf::from).unwrap_or_else(|| PathBuf::from("out"))
}

/// Execute and write payload, tables, plot data and the envelope into `out_dir`.
pub fn run(config: &ExperimentConfig, workers: Workers, out_dir: &Path) -> Result<ResultEnvelope> {
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    let clock = Instant::now();
    let output = execute(config, workers)?;
    fs::create_dir_all(out_dir)?;
    let payload_text = serde_json::to_string_pretty(&output.payload)? + "\n";
    fs::write(out_dir.join(PAYLOAD_FILE), payload_text)?;
    let mut names = vec![PAYLOAD_FILE.to_string()];
    for a in &output.artifacts {
        fs::write(out_dir.join(&a.name), &a.contents)?;
        names.push(a.name.clone());
    }
    let mut envelope = ResultEnvelope {
        version: SCHEMA_VERSION,
        study: config.kind(),
        config_hash: config_hash(config),
        config: config.render(),
        status: output.status,
        diagnostics: output.diagnostics,
        artifacts: names,
        meta: RunMeta { started_unix_ms: started, elapsed_ms: 0, workers: workers.0, package_version: env!("CARGO_PKG_VERSION").to_string() },
        payload: output.payload,
    };
    for p in emit_plotdata(&envelope, config.kind(), out_dir, config.output.svg)? {
        envelope.artifacts.push(p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
    }
    envelope.meta.elapsed_ms = clock.elapsed().as_millis();
    fs::write(out_dir.join(ENVELOPE_FILE), serde_json::to_string_pretty(&envelope)? + "\n")?;
    Ok(envelope)
}

/// Read back an envelope and validate its payload.
pub fn load_envelope(path: &Path) -> Result<ResultEnvelope> {
    let env: ResultEnvelope = serde_json::from_str(&fs::read_to_string(path)?)?;
    if env.version != SCHEMA_VERSION {
        return Err(Error::Config(format!("envelope version {} differs from {SCHEMA_VERSION}", env.version)));
    }
    validate_payload(env.study, &env.payload)?;
    Ok(env)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        ExperimentConfig::parse(text).unwrap()
    }

    #[test]
    fn density_sweep_rows_and_files() {
        let c = cfg("study = density-sweep\n[seeds]\ncount = 1\n[study]\nalpha = linspace(-2, 2, 21)\nsigma = 1\nx = linspace(-3, 3, 7)\n");
        let dir = tempfile::tempdir().unwrap();
        let env = run(&c, Workers(1), dir.path()).unwrap();
        assert_eq!(env.payload["rows"].as_array().unwrap().len(), 21);
        assert_eq!(env.payload["all_negative"], json!(true));
        assert_eq!(env.status, RunStatus::Ok);
        let back = load_envelope(&dir.path().join(ENVELOPE_FILE)).unwrap();
        assert_eq!(back.config_hash, config_hash(&c));
        assert_eq!(fs::read_to_string(dir.path().join("sweep.csv")).unwrap().lines().count(), 22);
        assert_eq!(fs::read_to_string(dir.path().join("density.csv")).unwrap().lines().count(), 21 * 7 + 1);
        assert!(dir.path().join("lambda.dat").exists());
    }

    #[test]
    fn payload_is_independent_of_workers() {
        let c = cfg("study = ftle\n[seeds]\ncount = 24\n[study]\nt = 8\n[cocycle]\nkind = diagonal-iid\nblock1 = 2, 0.5\nblock2 = 8, 4\n");
        let a = execute(&c, Workers(1)).unwrap();
        let b = execute(&c, Workers(4)).unwrap();
        assert_eq!(serde_json::to_string(&a.payload).unwrap(), serde_json::to_string(&b.payload).unwrap());
        assert_eq!(a.artifacts[0].contents, b.artifacts[0].contents);
    }

    #[test]
    fn spectrum_scan_and_schema_checks() {
        let c = cfg("study = spectrum-scan\n[seeds]\ncount = 1\n[study]\nt = 200\ngamma = linspace(-2, 2, 41)\nmanifolds = true\n[cocycle]\nkind = diagonal-flow\nrates = -1, 1\n");
        let out = execute(&c, Workers(1)).unwrap();
        assert_eq!(out.status, RunStatus::Ok);
        assert_eq!(out.payload["intervals"].as_array().unwrap().len(), 2);
        assert_eq!(out.payload["manifolds"]["dims"], json!([1, 1]));
        assert!(validate_payload(StudyKind::Ftle, &out.payload).is_err());
        let mut broken = out.payload.clone();
        broken["points"] = json!([{"gamma": "x"}]);
        assert!(validate_payload(StudyKind::SpectrumScan, &broken).is_err());
    }

    #[test]
    fn nonfinite_numbers_are_spelled_out() {
        assert_eq!(jnum(f64::INFINITY), json!("inf"));
        assert_eq!(jnum(f64::NEG_INFINITY), json!("-inf"));
        assert_eq!(jnum(f64::NAN), json!("nan"));
        assert_eq!(jnum(0.5), json!(0.5));
    }

    #[test]
    fn conjugacy_gate_is_an_error() {
        let c = cfg("study = conjugacy\n[seeds]\ncount = 1\n[study]\nalpha = 0.5\nsigma = 1\n");
        assert!(matches!(execute(&c, Workers(1)), Err(Error::OutsideDeltaWindow { .. })));
    }

    #[test]
    fn histogram_counts_everything() {
        let (c, n) = histogram(&[0.0, 0.1, 0.5, 1.0], 4);
        assert_eq!(n.iter().sum::<usize>(), 4);
        assert_eq!(c.len(), 4);
        assert_eq!(n[3], 1);
    }
}
