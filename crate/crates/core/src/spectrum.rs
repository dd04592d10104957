//! Dichotomy spectrum estimation from finite-time singular values.
//!
//! For a growth rate `gamma` and horizon `T`, the log singular values of
//! `e^{-gamma T} Phi(T, omega)` are `mu_i = l_i - gamma T`. The projector rank
//! `k` is the number of `mu_i < 0`. The splitting margin of one realization is
//! the distance of the nearest `mu_i` from zero on either side,
//!
//! ```text
//! m(omega, t) = min( min_{i <= k} -mu_i(t), min_{i > k} mu_i(t) ),
//! ```
//!
//! with the `k` smallest values on the contracting side. A dichotomy is
//! accepted when the rank is the same for every sampled `omega`, the worst
//! margin at `T` exceeds `ln(threshold)`, and the worst margin grows by at least
//! half that amount from `T/2` to `T`. The constants `(K, alpha)` come from a
//! least-squares fit of `m(t) ~ alpha t - ln K` over the checkpoints.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cocycle::{evaluate, log_sv_profiles, onestep_log_norms, CocycleSpec, Omega, OnestepReport};
use crate::ensemble::{map_seeds, Workers};
use crate::error::{Error, Result};
use crate::linalg::{intersect, principal_angles};
use crate::numeric::{fmt17, mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Dichotomy,
    NoDichotomy,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DichotomyVerdict {
    pub gamma: f64,
    pub verdict: Verdict,
    /// Common projector rank, `None` when it differs across the ensemble.
    pub rank: Option<usize>,
    pub rank_min: usize,
    pub rank_max: usize,
    /// Worst splitting margin over the ensemble at `T` and at `T/2`.
    pub min_log_gap: f64,
    pub min_log_gap_half: f64,
    pub k_fit: f64,
    pub alpha_fit: f64,
    pub residual: f64,
}

impl DichotomyVerdict {
    pub fn is_resolvent(&self) -> bool {
        self.verdict == Verdict::Dichotomy
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScanSettings {
    pub t: f64,
    pub seeds: Vec<u64>,
    pub ratio_threshold: f64,
    pub refine_levels: u32,
    pub refine_factor: usize,
    #[serde(skip)]
    pub workers: Workers,
}

impl ScanSettings {
    pub fn new(t: f64, seeds: Vec<u64>, ratio_threshold: f64) -> Self {
        ScanSettings { t, seeds, ratio_threshold, refine_levels: 3, refine_factor: 4, workers: Workers(1) }
    }

    pub fn with_workers(mut self, workers: Workers) -> Self {
        self.workers = workers;
        self
    }
}

/// Log singular values at the checkpoints `jT/8`, shared by every `gamma`.
#[derive(Debug, Clone)]
pub struct Profiles {
    pub schedule: Vec<f64>,
    /// Index of `T/2` in `schedule`.
    pub half: usize,
    /// `data[seed][checkpoint][i]`, singular values descending.
    pub data: Vec<Vec<Vec<f64>>>,
}

fn snap(t: f64, step: f64) -> f64 {
    if step > 0.0 {
        ((t / step).round() * step).max(step)
    } else {
        t
    }
}

/// Checkpoint schedule `jT/8`, snapped to the time step of the cocycle.
pub fn checkpoint_schedule(spec: &CocycleSpec, t: f64) -> (Vec<f64>, usize) {
    let step = spec.time_step();
    let mut s: Vec<f64> = (1..=8).map(|j| snap(j as f64 * t / 8.0, step)).collect();
    s.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let half = snap(t / 2.0, step);
    let idx = s.iter().position(|v| (v - half).abs() < 1e-12).unwrap_or(0);
    (s, idx)
}

pub fn compute_profiles(spec: &CocycleSpec, settings: &ScanSettings) -> Result<Profiles> {
    if settings.seeds.is_empty() || !(settings.t > 0.0) || !(settings.ratio_threshold > 1.0) {
        return Err(Error::InvalidParameter("need seeds, T > 0 and threshold > 1".into()));
    }
    let (schedule, half) = checkpoint_schedule(spec, settings.t);
    let data = log_sv_profiles(spec, &settings.seeds, &schedule, settings.workers)?;
    Ok(Profiles { schedule, half, data })
}

fn margin(l: &[f64], gamma: f64, t: f64, k: usize) -> f64 {
    let d = l.len();
    let mut m = f64::INFINITY;
    for (i, v) in l.iter().enumerate() {
        let mu = v - gamma * t;
        // Descending order: the last k entries are the contracting ones.
        if i >= d - k {
            m = m.min(-mu);
        } else {
            m = m.min(mu);
        }
    }
    m
}

fn rank_of(l: &[f64], gamma: f64, t: f64) -> usize {
    l.iter().filter(|v| **v - gamma * t < 0.0).count()
}

/// Verdict at `gamma` from precomputed profiles.
pub fn verdict_from_profiles(p: &Profiles, gamma: f64, ratio_threshold: f64) -> DichotomyVerdict {
    let last = p.schedule.len() - 1;
    let t = p.schedule[last];
    let ranks: Vec<usize> = p.data.iter().map(|w| rank_of(&w[last], gamma, t)).collect();
    let rank_min = *ranks.iter().min().expect("non-empty ensemble");
    let rank_max = *ranks.iter().max().expect("non-empty ensemble");
    let worst = |c: usize, k: usize| {
        p.data
            .iter()
            .map(|w| margin(&w[c], gamma, p.schedule[c], k))
            .fold(f64::INFINITY, f64::min)
    };
    let ln_thr = ratio_threshold.ln();
    if rank_min != rank_max {
        let gap = p
            .data
            .iter()
            .zip(&ranks)
            .map(|(w, k)| margin(&w[last], gamma, t, *k))
            .fold(f64::INFINITY, f64::min);
        return DichotomyVerdict {
            gamma,
            verdict: Verdict::NoDichotomy,
            rank: None,
            rank_min,
            rank_max,
            min_log_gap: gap,
            min_log_gap_half: f64::NAN,
            k_fit: f64::NAN,
            alpha_fit: f64::NAN,
            residual: f64::NAN,
        };
    }
    let k = rank_min;
    let margins: Vec<f64> = (0..p.schedule.len()).map(|c| worst(c, k)).collect();
    let gap = margins[last];
    let gap_half = margins[p.half];
    let pass = gap >= ln_thr;
    let grows = gap - gap_half >= 0.5 * ln_thr;
    let (alpha_fit, intercept, residual) = fit_line(&p.schedule, &margins);
    let k_fit = (-intercept).exp().max(1.0);
    let mut verdict = match (pass, grows) {
        (true, true) => Verdict::Dichotomy,
        (false, false) => Verdict::NoDichotomy,
        _ => Verdict::Inconclusive,
    };
    if verdict == Verdict::Dichotomy && !(alpha_fit > 0.0) {
        verdict = Verdict::Inconclusive;
    }
    DichotomyVerdict {
        gamma,
        verdict,
        rank: Some(k),
        rank_min,
        rank_max,
        min_log_gap: gap,
        min_log_gap_half: gap_half,
        k_fit,
        alpha_fit,
        residual,
    }
}

fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return (f64::NAN, my, f64::NAN);
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    (slope, intercept, (rss / x.len() as f64).sqrt())
}

/// Single dichotomy test at growth rate `gamma`.
pub fn dichotomy_test(spec: &CocycleSpec, gamma: f64, settings: &ScanSettings) -> Result<DichotomyVerdict> {
    let p = compute_profiles(spec, settings)?;
    Ok(verdict_from_profiles(&p, gamma, settings.ratio_threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndpointKind {
    /// Located between scanned growth rates.
    Grid,
    /// Infinite, from divergence of the one-step log-norm maxima.
    Unbounded,
    /// The interval continues past the scanned range; the value is the last scanned rate.
    BeyondGrid,
    /// Degenerate interval inferred from a rank jump between adjacent resolvent points.
    RankJump,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralInterval {
    pub lower: f64,
    pub upper: f64,
    pub lower_kind: EndpointKind,
    pub upper_kind: EndpointKind,
    pub inconclusive_points: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub intervals: Vec<SpectralInterval>,
    /// Every evaluated growth rate, sorted, including refinement points.
    pub points: Vec<DichotomyVerdict>,
    /// Projector rank in each resolvent gap, from below to above.
    pub gap_ranks: Vec<usize>,
    pub gamma_grid: Vec<f64>,
    pub t: f64,
    pub n: usize,
    pub ratio_threshold: f64,
    pub refine_levels: u32,
    pub refine_factor: usize,
    pub unbounded_above: bool,
    pub unbounded_below: bool,
    /// Structural checks that did not hold; non-empty means the estimate is unreliable.
    pub failures: Vec<String>,
}

impl SpectrumEstimate {
    pub fn is_consistent(&self) -> bool {
        self.failures.is_empty()
    }

    /// CSV for plotting `gamma` against the worst margin.
    pub fn gap_csv(&self) -> String {
        let mut out = String::from("gamma,min_log_gap,rank,verdict\n");
        for p in &self.points {
            let rank = p.rank.map(|r| r as i64).unwrap_or(-1);
            let v = match p.verdict {
                Verdict::Dichotomy => "dichotomy",
                Verdict::NoDichotomy => "no-dichotomy",
                Verdict::Inconclusive => "inconclusive",
            };
            out.push_str(&format!("{},{},{},{}\n", fmt17(p.gamma), fmt17(p.min_log_gap), rank, v));
        }
        out
    }
}

fn refine(
    p: &Profiles,
    thr: f64,
    left: &DichotomyVerdict,
    right: &DichotomyVerdict,
    levels: u32,
    factor: usize,
    out: &mut Vec<DichotomyVerdict>,
) -> Option<f64> {
    let differs = |a: &DichotomyVerdict, b: &DichotomyVerdict| {
        a.is_resolvent() != b.is_resolvent() || (a.is_resolvent() && b.is_resolvent() && a.rank != b.rank)
    };
    let (mut a, mut b) = (left.clone(), right.clone());
    for _ in 0..levels {
        let h = (b.gamma - a.gamma) / factor as f64;
        let mut pts = vec![a.clone()];
        for j in 1..factor {
            let v = verdict_from_profiles(p, a.gamma + j as f64 * h, thr);
            out.push(v.clone());
            pts.push(v);
        }
        pts.push(b.clone());
        let cell = pts.windows(2).position(|w| differs(&w[0], &w[1]))?;
        a = pts[cell].clone();
        b = pts[cell + 1].clone();
    }
    // Still a rank jump between two resolvent points: the spectrum lies inside this cell.
    if a.is_resolvent() && b.is_resolvent() {
        Some(0.5 * (a.gamma + b.gamma))
    } else {
        None
    }
}

/// Scan growth rates, refine near boundaries and assemble spectral intervals.
pub fn scan_spectrum(spec: &CocycleSpec, gamma_grid: &[f64], settings: &ScanSettings) -> Result<SpectrumEstimate> {
    if gamma_grid.is_empty() || gamma_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("gamma grid must be non-empty and increasing".into()));
    }
    let profiles = compute_profiles(spec, settings)?;
    let onestep = if spec.is_random() {
        Some(onestep_log_norms(spec, &settings.seeds, settings.workers)?)
    } else {
        None
    };
    scan_with(spec, &profiles, onestep.as_ref(), gamma_grid, settings)
}

/// Scan using precomputed profiles and boundedness diagnostics.
pub fn scan_with(
    spec: &CocycleSpec,
    profiles: &Profiles,
    onestep: Option<&OnestepReport>,
    gamma_grid: &[f64],
    settings: &ScanSettings,
) -> Result<SpectrumEstimate> {
    let thr = settings.ratio_threshold;
    let grid: Vec<DichotomyVerdict> = gamma_grid.iter().map(|g| verdict_from_profiles(profiles, *g, thr)).collect();
    let mut extra = Vec::new();
    let mut jumps = Vec::new();
    for w in grid.windows(2) {
        let differs = w[0].is_resolvent() != w[1].is_resolvent()
            || (w[0].is_resolvent() && w[1].is_resolvent() && w[0].rank != w[1].rank);
        if differs {
            if let Some(g) = refine(profiles, thr, &w[0], &w[1], settings.refine_levels, settings.refine_factor, &mut extra) {
                jumps.push(g);
            }
        }
    }
    let mut points = grid;
    points.extend(extra);
    points.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    points.dedup_by(|a, b| a.gamma == b.gamma);

    let unbounded_above = onestep.map(|o| o.unbounded_above()).unwrap_or(false);
    let unbounded_below = onestep.map(|o| o.unbounded_below()).unwrap_or(false);
    let d = spec.dim();

    let mut intervals: Vec<SpectralInterval> = Vec::new();
    let mut i = 0;
    while i < points.len() {
        if points[i].is_resolvent() {
            i += 1;
            continue;
        }
        let start = i;
        while i < points.len() && !points[i].is_resolvent() {
            i += 1;
        }
        let run = &points[start..i];
        let inconclusive = run.iter().filter(|p| p.verdict == Verdict::Inconclusive).count();
        let (lower, lower_kind) = if start == 0 {
            if unbounded_below {
                (f64::NEG_INFINITY, EndpointKind::Unbounded)
            } else {
                (run[0].gamma, EndpointKind::BeyondGrid)
            }
        } else {
            (run[0].gamma, EndpointKind::Grid)
        };
        let (upper, upper_kind) = if i == points.len() {
            if unbounded_above {
                (f64::INFINITY, EndpointKind::Unbounded)
            } else {
                (run[run.len() - 1].gamma, EndpointKind::BeyondGrid)
            }
        } else {
            (run[run.len() - 1].gamma, EndpointKind::Grid)
        };
        intervals.push(SpectralInterval { lower, upper, lower_kind, upper_kind, inconclusive_points: inconclusive });
    }
    for g in jumps {
        intervals.push(SpectralInterval {
            lower: g,
            upper: g,
            lower_kind: EndpointKind::RankJump,
            upper_kind: EndpointKind::RankJump,
            inconclusive_points: 0,
        });
    }
    // Spectrum beyond the scanned range, implied by the ranks at the edges.
    let first = &points[0];
    if first.is_resolvent() && first.rank.unwrap_or(0) > 0 {
        let lower = if unbounded_below { f64::NEG_INFINITY } else { first.gamma };
        let kind = if unbounded_below { EndpointKind::Unbounded } else { EndpointKind::BeyondGrid };
        intervals.push(SpectralInterval {
            lower,
            upper: first.gamma,
            lower_kind: kind,
            upper_kind: EndpointKind::BeyondGrid,
            inconclusive_points: 0,
        });
    }
    let last = &points[points.len() - 1];
    if last.is_resolvent() && last.rank.unwrap_or(d) < d {
        let upper = if unbounded_above { f64::INFINITY } else { last.gamma };
        let kind = if unbounded_above { EndpointKind::Unbounded } else { EndpointKind::BeyondGrid };
        intervals.push(SpectralInterval {
            lower: last.gamma,
            upper,
            lower_kind: EndpointKind::BeyondGrid,
            upper_kind: kind,
            inconclusive_points: 0,
        });
    }
    intervals.sort_by(|a, b| a.lower.total_cmp(&b.lower).then(a.upper.total_cmp(&b.upper)));

    let mut failures = Vec::new();
    let mut gap_ranks = Vec::new();
    let mut prev_rank: Option<usize> = None;
    let mut in_gap = false;
    for p in &points {
        if p.is_resolvent() {
            let r = p.rank.expect("resolvent points have a rank");
            if let Some(q) = prev_rank {
                if r < q {
                    failures.push(format!("rank decreases from {q} to {r} at gamma = {}", p.gamma));
                }
                if in_gap && r != q {
                    failures.push(format!("rank changes inside a resolvent gap at gamma = {}", p.gamma));
                }
            }
            if !in_gap || prev_rank != Some(r) {
                gap_ranks.push(r);
            }
            prev_rank = Some(r);
            in_gap = true;
        } else {
            in_gap = false;
        }
    }
    if intervals.is_empty() {
        failures.push("no spectral interval found; widen the scan".into());
    }
    if intervals.len() > d {
        failures.push(format!("{} intervals exceed the dimension {d}", intervals.len()));
    }
    for w in intervals.windows(2) {
        if !(w[0].upper < w[1].lower) {
            failures.push(format!("intervals [{}, {}] and [{}, {}] are not disjoint", w[0].lower, w[0].upper, w[1].lower, w[1].upper));
        }
    }

    Ok(SpectrumEstimate {
        intervals,
        points,
        gap_ranks,
        gamma_grid: gamma_grid.to_vec(),
        t: settings.t,
        n: settings.seeds.len(),
        ratio_threshold: thr,
        refine_levels: settings.refine_levels,
        refine_factor: settings.refine_factor,
        unbounded_above,
        unbounded_below,
        failures,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointRow {
    pub t: f64,
    pub max_lmax: f64,
    pub min_lmin: f64,
    /// Standard error of the ensemble maximum of `lambda_max`, from block maxima.
    pub se_max: f64,
    pub se_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EndpointEstimate {
    pub rows: Vec<EndpointRow>,
    pub sup: f64,
    pub inf: f64,
    pub unbounded_above: bool,
    pub unbounded_below: bool,
    /// `T max lambda_max` subadditive up to two standard errors on all doubling pairs.
    pub subadditive: bool,
    pub superadditive_min: bool,
    pub onestep: OnestepReport,
    pub n: usize,
}

impl EndpointEstimate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("T,sup,inf,se_sup,se_inf\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", fmt17(r.t), fmt17(r.max_lmax), fmt17(r.min_lmin), fmt17(r.se_max), fmt17(r.se_min)));
        }
        out
    }
}

fn block_max_se(values: &[f64], blocks: usize, take_max: bool) -> f64 {
    let size = values.len() / blocks;
    if size == 0 || blocks < 2 {
        return f64::NAN;
    }
    let maxima: Vec<f64> = (0..blocks)
        .map(|b| {
            let it = values[b * size..(b + 1) * size].iter().copied();
            if take_max {
                it.fold(f64::NEG_INFINITY, f64::max)
            } else {
                it.fold(f64::INFINITY, f64::min)
            }
        })
        .collect();
    crate::numeric::variance(&maxima).sqrt() / (blocks as f64).sqrt()
}

/// Extremal finite-time exponents over the ensemble along an increasing
/// schedule of horizons.
pub fn estimate_endpoints(spec: &CocycleSpec, t_schedule: &[f64], seeds: &[u64], workers: Workers) -> Result<EndpointEstimate> {
    if t_schedule.is_empty() || t_schedule.windows(2).any(|w| !(w[1] > w[0])) || !(t_schedule[0] > 0.0) {
        return Err(Error::InvalidParameter("T schedule must be positive and increasing".into()));
    }
    let pairs: Vec<Vec<(f64, f64)>> = map_seeds(seeds, workers, |seed| {
        let s = evaluate(spec, Omega::new(seed), t_schedule)?;
        Ok(s.values.iter().map(|v| (v.lambda_max(), v.lambda_min())).collect())
    })?;
    let onestep = onestep_log_norms(spec, seeds, workers)?;
    let rows: Vec<EndpointRow> = (0..t_schedule.len())
        .map(|c| {
            let lmax: Vec<f64> = pairs.iter().map(|p| p[c].0).collect();
            let lmin: Vec<f64> = pairs.iter().map(|p| p[c].1).collect();
            EndpointRow {
                t: t_schedule[c],
                max_lmax: crate::numeric::max(&lmax),
                min_lmin: crate::numeric::min(&lmin),
                se_max: block_max_se(&lmax, 8, true),
                se_min: block_max_se(&lmin, 8, false),
            }
        })
        .collect();
    let mut subadditive = true;
    let mut superadditive_min = true;
    for a in &rows {
        for b in &rows {
            if let Some(c) = rows.iter().find(|c| (c.t - a.t - b.t).abs() < 1e-9) {
                let slack_max = 2.0 * (c.t * c.se_max + a.t * a.se_max + b.t * b.se_max).max(0.0);
                if c.t * c.max_lmax > a.t * a.max_lmax + b.t * b.max_lmax + slack_max.max(1e-9) {
                    subadditive = false;
                }
                let slack_min = 2.0 * (c.t * c.se_min + a.t * a.se_min + b.t * b.se_min).max(0.0);
                if c.t * c.min_lmin < a.t * a.min_lmin + b.t * b.min_lmin - slack_min.max(1e-9) {
                    superadditive_min = false;
                }
            }
        }
    }
    let last = rows.last().expect("non-empty schedule");
    let unbounded_above = onestep.unbounded_above();
    let unbounded_below = onestep.unbounded_below();
    Ok(EndpointEstimate {
        sup: if unbounded_above { f64::INFINITY } else { last.max_lmax },
        inf: if unbounded_below { f64::NEG_INFINITY } else { last.min_lmin },
        rows,
        unbounded_above,
        unbounded_below,
        subadditive,
        superadditive_min,
        onestep,
        n: seeds.len(),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SubspaceEstimate {
    pub omega: Omega,
    pub t: f64,
    /// Orthonormal bases, one per spectral interval from below.
    pub bases: Vec<DMatrix<f64>>,
    /// Largest principal angle between the estimates at `T` and `T/2`, per manifold.
    pub stability: Vec<f64>,
    pub inconclusive: bool,
}

impl SubspaceEstimate {
    pub fn dims(&self) -> Vec<usize> {
        self.bases.iter().map(|b| b.ncols()).collect()
    }
}

fn resolvent_representatives(est: &SpectrumEstimate) -> Vec<(f64, usize)> {
    let mut reps = Vec::new();
    let mut current: Vec<&DichotomyVerdict> = Vec::new();
    let flush = |cur: &mut Vec<&DichotomyVerdict>, reps: &mut Vec<(f64, usize)>| {
        if !cur.is_empty() {
            let mid = cur[cur.len() / 2];
            reps.push((mid.gamma, mid.rank.expect("resolvent rank")));
            cur.clear();
        }
    };
    for p in &est.points {
        if p.is_resolvent() {
            if current.last().map(|q| q.rank != p.rank).unwrap_or(false) {
                flush(&mut current, &mut reps);
            }
            current.push(p);
        } else {
            flush(&mut current, &mut reps);
        }
    }
    flush(&mut current, &mut reps);
    reps
}

fn manifolds_at(spec: &CocycleSpec, omega: Omega, t: f64, ranks: &[usize]) -> Result<(Vec<DMatrix<f64>>, bool)> {
    let d = spec.dim();
    let v = evaluate(spec, omega, &[t])?.values.remove(0);
    let mut bounds = vec![0usize];
    bounds.extend(ranks.iter().copied());
    bounds.push(d);
    bounds.dedup();
    let mut bases = Vec::new();
    let mut inconclusive = false;
    for w in bounds.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        // R(P_hi) holds the `hi` most contracting directions, N(P_lo) the `d - lo` least.
        let range = v.contracting_basis(hi);
        let kernel = v.expanding_basis(lo);
        let (b, _) = intersect(&range, &kernel, 1e-4);
        if b.ncols() != hi - lo {
            inconclusive = true;
        }
        bases.push(b);
    }
    Ok((bases, inconclusive))
}

/// Spectral manifolds `R(P_{gamma_i}) cap N(P_{gamma_{i-1}})` for one realization.
pub fn spectral_manifolds(spec: &CocycleSpec, est: &SpectrumEstimate, omega: Omega, t: f64) -> Result<SubspaceEstimate> {
    let reps = resolvent_representatives(est);
    if reps.is_empty() {
        return Err(Error::InvalidParameter("no resolvent gap to split at".into()));
    }
    let ranks: Vec<usize> = reps.iter().map(|r| r.1).collect();
    let (bases, inc_t) = manifolds_at(spec, omega, t, &ranks)?;
    let half = {
        let step = spec.time_step();
        snap(t / 2.0, step)
    };
    let (bases_half, inc_half) = manifolds_at(spec, omega, half, &ranks)?;
    let stability = bases
        .iter()
        .zip(&bases_half)
        .map(|(a, b)| principal_angles(a, b).into_iter().fold(0.0, f64::max))
        .collect();
    Ok(SubspaceEstimate { omega, t, bases, stability, inconclusive: inc_t || inc_half })
}

#[derive(Debug, Clone, Serialize)]
pub struct ShiftReport {
    pub c: f64,
    pub original: Vec<SpectralInterval>,
    pub shifted: Vec<SpectralInterval>,
    /// Largest `|shifted - (original + c)|` over finite endpoints.
    pub max_endpoint_error: f64,
    pub cell: f64,
    pub pass: bool,
}

/// Compare the scan of `e^{ct} Phi` with the scan of `Phi` moved by `c`.
pub fn shift_property_check(spec: &CocycleSpec, c: f64, gamma_grid: &[f64], settings: &ScanSettings) -> Result<ShiftReport> {
    let original = scan_spectrum(spec, gamma_grid, settings)?;
    let shifted = scan_spectrum(&spec.clone().rescaled(c), gamma_grid, settings)?;
    let cell = gamma_grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let mut err = 0.0f64;
    let mut pass = original.intervals.len() == shifted.intervals.len();
    for (a, b) in original.intervals.iter().zip(&shifted.intervals) {
        for (x, y) in [(a.lower, b.lower), (a.upper, b.upper)] {
            if x.is_finite() && y.is_finite() {
                err = err.max((y - (x + c)).abs());
            } else if x != y {
                pass = false;
            }
        }
    }
    pass &= err <= cell;
    Ok(ShiftReport { c, original: original.intervals, shifted: shifted.intervals, max_endpoint_error: err, cell, pass })
}
