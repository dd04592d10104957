//! Conjugacy of the stable pitchfork to the linear flow `e^{-t} x`.
//!
//! Around the random fixed point `a` the flow is written in deviation form
//!
//! ```text
//! psi(t, omega, x) = phi(t, omega, x + a(omega)) - a(theta_t omega),
//! ```
//!
//! which is again a cocycle with `psi(t, omega, 0) = 0`. When
//! `delta = E[a^2]/4 - alpha > 0`, deviations decay like `e^{-delta t/2}` once
//! the Birkhoff average of `a^2` has settled. The radius `r(omega, x)` solves
//!
//! ```text
//! int_r^inf |psi(s, omega, x)| ds = 1,
//! ```
//!
//! and `g(omega, x) = sign(x) e^{r(omega, x)}` then satisfies
//! `g(theta_s omega, psi(s, omega, x)) = e^{-s} g(omega, x)`, because shifting the
//! base point by `s` moves the root by exactly `-s`.
//!
//! The cubic drift makes backward solutions explode in finite time, so the
//! integral over the whole backward lifetime of an orbit is finite and can fall
//! below 1. The right-hand side is therefore a parameter `level`; the shift
//! identity holds for any positive level, and grid points whose orbit carries
//! less than `level` are reported as unresolved.

use serde::{Deserialize, Serialize};

use crate::ensemble::{map_seeds, Workers};
use crate::error::{Error, Result};
use crate::noise::{sample_path, GridSpec};
use crate::numeric::{fmt17, grid_index, log_grid};
use crate::pitchfork::{
    backward_states, flow_states, pullback_fixed_point_window, FixedPointTrajectory, PitchforkParams, PullbackOptions,
};
use crate::stationary::moment;

/// Shifts at which the cohomology residual is reported.
pub const TEST_SHIFTS: [f64; 3] = [0.5, 1.0, 2.0];

/// Newton steps applied after bisection.
const NEWTON_STEPS: usize = 3;

/// Default right-hand side of the root equation.
pub const DEFAULT_LEVEL: f64 = 0.25;

/// `E[a^2]` and `delta = E[a^2]/4 - alpha` for one parameter pair.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DeltaGate {
    pub ex2: f64,
    pub delta: f64,
}

/// Reject parameters with `delta <= 0`, reporting the quadrature value of `E[a^2]`.
pub fn delta_gate(params: PitchforkParams) -> Result<DeltaGate> {
    let ex2 = moment(params, 2)?;
    let delta = ex2 / 4.0 - params.alpha;
    if !(delta > 0.0) {
        return Err(Error::OutsideDeltaWindow { ex2, delta });
    }
    Ok(DeltaGate { ex2, delta })
}

/// `psi(t, omega, x)` at a grid time `t >= 0`.
pub fn shifted_flow(params: PitchforkParams, fp: &FixedPointTrajectory, x: f64, t: f64) -> Result<f64> {
    delta_gate(params)?;
    let k = grid_index(t, fp.dt).ok_or(Error::NotGridAligned { time: t, dt: fp.dt })?;
    if k < 0 {
        return Err(Error::InvalidParameter(format!("t must be >= 0, got {t}")));
    }
    fp.require(0.0, t)?;
    let states = flow_states(params, &fp.path, fp.at_index(0)? + x, 0, k)?;
    Ok(states[k as usize] - fp.at_index(k)?)
}

/// `|psi|` on a grid around base index `k0`, with its right tail integral.
#[derive(Debug, Clone)]
pub struct PsiProfile {
    pub dt: f64,
    /// Offset of the first sample from the base time, in steps (non-positive).
    pub j_min: i64,
    pub abs_psi: Vec<f64>,
    /// `tail[i] = int_{t_i}^{T_inf} |psi|` by the trapezoid rule.
    pub tail: Vec<f64>,
    pub sign: f64,
    pub level: f64,
    /// Whether the backward part stopped at the start of the fixed-point window.
    pub window_limited: bool,
}

impl PsiProfile {
    fn time(&self, i: usize) -> f64 {
        (self.j_min + i as i64) as f64 * self.dt
    }

    pub fn t_min(&self) -> f64 {
        self.time(0)
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.abs_psi.len() - 1)
    }

    fn panel(&self, r: f64) -> usize {
        let i = ((r / self.dt).floor() as i64 - self.j_min).max(0) as usize;
        i.min(self.abs_psi.len() - 2)
    }

    fn interp(&self, r: f64) -> f64 {
        let i = self.panel(r);
        let w = (r - self.time(i)) / self.dt;
        (1.0 - w) * self.abs_psi[i] + w * self.abs_psi[i + 1]
    }

    /// `F(r) = int_r^{T_inf} |psi| - level` with `|psi|` piecewise linear.
    pub fn residual(&self, r: f64) -> f64 {
        let i = self.panel(r);
        let right = self.time(i + 1);
        let pr = self.interp(r);
        self.tail[i + 1] + 0.5 * (pr + self.abs_psi[i + 1]) * (right - r) - self.level
    }

    /// Bisection on `[lo, hi]` down to `tol`, then Newton polish with `F' = -|psi|`.
    pub fn solve(&self, lo: f64, hi: f64, tol: f64) -> Result<f64> {
        let (mut a, mut b) = (lo.max(self.t_min()), hi.min(self.t_max()));
        let (fa, fb) = (self.residual(a), self.residual(b));
        if !(fa >= 0.0 && fb <= 0.0) {
            return Err(Error::NonBracketing(format!("F({a}) = {fa}, F({b}) = {fb}")));
        }
        while b - a > tol {
            let m = 0.5 * (a + b);
            if self.residual(m) > 0.0 {
                a = m;
            } else {
                b = m;
            }
        }
        let mut r = 0.5 * (a + b);
        for _ in 0..NEWTON_STEPS {
            let d = self.interp(r);
            if !(d > 0.0) {
                break;
            }
            let next = r + self.residual(r) / d;
            if !(next >= a && next <= b) {
                break;
            }
            r = next;
        }
        Ok(r)
    }
}

/// First time after which `(1/t) int_{k0}^{k0+t} a^2` stays within `delta/2` of `E[a^2]`.
pub fn birkhoff_onset(fp: &FixedPointTrajectory, k0: i64, gate: DeltaGate) -> Result<f64> {
    let v = fp.slice(k0, fp.k_end())?;
    let dt = fp.dt;
    let mut last_bad = 0usize;
    let mut acc = 0.0;
    for j in 1..v.len() {
        acc += 0.5 * dt * (v[j - 1] * v[j - 1] + v[j] * v[j]);
        if (acc / (j as f64 * dt) - gate.ex2).abs() > 0.5 * gate.delta {
            last_bad = j;
        }
    }
    if last_bad + 1 >= v.len() {
        return Err(Error::TailUnachievable { needed: f64::INFINITY, available: (v.len() - 1) as f64 * dt });
    }
    Ok((last_bad + 1) as f64 * dt)
}

/// Truncation horizon where `e^{-delta t/2} |x| (2/delta) < tol/10`.
///
/// Pass `tol * level` to bound the tail relative to the level.
pub fn tail_time(x: f64, delta: f64, tol: f64) -> f64 {
    ((2.0 / delta) * (20.0 * x.abs() / (delta * tol)).ln()).max(0.0)
}

/// Profile of `|psi|` about base index `k0`, integrated up to `T_inf`.
pub fn psi_profile(
    params: PitchforkParams,
    fp: &FixedPointTrajectory,
    k0: i64,
    x: f64,
    horizon: f64,
    level: f64,
) -> Result<PsiProfile> {
    if x == 0.0 {
        return Err(Error::InvalidParameter("radius is undefined at x = 0".into()));
    }
    let dt = fp.dt;
    let n_f = (horizon / dt).ceil() as i64;
    if k0 + n_f > fp.k_end() {
        return Err(Error::TailUnachievable { needed: horizon, available: (fp.k_end() - k0) as f64 * dt });
    }
    let a0 = fp.at_index(k0)?;
    let fwd = flow_states(params, &fp.path, a0 + x, k0, k0 + n_f)?;
    let back = backward_states(params, &fp.path, a0 + x, k0, k0 - fp.k_start)?;
    let sign = x.signum();
    let m = back.len() as i64 - 1;
    let mut abs_psi = Vec::with_capacity((m + n_f + 1) as usize);
    for j in (1..=m).rev() {
        abs_psi.push(sign * (back[j as usize] - fp.at_index(k0 - j)?));
    }
    for (j, s) in fwd.iter().enumerate() {
        abs_psi.push(sign * (s - fp.at_index(k0 + j as i64)?));
    }
    if let Some(bad) = abs_psi.iter().position(|v| !(*v > 0.0)) {
        // Deviations never cross zero in exact arithmetic; a zero here is underflow in the far tail.
        if bad as i64 <= m {
            return Err(Error::NonFinite { time: (bad as i64 - m) as f64 * dt, detail: format!("psi lost its sign, x = {x}") });
        }
    }
    let mut tail = vec![0.0; abs_psi.len()];
    for i in (0..abs_psi.len() - 1).rev() {
        tail[i] = tail[i + 1] + 0.5 * dt * (abs_psi[i].max(0.0) + abs_psi[i + 1].max(0.0));
    }
    Ok(PsiProfile { dt, j_min: -m, abs_psi, tail, sign, level, window_limited: m == k0 - fp.k_start })
}

/// Root and the truncation data used for it.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RadiusSolution {
    pub r: f64,
    pub horizon: f64,
    pub onset: f64,
    /// How far back the profile reached before the window or a blow-up stopped it.
    pub left_reach: f64,
}

fn radius_at(
    params: PitchforkParams,
    fp: &FixedPointTrajectory,
    gate: DeltaGate,
    onset: f64,
    k0: i64,
    x: f64,
    tol: f64,
    level: f64,
) -> Result<RadiusSolution> {
    let horizon = onset.max(tail_time(x, gate.delta, tol * level));
    let prof = psi_profile(params, fp, k0, x, horizon, level)?;
    if prof.tail[0] < level {
        if prof.window_limited {
            return Err(Error::NonBracketing(format!(
                "int |psi| from {} reaches only {}; extend the left window",
                prof.t_min(),
                prof.tail[0]
            )));
        }
        return Err(Error::RootMissing { x, reach: prof.t_min(), integral: prof.tail[0], level });
    }
    // Locate the panel by bisection on the grid, then solve inside it.
    let (mut lo, mut hi) = (0usize, prof.tail.len() - 1);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if prof.tail[mid] >= level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let r = prof.solve(prof.time(lo), prof.time(hi), tol)?;
    Ok(RadiusSolution { r, horizon, onset, left_reach: prof.t_min() })
}

fn check_tol_level(tol: f64, level: f64) -> Result<()> {
    if !(tol > 0.0) || !(level > 0.0) {
        return Err(Error::InvalidParameter(format!("tol and level must be > 0, got {tol}, {level}")));
    }
    Ok(())
}

/// `r(omega, x)` for the realization at time 0 of `fp`.
pub fn radius(params: PitchforkParams, fp: &FixedPointTrajectory, x: f64, tol: f64, level: f64) -> Result<RadiusSolution> {
    let gate = delta_gate(params)?;
    check_tol_level(tol, level)?;
    let onset = birkhoff_onset(fp, 0, gate)?;
    radius_at(params, fp, gate, onset, 0, x, tol, level)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConjugacyTable {
    pub seed: u64,
    pub alpha: f64,
    pub sigma: f64,
    pub dt: f64,
    pub tol: f64,
    pub level: f64,
    pub ex2: f64,
    pub delta: f64,
    pub onset: f64,
    pub x: Vec<f64>,
    pub r: Vec<f64>,
    pub g: Vec<f64>,
    pub horizon: Vec<f64>,
    pub shifts: Vec<f64>,
    /// `rho[i][j]` is the relative residual at `x[i]` and `shifts[j]`.
    pub rho: Vec<Vec<f64>>,
    /// `r(theta_s omega, psi(s, omega, x)) + s - r(omega, x)`, same layout as `rho`.
    pub r_defect: Vec<Vec<f64>>,
    /// Grid points without a root at this level; their entries are NaN.
    pub unresolved: usize,
}

impl ConjugacyTable {
    /// Largest residual over resolved points.
    pub fn max_rho(&self) -> f64 {
        self.rho.iter().flatten().filter(|v| !v.is_nan()).copied().fold(0.0, f64::max)
    }

    pub fn max_r_defect(&self) -> f64 {
        self.r_defect.iter().flatten().filter(|v| !v.is_nan()).map(|v| v.abs()).fold(0.0, f64::max)
    }

    /// Strict increase of `g` over the resolved points.
    pub fn is_strictly_increasing(&self) -> bool {
        let g: Vec<f64> = self.g.iter().copied().filter(|v| !v.is_nan()).collect();
        g.windows(2).all(|w| w[1] > w[0])
    }

    /// `g = 0` at `x = 0` and `sign(g) = sign(x)` at every resolved point.
    pub fn signs_consistent(&self) -> bool {
        self.x.iter().zip(&self.g).filter(|(_, g)| !g.is_nan()).all(|(x, g)| {
            if *x == 0.0 {
                *g == 0.0
            } else {
                x.signum() == g.signum()
            }
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,r,g,rho_s05,rho_s1,rho_s2\n");
        for i in 0..self.x.len() {
            out.push_str(&format!("{},{},{}", fmt17(self.x[i]), fmt17(self.r[i]), fmt17(self.g[i])));
            for v in &self.rho[i] {
                out.push(',');
                out.push_str(&fmt17(*v));
            }
            out.push('\n');
        }
        out
    }
}

/// Symmetric logarithmic grid `+-10^{-3} .. +-10` with 15 points per decade, plus 0.
pub fn default_x_grid() -> Vec<f64> {
    symmetric_grid(&log_grid(-3, 1, 15))
}

pub fn symmetric_grid(positive: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = positive.iter().rev().map(|v| -v).collect();
    g.push(0.0);
    g.extend_from_slice(positive);
    g
}

/// Evaluate `r`, `g` and the cohomology residuals on `x_grid` for the realization in `fp`.
pub fn conjugacy(
    params: PitchforkParams,
    fp: &FixedPointTrajectory,
    x_grid: &[f64],
    tol: f64,
    level: f64,
) -> Result<ConjugacyTable> {
    let gate = delta_gate(params)?;
    check_tol_level(tol, level)?;
    let onset = birkhoff_onset(fp, 0, gate)?;
    let shift_idx: Vec<i64> = TEST_SHIFTS
        .iter()
        .map(|&s| grid_index(s, fp.dt).ok_or(Error::NotGridAligned { time: s, dt: fp.dt }))
        .collect::<Result<_>>()?;
    let shift_onsets: Vec<f64> = shift_idx.iter().map(|&k| birkhoff_onset(fp, k, gate)).collect::<Result<_>>()?;
    let a0 = fp.at_index(0)?;
    let k_last = *shift_idx.iter().max().expect("non-empty shifts");
    let mut table = ConjugacyTable {
        seed: fp.path.seed(),
        alpha: params.alpha,
        sigma: params.sigma,
        dt: fp.dt,
        tol,
        level,
        ex2: gate.ex2,
        delta: gate.delta,
        onset,
        x: x_grid.to_vec(),
        r: Vec::with_capacity(x_grid.len()),
        g: Vec::with_capacity(x_grid.len()),
        horizon: Vec::with_capacity(x_grid.len()),
        shifts: TEST_SHIFTS.to_vec(),
        rho: Vec::with_capacity(x_grid.len()),
        r_defect: Vec::with_capacity(x_grid.len()),
        unresolved: 0,
    };
    for &x in x_grid {
        if x == 0.0 {
            table.r.push(f64::NEG_INFINITY);
            table.g.push(0.0);
            table.horizon.push(0.0);
            table.rho.push(vec![0.0; TEST_SHIFTS.len()]);
            table.r_defect.push(vec![0.0; TEST_SHIFTS.len()]);
            continue;
        }
        let sol = match radius_at(params, fp, gate, onset, 0, x, tol, level) {
            Ok(s) => s,
            Err(Error::RootMissing { .. }) => {
                table.unresolved += 1;
                table.r.push(f64::NAN);
                table.g.push(f64::NAN);
                table.horizon.push(f64::NAN);
                table.rho.push(vec![f64::NAN; TEST_SHIFTS.len()]);
                table.r_defect.push(vec![f64::NAN; TEST_SHIFTS.len()]);
                continue;
            }
            Err(e) => return Err(e),
        };
        let g = x.signum() * sol.r.exp();
        let states = flow_states(params, &fp.path, a0 + x, 0, k_last)?;
        let mut rho = Vec::with_capacity(TEST_SHIFTS.len());
        let mut defect = Vec::with_capacity(TEST_SHIFTS.len());
        for ((&s, &k), &on) in TEST_SHIFTS.iter().zip(&shift_idx).zip(&shift_onsets) {
            let y = states[k as usize] - fp.at_index(k)?;
            let sol_s = radius_at(params, fp, gate, on, k, y, tol, level)?;
            let g_s = y.signum() * sol_s.r.exp();
            rho.push((g_s - (-s).exp() * g).abs() / g.abs().max(tol));
            defect.push(sol_s.r + s - sol.r);
        }
        table.r.push(sol.r);
        table.g.push(g);
        table.horizon.push(sol.horizon);
        table.rho.push(rho);
        table.r_defect.push(defect);
    }
    Ok(table)
}

/// Window settings for building the fixed point of one realization.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ConjugacySettings {
    pub dt: f64,
    pub tol: f64,
    /// Convergence tolerance of the pullback fixed point.
    pub fp_tol: f64,
    pub level: f64,
    pub left: f64,
    /// Extra room past the largest tail time for the Birkhoff onset.
    pub right_margin: f64,
}

impl Default for ConjugacySettings {
    fn default() -> Self {
        ConjugacySettings { dt: 1e-3, tol: 1e-6, fp_tol: 1e-12, level: DEFAULT_LEVEL, left: 30.0, right_margin: 60.0 }
    }
}

/// Snap `t` up to the grid.
fn ceil_grid(t: f64, dt: f64) -> f64 {
    (t / dt).ceil() * dt
}

/// Build the fixed point for `seed` and tabulate the conjugacy, widening the
/// window when the root is not bracketed or the tail does not fit.
pub fn conjugacy_for_seed(params: PitchforkParams, seed: u64, x_grid: &[f64], settings: ConjugacySettings) -> Result<ConjugacyTable> {
    let gate = delta_gate(params)?;
    let x_max = x_grid.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut left = settings.left;
    let mut right = tail_time(x_max, gate.delta, settings.tol * settings.level) + settings.right_margin + TEST_SHIFTS[2];
    let mut last = None;
    for _ in 0..4 {
        let (l, r) = (ceil_grid(left, settings.dt), ceil_grid(right, settings.dt));
        let path = sample_path(seed, GridSpec::new(settings.dt, -l, r)?)?;
        let fp = pullback_fixed_point_window(params, &path, -l, r, settings.fp_tol, PullbackOptions::default())?;
        match conjugacy(params, &fp, x_grid, settings.tol, settings.level) {
            Ok(t) => return Ok(t),
            Err(Error::NonBracketing(m)) => {
                left *= 2.0;
                last = Some(Error::NonBracketing(m));
            }
            Err(Error::TailUnachievable { needed, available }) => {
                right *= 2.0;
                last = Some(Error::TailUnachievable { needed, available });
            }
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("loop ran"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniformityTable {
    pub alpha: f64,
    pub sigma: f64,
    pub ex2: f64,
    pub delta: f64,
    pub n: usize,
    pub x_abs: Vec<f64>,
    /// `max_omega max(|g(omega, x)|, |g(omega, -x)|)` over all realizations.
    pub max_g: Vec<f64>,
    /// The same maximum over the first quarter of the ensemble.
    pub max_g_quarter: Vec<f64>,
    /// Unresolved `(omega, x)` pairs, left out of the maxima.
    pub unresolved: usize,
}

impl UniformityTable {
    /// Growth of the maximum from `N/4` to `N` realizations at each `|x|`.
    pub fn growth_ratio(&self) -> Vec<f64> {
        self.max_g.iter().zip(&self.max_g_quarter).map(|(a, b)| if *b > 0.0 { a / b } else { 1.0 }).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_abs,max_g,max_g_quarter\n");
        out.push_str(&format!("{},{},{}\n", fmt17(0.0), fmt17(0.0), fmt17(0.0)));
        for i in 0..self.x_abs.len() {
            out.push_str(&format!("{},{},{}\n", fmt17(self.x_abs[i]), fmt17(self.max_g[i]), fmt17(self.max_g_quarter[i])));
        }
        out
    }
}

/// Ensemble maxima of `|g(omega, x) - g(omega, 0)|` on `+-x_abs`.
pub fn uniformity_probe(
    params: PitchforkParams,
    seeds: &[u64],
    x_abs: &[f64],
    settings: ConjugacySettings,
    workers: Workers,
) -> Result<UniformityTable> {
    let gate = delta_gate(params)?;
    if seeds.is_empty() || x_abs.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidParameter("need seeds and positive |x| values".into()));
    }
    let grid = symmetric_grid(x_abs);
    let n = x_abs.len();
    let rows = map_seeds(seeds, workers, |seed| {
        let t = conjugacy_for_seed(params, seed, &grid, settings)?;
        let row: Vec<f64> = (0..n).map(|i| t.g[n + 1 + i].abs().max(t.g[n - 1 - i].abs())).collect();
        Ok((row, t.unresolved))
    })?;
    let unresolved = rows.iter().map(|r| r.1).sum();
    let rows: Vec<Vec<f64>> = rows.into_iter().map(|r| r.0).collect();
    let quarter = seeds.len().div_ceil(4);
    let col_max = |rows: &[Vec<f64>], i: usize| rows.iter().map(|r| r[i]).fold(0.0, f64::max);
    Ok(UniformityTable {
        alpha: params.alpha,
        sigma: params.sigma,
        ex2: gate.ex2,
        delta: gate.delta,
        n: seeds.len(),
        x_abs: x_abs.to_vec(),
        max_g: (0..n).map(|i| col_max(&rows, i)).collect(),
        max_g_quarter: (0..n).map(|i| col_max(&rows[..quarter], i)).collect(),
        unresolved,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::seed_range;

    fn p(alpha: f64, sigma: f64) -> PitchforkParams {
        PitchforkParams::new(alpha, sigma).unwrap()
    }

    fn fixed_point(params: PitchforkParams, seed: u64, dt: f64, left: f64, right: f64) -> FixedPointTrajectory {
        let path = sample_path(seed, GridSpec::new(dt, -left, right).unwrap()).unwrap();
        pullback_fixed_point_window(params, &path, -left, right, 1e-12, PullbackOptions::default()).unwrap()
    }

    #[test]
    fn gate_rejects_unstable_side() {
        match delta_gate(p(0.5, 1.0)) {
            Err(Error::OutsideDeltaWindow { ex2, delta }) => {
                assert!(ex2 > 0.0 && delta <= 0.0);
            }
            other => panic!("expected gate error, got {other:?}"),
        }
        assert!(delta_gate(p(-0.25, 1.0)).unwrap().delta > 0.25);
    }

    #[test]
    fn psi_basic_properties() {
        let params = p(-0.25, 1.0);
        let gate = delta_gate(params).unwrap();
        let fp = fixed_point(params, 3, 1e-3, 5.0, 120.0);
        let onset = birkhoff_onset(&fp, 0, gate).unwrap();
        for t in [0.0, 1.0, 7.5, 30.0] {
            assert_eq!(shifted_flow(params, &fp, 0.0, t).unwrap(), 0.0);
        }
        let xs = [-2.0, -0.3, -1e-3, 1e-3, 0.3, 2.0];
        for t in [0.5, 3.0, 20.0] {
            let v: Vec<f64> = xs.iter().map(|x| shifted_flow(params, &fp, *x, t).unwrap()).collect();
            assert!(v.windows(2).all(|w| w[1] > w[0]), "{v:?}");
            assert!(v.iter().zip(&xs).all(|(a, b)| a.signum() == b.signum()));
        }
        let mut t = onset.ceil();
        while t <= 100.0 {
            for x in [0.1, 1.0, 3.0] {
                let v = shifted_flow(params, &fp, x, t).unwrap();
                assert!(v <= (-gate.delta * t / 2.0).exp() * x, "t = {t}, x = {x}");
            }
            t += 5.0;
        }
    }

    #[test]
    fn root_is_bracket_independent() {
        let params = p(-0.25, 1.0);
        let fp = fixed_point(params, 5, 1e-3, 30.0, 150.0);
        let gate = delta_gate(params).unwrap();
        let prof = psi_profile(params, &fp, 0, 0.4, tail_time(0.4, gate.delta, 1e-6).max(60.0), DEFAULT_LEVEL).unwrap();
        let a = prof.solve(prof.t_min(), prof.t_max(), 1e-6).unwrap();
        let b = prof.solve(-3.0, 5.0, 1e-6).unwrap();
        assert!((a - b).abs() < 1e-6);
        assert!(prof.residual(a).abs() < 1e-9);
    }

    #[test]
    fn radius_cohomology_and_table_invariants() {
        let params = p(-0.25, 1.0);
        let grid = symmetric_grid(&log_grid(-3, 1, 3));
        let settings = ConjugacySettings { dt: 1e-3, ..Default::default() };
        let t = conjugacy_for_seed(params, 11, &grid, settings).unwrap();
        assert_eq!(t.unresolved, 0);
        assert!(t.is_strictly_increasing() && t.signs_consistent());
        assert!(t.max_r_defect() <= 10.0 * t.tol, "{}", t.max_r_defect());
        assert!(t.max_rho() <= 1e-3);
        let i0 = grid.iter().position(|v| *v == 0.0).unwrap();
        assert!(t.g[i0 + 1] < t.g[i0 + 4] && t.g[i0 + 1] < 0.1);
        let csv = t.to_csv();
        assert!(csv.starts_with("x,r,g,rho_s05,rho_s1,rho_s2\n"));
        assert_eq!(csv.lines().count(), grid.len() + 1);
    }

    /// Small-noise limit against `x' = alpha x - x^3`, for which
    /// `int_r^inf x(s) ds = c` has the closed-form root
    /// `r = (1/beta) ln(1 / (sin(c sqrt beta) sqrt(beta A)))`, `beta = -alpha`, `A = 1/x^2 + 1/beta`.
    #[test]
    fn small_noise_matches_deterministic_root() {
        let alpha = -1.0;
        let params = p(alpha, 1e-3);
        let beta = -alpha;
        let fp = fixed_point(params, 2, 1e-3, 30.0, 150.0);
        for c in [DEFAULT_LEVEL, 1.0] {
            for x in [1e-3f64, 0.05, 0.3, 1.0, -0.3] {
                let a = 1.0 / (x * x) + 1.0 / beta;
                let exact = (1.0 / ((c * beta.sqrt()).sin() * (beta * a).sqrt())).ln() / beta;
                let r = radius(params, &fp, x, 1e-6, c).unwrap().r;
                assert!((r - exact).abs() < 5e-3, "c = {c}, x = {x}: {r} vs {exact}");
            }
        }
        // Near zero the orbit stays linear until close to the root, so the
        // exponential-tail formula `(1/alpha) ln(-alpha c / x)` is the leading term.
        let x: f64 = 1e-3;
        let proxy = (-alpha * DEFAULT_LEVEL / x).ln() / alpha;
        let r = radius(params, &fp, x, 1e-6, DEFAULT_LEVEL).unwrap().r;
        assert!((r - proxy).abs() < 0.05, "{r} vs {proxy}");
    }

    #[test]
    fn unit_level_loses_roots_to_backward_blow_up() {
        let params = p(-0.25, 1.0);
        let fp = fixed_point(params, 0, 1e-3, 60.0, 120.0);
        let grid = symmetric_grid(&log_grid(-3, 1, 5));
        let t = conjugacy(params, &fp, &grid, 1e-6, 1.0).unwrap();
        assert!(t.unresolved > 0);
        assert!(t.is_strictly_increasing() && t.signs_consistent());
    }

    #[test]
    fn uniformity_rows_decay_toward_zero() {
        let params = p(-0.5, 1.0);
        let settings = ConjugacySettings { dt: 1e-2, fp_tol: 1e-10, right_margin: 40.0, ..Default::default() };
        let u = uniformity_probe(params, &seed_range(0, 12), &[1e-3, 1e-2, 1e-1], settings, Workers(1)).unwrap();
        assert!(u.max_g[0] < u.max_g[1] && u.max_g[1] < u.max_g[2]);
        assert!(u.growth_ratio().iter().all(|r| *r >= 1.0));
        assert!(u.to_csv().lines().nth(1).unwrap().starts_with("0.0000000000000000e0,0.0000000000000000e0"));
    }
}
