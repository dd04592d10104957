//! Pathwise integration of `dx = (alpha x - x^3) dt + sigma dW`.
//!
//! One step of length `h` with Brownian increment `dW` is the Lie splitting
//!
//! ```text
//! x -> x / sqrt(1 + 2 x^2 h)     exact flow of x' = -x^3
//!   -> e^{alpha h} x             exact flow of x' = alpha x
//!   -> x + sigma dW
//! ```
//!
//! Each sub-map is strictly increasing and the first two are contractions in
//! the sense `|f(x) - f(y)| <= e^{alpha h} |x - y|`, so the discrete flow is
//! order preserving and obeys `|phi(t)x - phi(t)y| <= e^{alpha t}|x - y|`
//! exactly. The step is invertible on `{z : 2 z^2 h < 1}`, which gives a
//! backward flow up to a possible finite-time blow-up.
//!
//! The random fixed point is the pullback limit
//! `a(omega) = lim_{tau -> inf} phi(tau, theta_{-tau} omega) x`, bracketed by
//! orbits started at `+-B` with `B = 1 + |alpha| + 5 sigma`.

use serde::{Deserialize, Serialize};

use crate::ensemble::{map_seeds, Workers};
use crate::error::{Error, Result};
use crate::noise::{sample_path, GridSpec, NoisePath};
use crate::numeric::{compensated_sum, fmt17, grid_index};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PitchforkParams {
    pub alpha: f64,
    pub sigma: f64,
}

impl PitchforkParams {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self> {
        if !alpha.is_finite() || !sigma.is_finite() || sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "need finite alpha and sigma >= 0, got alpha = {alpha}, sigma = {sigma}"
            )));
        }
        Ok(PitchforkParams { alpha, sigma })
    }

    /// Absorbing bracket radius used to start pullback orbits.
    pub fn bracket(&self) -> f64 {
        1.0 + self.alpha.abs() + 5.0 * self.sigma
    }
}

/// Precomputed step constants for a fixed `dt`.
#[derive(Debug, Clone, Copy)]
pub struct Stepper {
    h: f64,
    growth: f64,
    sigma: f64,
}

impl Stepper {
    pub fn new(params: PitchforkParams, h: f64) -> Self {
        Stepper { h, growth: (params.alpha * h).exp(), sigma: params.sigma }
    }

    #[inline]
    pub fn step(&self, x: f64, dw: f64) -> f64 {
        let y = x / (1.0 + 2.0 * x * x * self.h).sqrt();
        y * self.growth + self.sigma * dw
    }

    /// Inverse of [`Stepper::step`]; `None` when the backward cubic flow blows up.
    #[inline]
    pub fn step_back(&self, y: f64, dw: f64) -> Option<f64> {
        let z = (y - self.sigma * dw) / self.growth;
        let q = 1.0 - 2.0 * z * z * self.h;
        if q > 0.0 {
            Some(z / q.sqrt())
        } else {
            None
        }
    }

    /// Derivative of one step at `x`.
    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.growth * (1.0 + 2.0 * x * x * self.h).powf(-1.5)
    }
}

/// Apply the discrete flow from relative grid index `k0` to `k1 >= k0`.
pub fn flow(params: PitchforkParams, path: &NoisePath, x0: f64, k0: i64, k1: i64) -> Result<f64> {
    let st = Stepper::new(params, path.dt());
    let incs = path.increments(k0, k1)?;
    let mut x = x0;
    for &dw in incs {
        x = st.step(x, dw);
    }
    if !x.is_finite() {
        return Err(Error::NonFinite { time: k1 as f64 * path.dt(), detail: format!("x0 = {x0}") });
    }
    Ok(x)
}

/// States along the flow from `k0` to `k1`, inclusive of both ends.
pub fn flow_states(params: PitchforkParams, path: &NoisePath, x0: f64, k0: i64, k1: i64) -> Result<Vec<f64>> {
    let st = Stepper::new(params, path.dt());
    let incs = path.increments(k0, k1)?;
    let mut out = Vec::with_capacity(incs.len() + 1);
    let mut x = x0;
    out.push(x);
    for &dw in incs {
        x = st.step(x, dw);
        out.push(x);
    }
    if let Some(pos) = out.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            time: (k0 + pos as i64) as f64 * path.dt(),
            detail: format!("x0 = {x0}"),
        });
    }
    Ok(out)
}

/// Backward states `phi(-j dt) x0` for `j = 0..=steps`, stopping early at blow-up.
pub fn backward_states(params: PitchforkParams, path: &NoisePath, x0: f64, k0: i64, steps: i64) -> Result<Vec<f64>> {
    let st = Stepper::new(params, path.dt());
    let incs = path.increments(k0 - steps, k0)?;
    let mut out = Vec::with_capacity(steps as usize + 1);
    let mut x = x0;
    out.push(x);
    for &dw in incs.iter().rev() {
        match st.step_back(x, dw) {
            Some(z) if z.is_finite() => {
                x = z;
                out.push(x);
            }
            _ => break,
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub params: PitchforkParams,
    pub dt: f64,
    /// Grid index of the first state, relative to the path origin.
    pub k_start: i64,
    pub states: Vec<f64>,
    pub path: NoisePath,
}

impl Trajectory {
    pub fn time(&self, i: usize) -> f64 {
        (self.k_start + i as i64) as f64 * self.dt
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,x\n");
        for (i, x) in self.states.iter().enumerate() {
            out.push_str(&format!("{},{}\n", fmt17(self.time(i)), fmt17(*x)));
        }
        out
    }
}

/// Integrate from `x0` at time `t0` to `t1` on the grid of `path`.
pub fn integrate(params: PitchforkParams, path: &NoisePath, x0: f64, t0: f64, t1: f64) -> Result<Trajectory> {
    if !(t1 > t0) {
        return Err(Error::InvalidParameter(format!("need t1 > t0, got [{t0}, {t1}]")));
    }
    let k0 = path.index_of(t0)?;
    let k1 = path.index_of(t1)?;
    let states = flow_states(params, path, x0, k0, k1)?;
    Ok(Trajectory { params, dt: path.dt(), k_start: k0, states, path: path.clone() })
}

/// Samples of `a(theta_t omega)` on a window of grid times.
#[derive(Debug, Clone)]
pub struct FixedPointTrajectory {
    pub params: PitchforkParams,
    pub dt: f64,
    pub k_start: i64,
    /// `a(theta_{t_k} omega)` for consecutive grid times starting at `k_start`.
    pub values: Vec<f64>,
    /// Pullback depth `tau` before the window start.
    pub depth: f64,
    /// Largest distance between the two bracketing orbits over the window.
    pub gap: f64,
    /// Gap reached at each tried depth, in order.
    pub depth_history: Vec<(f64, f64)>,
    /// Path with the window needed by the pullback materialized.
    pub path: NoisePath,
}

impl FixedPointTrajectory {
    pub fn k_end(&self) -> i64 {
        self.k_start + self.values.len() as i64 - 1
    }

    pub fn t_start(&self) -> f64 {
        self.k_start as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.k_end() as f64 * self.dt
    }

    /// Fixed point at grid index `k`.
    pub fn at_index(&self, k: i64) -> Result<f64> {
        if k < self.k_start || k > self.k_end() {
            return Err(Error::MissingCoverage {
                required_min: k as f64 * self.dt,
                required_max: k as f64 * self.dt,
                available_min: self.t_start(),
                available_max: self.t_end(),
            });
        }
        Ok(self.values[(k - self.k_start) as usize])
    }

    pub fn at(&self, t: f64) -> Result<f64> {
        let k = grid_index(t, self.dt).ok_or(Error::NotGridAligned { time: t, dt: self.dt })?;
        self.at_index(k)
    }

    /// Check that `[t0, t1]` is covered.
    pub fn require(&self, t0: f64, t1: f64) -> Result<()> {
        let eps = 1e-9 * self.dt;
        if t0 < self.t_start() - eps || t1 > self.t_end() + eps {
            return Err(Error::MissingCoverage {
                required_min: t0,
                required_max: t1,
                available_min: self.t_start(),
                available_max: self.t_end(),
            });
        }
        Ok(())
    }

    /// Slice of fixed-point values for grid indices `k0..=k1`.
    pub fn slice(&self, k0: i64, k1: i64) -> Result<&[f64]> {
        self.at_index(k0)?;
        self.at_index(k1)?;
        Ok(&self.values[(k0 - self.k_start) as usize..=(k1 - self.k_start) as usize])
    }

    /// Trapezoid integral of `a^2` over grid indices `k0..=k1`.
    pub fn integral_sq(&self, k0: i64, k1: i64) -> Result<f64> {
        let v = self.slice(k0, k1)?;
        Ok(trapezoid_sq(v, self.dt))
    }

    /// Time average `(1/T) int_0^T a^2`.
    pub fn birkhoff_average(&self, t: f64) -> Result<f64> {
        let k = grid_index(t, self.dt).ok_or(Error::NotGridAligned { time: t, dt: self.dt })?;
        Ok(self.integral_sq(0, k)? / t)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,a\n");
        for (i, a) in self.values.iter().enumerate() {
            let t = (self.k_start + i as i64) as f64 * self.dt;
            out.push_str(&format!("{},{}\n", fmt17(t), fmt17(*a)));
        }
        out
    }
}

pub(crate) fn trapezoid_sq(v: &[f64], dt: f64) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let inner = compensated_sum(v[1..v.len() - 1].iter().map(|a| a * a));
    dt * (inner + 0.5 * (v[0] * v[0] + v[v.len() - 1] * v[v.len() - 1]))
}

/// Settings for the pullback search.
#[derive(Debug, Clone, Copy)]
pub struct PullbackOptions {
    pub initial_depth: f64,
    pub max_depth: f64,
}

impl Default for PullbackOptions {
    fn default() -> Self {
        PullbackOptions { initial_depth: 4.0, max_depth: 16384.0 }
    }
}

/// Random fixed point on `[0, horizon]`.
pub fn pullback_fixed_point(
    params: PitchforkParams,
    path: &NoisePath,
    horizon: f64,
    tol: f64,
) -> Result<FixedPointTrajectory> {
    pullback_fixed_point_window(params, path, 0.0, horizon, tol, PullbackOptions::default())
}

/// Random fixed point on `[t_from, t_to]`, extending the path as needed.
pub fn pullback_fixed_point_window(
    params: PitchforkParams,
    path: &NoisePath,
    t_from: f64,
    t_to: f64,
    tol: f64,
    opts: PullbackOptions,
) -> Result<FixedPointTrajectory> {
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParameter("pullback needs sigma > 0".into()));
    }
    if !(tol > 0.0) || !(t_to >= t_from) {
        return Err(Error::InvalidParameter(format!("need tol > 0 and t_to >= t_from, got tol = {tol}, [{t_from}, {t_to}]")));
    }
    let dt = path.dt();
    let k_from = path.index_of(t_from)?;
    let k_to = path.index_of(t_to)?;
    let b = params.bracket();
    let mut depth = opts.initial_depth;
    let mut history = Vec::new();
    let mut path = path.ensure_window(k_from, k_to)?;
    while depth <= opts.max_depth {
        let steps = grid_index(depth, dt).ok_or(Error::NotGridAligned { time: depth, dt })?;
        path = path.ensure_window(k_from - steps, k_to)?;
        let upper0 = flow(params, &path, b, k_from - steps, k_from)?;
        let lower0 = flow(params, &path, -b, k_from - steps, k_from)?;
        let gap0 = upper0 - lower0;
        if gap0 > tol {
            history.push((depth, gap0));
            depth *= 2.0;
            continue;
        }
        let upper = flow_states(params, &path, upper0, k_from, k_to)?;
        let lower = flow_states(params, &path, lower0, k_from, k_to)?;
        let gap = upper.iter().zip(&lower).map(|(u, l)| u - l).fold(0.0, f64::max);
        history.push((depth, gap));
        if gap <= tol {
            return Ok(FixedPointTrajectory {
                params,
                dt,
                k_start: k_from,
                values: upper,
                depth,
                gap,
                depth_history: history,
                path,
            });
        }
        depth *= 2.0;
    }
    let last = history.last().map(|h| h.1).unwrap_or(f64::INFINITY);
    Err(Error::NonConvergence { depth: opts.max_depth, gap: last, tol })
}

/// Stationary Ornstein-Uhlenbeck value `sigma int_{-inf}^0 e^{alpha s} dW(s)`.
#[derive(Debug, Clone, Copy)]
pub struct OuValue {
    pub value: f64,
    /// Depth of the left window used.
    pub depth: f64,
    /// `e^{-alpha depth}`, the weight of the discarded tail.
    pub tail_bound: f64,
}

/// Truncated left-point sum over the whole left window of `path`.
pub fn ou_fixed_point(alpha: f64, sigma: f64, path: &NoisePath) -> Result<OuValue> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("need alpha > 0, got {alpha}")));
    }
    let k_min = path.k_min();
    if k_min >= 0 {
        return Err(Error::WindowViolation {
            requested_min: f64::NEG_INFINITY,
            requested_max: 0.0,
            available_min: path.t_min(),
            available_max: path.t_max(),
        });
    }
    let dt = path.dt();
    let depth = -(k_min as f64) * dt;
    if sigma == 0.0 {
        return Ok(OuValue { value: 0.0, depth, tail_bound: (-alpha * depth).exp() });
    }
    let incs = path.increments(k_min, 0)?;
    let terms = incs.iter().enumerate().map(|(i, dw)| ((k_min + i as i64) as f64 * dt * alpha).exp() * dw);
    Ok(OuValue { value: sigma * compensated_sum(terms), depth, tail_bound: (-alpha * depth).exp() })
}

/// Output of the attractivity probe.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeTable {
    pub params: PitchforkParams,
    pub delta: f64,
    pub times: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `per_path[i][j]`: max over the four offsets for seed `i` at `times[j]`.
    pub per_path: Vec<Vec<f64>>,
    /// Ensemble maximum `S(t)` per time.
    pub sup: Vec<f64>,
}

impl ProbeTable {
    /// Fraction of paths whose deviation exceeds `threshold` at `times[j]`.
    pub fn fraction_above(&self, j: usize, threshold: f64) -> f64 {
        let n = self.per_path.len();
        if n == 0 {
            return 0.0;
        }
        self.per_path.iter().filter(|row| row[j] > threshold).count() as f64 / n as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,S\n");
        for (t, s) in self.times.iter().zip(&self.sup) {
            out.push_str(&format!("{},{}\n", fmt17(*t), fmt17(*s)));
        }
        out
    }
}

/// Settings shared by ensemble studies on the pitchfork.
#[derive(Debug, Clone, Copy)]
pub struct EnsembleSettings {
    pub dt: f64,
    pub tol: f64,
    pub workers: Workers,
}

/// Deviation of `a + x` from the fixed point for one realization and the
/// offsets `{+-delta, +-delta/2}`, maximized over offsets, at each time.
pub fn probe_path(params: PitchforkParams, fp: &FixedPointTrajectory, delta: f64, times: &[f64]) -> Result<Vec<f64>> {
    let t_max = times.iter().copied().fold(0.0, f64::max);
    fp.require(0.0, t_max)?;
    let ks: Vec<i64> = times
        .iter()
        .map(|&t| grid_index(t, fp.dt).ok_or(Error::NotGridAligned { time: t, dt: fp.dt }))
        .collect::<Result<_>>()?;
    let k_max = ks.iter().copied().max().unwrap_or(0);
    let a0 = fp.at_index(0)?;
    let mut best = vec![0.0f64; times.len()];
    for x in [delta, -delta, 0.5 * delta, -0.5 * delta] {
        let states = flow_states(params, &fp.path, a0 + x, 0, k_max)?;
        for (j, &k) in ks.iter().enumerate() {
            let d = (states[k as usize] - fp.at_index(k)?).abs();
            best[j] = best[j].max(d);
        }
    }
    Ok(best)
}

/// Monte Carlo estimate of `sup_x esssup_omega |phi(t, omega, a + x) - a(theta_t omega)|`.
pub fn uniform_attractivity_probe(
    params: PitchforkParams,
    seeds: &[u64],
    delta: f64,
    times: &[f64],
    settings: EnsembleSettings,
) -> Result<ProbeTable> {
    if !(delta >= 0.0) {
        return Err(Error::InvalidParameter(format!("delta must be >= 0, got {delta}")));
    }
    let t_max = times.iter().copied().fold(0.0, f64::max);
    let per_path = map_seeds(seeds, settings.workers, |seed| {
        let path = sample_path(seed, GridSpec::new(settings.dt, 0.0, t_max)?)?;
        let fp = pullback_fixed_point(params, &path, t_max, settings.tol)?;
        probe_path(params, &fp, delta, times)
    })?;
    let sup = (0..times.len())
        .map(|j| per_path.iter().map(|row| row[j]).fold(0.0, f64::max))
        .collect();
    Ok(ProbeTable { params, delta, times: times.to_vec(), seeds: seeds.to_vec(), per_path, sup })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::sample_path_refined;
    use proptest::prelude::*;

    fn p(alpha: f64, sigma: f64) -> PitchforkParams {
        PitchforkParams::new(alpha, sigma).unwrap()
    }

    #[test]
    fn deterministic_cubic_matches_closed_form() {
        let path = sample_path(1, GridSpec::new(1e-3, 0.0, 1.0).unwrap()).unwrap();
        let tr = integrate(p(0.0, 0.0), &path, 1.0, 0.0, 1.0).unwrap();
        let exact = 1.0 / 3f64.sqrt();
        assert!((tr.states.last().unwrap() - exact).abs() < 1e-4);
        // With alpha = 0 both sub-flows are exact, so the match is to round-off.
        assert!((tr.states.last().unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn bernoulli_oracle_with_linear_part() {
        // x' = alpha x - x^3 has x(t)^2 = alpha x0^2 e^{2 alpha t} / (alpha + x0^2 (e^{2 alpha t} - 1)).
        let (alpha, x0) = (0.7, 0.3);
        let path = sample_path(1, GridSpec::new(1e-3, 0.0, 2.0).unwrap()).unwrap();
        let tr = integrate(p(alpha, 0.0), &path, x0, 0.0, 2.0).unwrap();
        for (i, x) in tr.states.iter().enumerate().step_by(100) {
            let t = tr.time(i);
            let e = (2.0 * alpha * t).exp();
            let exact = (alpha * x0 * x0 * e / (alpha + x0 * x0 * (e - 1.0))).sqrt();
            assert!((x - exact).abs() < 2e-4, "t={t} {x} {exact}");
        }
    }

    #[test]
    fn zero_is_an_equilibrium_without_noise() {
        let path = sample_path(1, GridSpec::new(1e-3, 0.0, 1.0).unwrap()).unwrap();
        for alpha in [-1.0, 0.0, 2.0] {
            let tr = integrate(p(alpha, 0.0), &path, 0.0, 0.0, 1.0).unwrap();
            assert!(tr.states.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn contraction_for_negative_alpha() {
        let path = sample_path(5, GridSpec::new(1e-3, 0.0, 10.0).unwrap()).unwrap();
        let a = integrate(p(-1.0, 1.0), &path, -2.0, 0.0, 10.0).unwrap();
        let b = integrate(p(-1.0, 1.0), &path, 2.0, 0.0, 10.0).unwrap();
        for i in 0..a.states.len() {
            let t = a.time(i);
            assert!((a.states[i] - b.states[i]).abs() <= (-t).exp() * 4.0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn contraction_bound_has_no_violation_at_either_step() {
        for (dt, m) in [(1e-3, 2u32), (5e-4, 1u32)] {
            let path = sample_path_refined(8, GridSpec::new(dt, 0.0, 5.0).unwrap(), m).unwrap();
            let a = integrate(p(-1.0, 1.0), &path, -2.0, 0.0, 5.0).unwrap();
            let b = integrate(p(-1.0, 1.0), &path, 2.0, 0.0, 5.0).unwrap();
            let violation = (0..a.states.len())
                .map(|i| (a.states[i] - b.states[i]).abs() - (-a.time(i)).exp() * 4.0)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(violation <= 1e-12, "dt={dt} violation {violation}");
        }
    }

    #[test]
    fn inverse_step_undoes_step() {
        let st = Stepper::new(p(0.4, 1.0), 1e-3);
        for x in [-3.0, -0.2, 0.0, 0.9, 5.0] {
            let y = st.step(x, 0.03);
            let back = st.step_back(y, 0.03).unwrap();
            assert!((back - x).abs() < 1e-12 * (1.0 + x.abs()));
        }
        assert!(st.step_back(100.0, 0.0).is_none());
    }

    #[test]
    fn integrate_rejects_bad_windows() {
        let path = sample_path(1, GridSpec::new(1e-2, 0.0, 1.0).unwrap()).unwrap();
        assert!(integrate(p(0.0, 1.0), &path, 0.0, 0.5, 0.5).is_err());
        assert!(matches!(integrate(p(0.0, 1.0), &path, 0.0, 0.0, 2.0), Err(Error::WindowViolation { .. })));
    }

    #[test]
    fn pullback_negative_alpha_converges_fast() {
        let path = sample_path(3, GridSpec::new(1e-3, 0.0, 5.0).unwrap()).unwrap();
        let fp = pullback_fixed_point(p(-1.0, 1.0), &path, 5.0, 1e-8).unwrap();
        assert!(fp.gap <= 1e-8);
        assert!(fp.depth <= 32.0, "depth {}", fp.depth);
    }

    #[test]
    fn pullback_positive_alpha_converges_and_is_invariant() {
        let path = sample_path(4, GridSpec::new(1e-3, 0.0, 5.0).unwrap()).unwrap();
        let tol = 1e-8;
        let fp = pullback_fixed_point(p(1.0, 1.0), &path, 5.0, tol).unwrap();
        assert!(fp.gap <= tol);
        let forward = flow_states(p(1.0, 1.0), &fp.path, fp.values[0], 0, 5000).unwrap();
        let err = forward.iter().zip(&fp.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 10.0 * tol, "identity error {err}");
    }

    #[test]
    fn pullback_gap_is_monotone_in_depth() {
        let par = p(0.5, 1.0);
        let path = sample_path(6, GridSpec::new(1e-3, -64.0, 0.0).unwrap()).unwrap();
        let b = par.bracket();
        let mut last = f64::INFINITY;
        for depth in [1i64, 2, 4, 8, 16, 32, 64] {
            let k = -depth * 1000;
            let gap = flow(par, &path, b, k, 0).unwrap() - flow(par, &path, -b, k, 0).unwrap();
            assert!(gap <= last, "depth {depth}: {gap} > {last}");
            last = gap;
        }
    }

    #[test]
    fn pullback_rejects_zero_noise() {
        let path = sample_path(3, GridSpec::new(1e-3, 0.0, 1.0).unwrap()).unwrap();
        assert!(pullback_fixed_point(p(1.0, 0.0), &path, 1.0, 1e-8).is_err());
    }

    #[test]
    fn ou_zero_noise_and_window() {
        let path = sample_path(1, GridSpec::new(1e-2, -10.0, 0.0).unwrap()).unwrap();
        assert_eq!(ou_fixed_point(1.0, 0.0, &path).unwrap().value, 0.0);
        let right = sample_path(1, GridSpec::new(1e-2, 0.0, 1.0).unwrap()).unwrap();
        assert!(ou_fixed_point(1.0, 1.0, &right).is_err());
        assert!(ou_fixed_point(-1.0, 1.0, &path).is_err());
    }

    #[test]
    fn ou_stationary_variance() {
        let (alpha, sigma) = (1.0, 1.0);
        let n = 4000;
        let vals: Vec<f64> = (0..n)
            .map(|s| {
                let path = sample_path(s, GridSpec::new(1e-2, -15.0, 0.0).unwrap()).unwrap();
                ou_fixed_point(alpha, sigma, &path).unwrap().value
            })
            .collect();
        let var = crate::numeric::variance(&vals);
        let target = sigma * sigma / (2.0 * alpha);
        // Standard error of a normal sample variance: target * sqrt(2 / (n - 1)).
        let se = target * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - target).abs() < 4.0 * se + 0.01, "var {var}");
    }

    #[test]
    fn ou_flow_identity() {
        let (alpha, sigma) = (0.8, 1.3);
        let dt = 1e-3;
        let path = sample_path(12, GridSpec::new(dt, -20.0, 1.0).unwrap()).unwrap();
        let z0 = ou_fixed_point(alpha, sigma, &path).unwrap().value;
        let z1 = ou_fixed_point(alpha, sigma, &path.shift(1.0).unwrap()).unwrap().value;
        let incs = path.increments(0, 1000).unwrap();
        let forcing = sigma
            * compensated_sum(incs.iter().enumerate().map(|(i, dw)| (-(alpha) * (1.0 - i as f64 * dt)).exp() * dw));
        assert!((z1 - ((-alpha).exp() * z0 + forcing)).abs() < 1e-10);
    }

    #[test]
    fn probe_negative_alpha_decays() {
        let seeds: Vec<u64> = (0..20).collect();
        let times = [0.5, 1.0, 2.0, 4.0];
        let settings = EnsembleSettings { dt: 1e-3, tol: 1e-10, workers: Workers(1) };
        let t = uniform_attractivity_probe(p(-1.0, 1.0), &seeds, 1.0, &times, settings).unwrap();
        for (time, s) in times.iter().zip(&t.sup) {
            assert!(*s <= (-time).exp() * 1.0);
        }
        let zero = uniform_attractivity_probe(p(-1.0, 1.0), &seeds[..3], 0.0, &times, settings).unwrap();
        assert!(zero.sup.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn birkhoff_average_near_second_moment() {
        let path = sample_path(2, GridSpec::new(1e-3, 0.0, 200.0).unwrap()).unwrap();
        let fp = pullback_fixed_point(p(0.0, 1.0), &path, 200.0, 1e-8).unwrap();
        let avg = fp.birkhoff_average(200.0).unwrap();
        assert!((avg - 0.47795).abs() < 0.1, "avg {avg}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn order_preserved(seed in 0u64..500, x in -4.0f64..4.0, dx in 1e-3f64..2.0, alpha in -2.0f64..2.0) {
            let path = sample_path(seed, GridSpec::new(1e-3, 0.0, 2.0).unwrap()).unwrap();
            let a = flow_states(p(alpha, 1.0), &path, x, 0, 2000).unwrap();
            let b = flow_states(p(alpha, 1.0), &path, x + dx, 0, 2000).unwrap();
            for (u, v) in a.iter().zip(&b) {
                prop_assert!(u <= v);
            }
            prop_assert!(a[200] < b[200]);
        }

        #[test]
        fn cocycle_exact_on_grid(seed in 0u64..500, x in -3.0f64..3.0, s in 1i64..1500, t in 1i64..1500) {
            let par = p(0.3, 0.8);
            let path = sample_path(seed, GridSpec::new(1e-3, 0.0, 3.0).unwrap()).unwrap();
            let whole = flow(par, &path, x, 0, s + t).unwrap();
            let mid = flow(par, &path, x, 0, s).unwrap();
            let shifted = path.shift_steps(s).unwrap();
            let split = flow(par, &shifted, mid, 0, t).unwrap();
            prop_assert_eq!(whole, split);
        }

        #[test]
        fn backward_flow_inverts_forward(seed in 0u64..200, x in -2.0f64..2.0) {
            let par = p(-0.5, 1.0);
            let path = sample_path(seed, GridSpec::new(1e-3, 0.0, 1.0).unwrap()).unwrap();
            let y = flow(par, &path, x, 0, 1000).unwrap();
            let back = backward_states(par, &path, y, 1000, 1000).unwrap();
            prop_assert_eq!(back.len(), 1001);
            prop_assert!((back[1000] - x).abs() < 1e-9);
        }
    }
}
