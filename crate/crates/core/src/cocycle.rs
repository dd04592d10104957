//! Linear cocycles `Phi(t, omega)` and finite-time Lyapunov exponents.
//!
//! Variants:
//! - `MatrixFlow`: `Phi(t) = exp(A t)`, autonomous.
//! - `MatrixIid`: products of generators drawn i.i.d. per step, discrete time.
//! - `Pitchfork`: the linearization along the random fixed point,
//!   `Phi(t, omega) = exp(int_0^t (alpha - 3 a(theta_s omega)^2) ds)`.
//! - `RotationTower`: scalar multipliers over the golden-mean rotation.
//! - `Rescaled`: `e^{c t} Phi(t, omega)` for any of the above.
//!
//! A realization is a seed plus a shift `s`, so `Omega { seed, shift: s }`
//! stands for `theta_s omega`. The finite-time exponents are
//! `lambda_max = ln |Phi(T)| / T` and `lambda_min = -ln |Phi(T)^{-1}| / T`
//! with the spectral norm.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensemble::{map_seeds, Workers};
use crate::error::{Error, Result};
use crate::linalg::{log_abs_det, scaled_expm, sorted_svd, ScaledMatrix};
use crate::noise::{counter_uniforms, sample_path, GridSpec};
use crate::numeric::{fmt17, grid_index};
use crate::pitchfork::{pullback_fixed_point_window, FixedPointTrajectory, PitchforkParams, Stepper};
use crate::rotation_tower::RotationTower;

/// Stream family used for generator choices of i.i.d. products.
const IID_DOMAIN: u8 = 1;

#[derive(Debug, Clone, Serialize)]
pub enum CocycleSpec {
    MatrixFlow { a: DMatrix<f64> },
    MatrixIid { generators: Vec<DMatrix<f64>>, probs: Vec<f64> },
    Pitchfork { params: PitchforkParams, dt: f64, tol: f64 },
    RotationTower(RotationTower),
    Rescaled { base: Box<CocycleSpec>, c: f64 },
}

impl CocycleSpec {
    pub fn matrix_flow(a: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || a.nrows() != a.ncols() {
            return Err(Error::InvalidParameter("flow generator must be square and non-empty".into()));
        }
        Ok(CocycleSpec::MatrixFlow { a })
    }

    pub fn diagonal_flow(rates: &[f64]) -> Result<Self> {
        Self::matrix_flow(DMatrix::from_diagonal(&DVector::from_column_slice(rates)))
    }

    /// `Phi(t) = e^{lambda t}` in dimension one.
    pub fn constant_scalar(lambda: f64) -> Self {
        CocycleSpec::MatrixFlow { a: DMatrix::from_element(1, 1, lambda) }
    }

    pub fn matrix_iid(generators: Vec<DMatrix<f64>>, probs: Vec<f64>) -> Result<Self> {
        if generators.is_empty() || generators.len() != probs.len() {
            return Err(Error::InvalidParameter("need one probability per generator".into()));
        }
        let d = generators[0].nrows();
        for (i, g) in generators.iter().enumerate() {
            if g.nrows() != d || g.ncols() != d || d == 0 {
                return Err(Error::InvalidParameter(format!("generator {i} has the wrong shape")));
            }
            log_abs_det(g, i)?;
        }
        if probs.iter().any(|p| !(*p >= 0.0)) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter("probabilities must be non-negative and sum to 1".into()));
        }
        Ok(CocycleSpec::MatrixIid { generators, probs })
    }

    /// Scalar i.i.d. multipliers with equal probabilities.
    pub fn scalar_iid(multipliers: &[f64]) -> Result<Self> {
        let p = 1.0 / multipliers.len() as f64;
        Self::matrix_iid(
            multipliers.iter().map(|m| DMatrix::from_element(1, 1, *m)).collect(),
            vec![p; multipliers.len()],
        )
    }

    /// Independent diagonal blocks, each with equally likely scalar multipliers.
    pub fn diagonal_iid(blocks: &[Vec<f64>]) -> Result<Self> {
        let mut gens = vec![vec![]];
        for block in blocks {
            let mut next = Vec::new();
            for g in &gens {
                for m in block {
                    let mut h: Vec<f64> = g.clone();
                    h.push(*m);
                    next.push(h);
                }
            }
            gens = next;
        }
        let p = 1.0 / gens.len() as f64;
        let n = gens.len();
        Self::matrix_iid(
            gens.into_iter().map(|g| DMatrix::from_diagonal(&DVector::from_vec(g))).collect(),
            vec![p; n],
        )
    }

    pub fn pitchfork(params: PitchforkParams, dt: f64, tol: f64) -> Result<Self> {
        if !(params.sigma > 0.0) || !(dt > 0.0) || !(tol > 0.0) {
            return Err(Error::InvalidParameter("pitchfork cocycle needs sigma, dt, tol > 0".into()));
        }
        Ok(CocycleSpec::Pitchfork { params, dt, tol })
    }

    pub fn rotation_tower(n_max: u32) -> Result<Self> {
        Ok(CocycleSpec::RotationTower(RotationTower::new(n_max)?))
    }

    /// `e^{c t} Phi(t, omega)`.
    pub fn rescaled(self, c: f64) -> Self {
        CocycleSpec::Rescaled { base: Box::new(self), c }
    }

    pub fn dim(&self) -> usize {
        match self {
            CocycleSpec::MatrixFlow { a } => a.nrows(),
            CocycleSpec::MatrixIid { generators, .. } => generators[0].nrows(),
            CocycleSpec::Pitchfork { .. } | CocycleSpec::RotationTower(_) => 1,
            CocycleSpec::Rescaled { base, .. } => base.dim(),
        }
    }

    pub fn is_discrete(&self) -> bool {
        match self {
            CocycleSpec::MatrixIid { .. } | CocycleSpec::RotationTower(_) => true,
            CocycleSpec::Rescaled { base, .. } => base.is_discrete(),
            _ => false,
        }
    }

    /// Smallest time step of the base, used to align shifts and checkpoints.
    pub fn time_step(&self) -> f64 {
        match self {
            CocycleSpec::Pitchfork { dt, .. } => *dt,
            CocycleSpec::Rescaled { base, .. } => base.time_step(),
            _ if self.is_discrete() => 1.0,
            _ => 0.0,
        }
    }

    /// Whether `Phi` depends on `omega` at all.
    pub fn is_random(&self) -> bool {
        match self {
            CocycleSpec::MatrixFlow { .. } => false,
            CocycleSpec::MatrixIid { generators, .. } => generators.len() > 1,
            CocycleSpec::Rescaled { base, .. } => base.is_random(),
            _ => true,
        }
    }

    /// Stable JSON description used for hashing.
    pub fn describe(&self) -> serde_json::Value {
        match self {
            CocycleSpec::RotationTower(t) => serde_json::json!({ "RotationTower": { "n_max": t.n_max } }),
            CocycleSpec::Rescaled { base, c } => serde_json::json!({ "Rescaled": { "base": base.describe(), "c": c } }),
            other => serde_json::to_value(other).unwrap_or(serde_json::Value::Null),
        }
    }
}

/// A realization `theta_shift omega_seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    pub seed: u64,
    pub shift: f64,
}

impl Omega {
    pub fn new(seed: u64) -> Self {
        Omega { seed, shift: 0.0 }
    }

    pub fn shifted(self, s: f64) -> Self {
        Omega { seed: self.seed, shift: self.shift + s }
    }
}

/// `Phi(t, omega)` in log-scaled form.
#[derive(Debug, Clone, Serialize)]
pub struct CocycleValue {
    pub t: f64,
    pub fwd: ScaledMatrix,
    pub inv: ScaledMatrix,
    pub log_abs_det: f64,
    /// Accumulated `ln |R_ii|` from QR re-orthogonalization (discrete variants).
    pub qr_log_diag: Vec<f64>,
}

impl CocycleValue {
    fn identity(d: usize) -> Self {
        CocycleValue {
            t: 0.0,
            fwd: ScaledMatrix::identity(d),
            inv: ScaledMatrix::identity(d),
            log_abs_det: 0.0,
            qr_log_diag: vec![0.0; d],
        }
    }

    fn scalar(t: f64, log_phi: f64) -> Self {
        CocycleValue {
            t,
            fwd: ScaledMatrix::scalar(log_phi, 1.0),
            inv: ScaledMatrix::scalar(-log_phi, 1.0),
            log_abs_det: log_phi,
            qr_log_diag: vec![log_phi],
        }
    }

    pub fn dim(&self) -> usize {
        self.fwd.dim()
    }

    /// `ln` of the singular values, descending. The extremes are computed from
    /// the forward and inverse products separately; a third value in
    /// dimension three comes from the determinant. Beyond that the interior
    /// values come from the normalized forward factor and lose accuracy when
    /// the condition number exceeds about `1e15`.
    pub fn log_singular_values(&self) -> Vec<f64> {
        let d = self.dim();
        if d == 1 {
            return vec![self.fwd.log_scale + self.fwd.m[(0, 0)].abs().ln()];
        }
        let top = self.fwd.log_norm();
        let bottom = -self.inv.log_norm();
        match d {
            2 => vec![top, bottom],
            3 => vec![top, self.log_abs_det - top - bottom, bottom],
            _ => {
                let (s, _, _) = sorted_svd(&self.fwd.m);
                let mut out = vec![top];
                out.extend(s[1..d - 1].iter().map(|v| self.fwd.log_scale + v.ln()));
                out.push(bottom);
                out
            }
        }
    }

    pub fn lambda_max(&self) -> f64 {
        self.fwd.log_norm() / self.t
    }

    pub fn lambda_min(&self) -> f64 {
        -self.inv.log_norm() / self.t
    }

    /// `(1/t) ln(|Phi x| / |x|)`.
    pub fn lambda_dir(&self, x: &DVector<f64>) -> f64 {
        (self.fwd.log_apply_norm(x) - x.norm().ln()) / self.t
    }

    /// Orthonormal basis of the right singular vectors belonging to the `k`
    /// smallest singular values, taken from the inverse product where they
    /// are dominant.
    pub fn contracting_basis(&self, k: usize) -> DMatrix<f64> {
        let d = self.dim();
        if k == 0 {
            return DMatrix::zeros(d, 0);
        }
        if k >= d {
            return DMatrix::identity(d, d);
        }
        let (_, u, _) = sorted_svd(&self.inv.m);
        DMatrix::from_columns(&(0..k).map(|i| u.column(i).into_owned()).collect::<Vec<_>>())
    }

    /// Orthonormal basis of the right singular vectors belonging to the
    /// `d - k` largest singular values.
    pub fn expanding_basis(&self, k: usize) -> DMatrix<f64> {
        let d = self.dim();
        if k >= d {
            return DMatrix::zeros(d, 0);
        }
        if k == 0 {
            return DMatrix::identity(d, d);
        }
        let (_, _, v) = sorted_svd(&self.fwd.m);
        DMatrix::from_columns(&(0..d - k).map(|i| v.column(i).into_owned()).collect::<Vec<_>>())
    }

    fn rescale(&mut self, c: f64) {
        let shift = c * self.t;
        self.fwd.log_scale += shift;
        self.inv.log_scale -= shift;
        self.log_abs_det += self.dim() as f64 * shift;
        for v in &mut self.qr_log_diag {
            *v += shift;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CocycleSample {
    pub omega: Omega,
    pub values: Vec<CocycleValue>,
}

impl CocycleSample {
    /// Extreme log singular values per checkpoint.
    pub fn condition_diagnostics(&self) -> Vec<(f64, f64, f64)> {
        self.values
            .iter()
            .map(|v| {
                let l = v.log_singular_values();
                (v.t, l[0], l[l.len() - 1])
            })
            .collect()
    }
}

fn check_schedule(spec: &CocycleSpec, schedule: &[f64]) -> Result<()> {
    if schedule.iter().any(|t| !(*t >= 0.0)) || schedule.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("checkpoint schedule must be non-negative and increasing".into()));
    }
    let step = spec.time_step();
    if step > 0.0 {
        for &t in schedule {
            grid_index(t, step).ok_or(Error::NotGridAligned { time: t, dt: step })?;
        }
    }
    Ok(())
}

/// The fixed point covering `[shift, shift + horizon]` for a pitchfork realization.
pub fn pitchfork_fixed_point(
    params: PitchforkParams,
    dt: f64,
    tol: f64,
    omega: Omega,
    horizon: f64,
) -> Result<FixedPointTrajectory> {
    let end = omega.shift + horizon;
    let path = sample_path(omega.seed, GridSpec::new(dt, omega.shift.min(0.0), end.max(0.0))?)?;
    pullback_fixed_point_window(
        params,
        &path,
        omega.shift.min(0.0),
        end.max(0.0),
        tol,
        Default::default(),
    )
}

/// `ln Phi(t)` along a stored fixed point by the trapezoid rule on `alpha - 3 a^2`.
pub fn pitchfork_log_phi(params: PitchforkParams, fp: &FixedPointTrajectory, t0: f64, t: f64) -> Result<f64> {
    let k0 = grid_index(t0, fp.dt).ok_or(Error::NotGridAligned { time: t0, dt: fp.dt })?;
    let k1 = grid_index(t0 + t, fp.dt).ok_or(Error::NotGridAligned { time: t0 + t, dt: fp.dt })?;
    Ok(params.alpha * t - 3.0 * fp.integral_sq(k0, k1)?)
}

/// `ln Phi(t)` from the derivative of the discrete step along the fixed point:
/// `alpha t - (3/2) sum ln(1 + 2 a_k^2 h)`.
pub fn pitchfork_log_phi_tangent(params: PitchforkParams, fp: &FixedPointTrajectory, t0: f64, t: f64) -> Result<f64> {
    let k0 = grid_index(t0, fp.dt).ok_or(Error::NotGridAligned { time: t0, dt: fp.dt })?;
    let k1 = grid_index(t0 + t, fp.dt).ok_or(Error::NotGridAligned { time: t0 + t, dt: fp.dt })?;
    let st = Stepper::new(params, fp.dt);
    let v = fp.slice(k0, k1)?;
    Ok(crate::numeric::compensated_sum(v[..v.len() - 1].iter().map(|a| st.derivative(*a).ln())))
}

/// `Phi(T_k, omega)` at each checkpoint of `schedule`.
pub fn evaluate(spec: &CocycleSpec, omega: Omega, schedule: &[f64]) -> Result<CocycleSample> {
    check_schedule(spec, schedule)?;
    let d = spec.dim();
    let values = match spec {
        CocycleSpec::MatrixFlow { a } => {
            let diagonal = a.is_square() && (0..d).all(|i| (0..d).all(|j| i == j || a[(i, j)] == 0.0));
            schedule
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        return CocycleValue::identity(d);
                    }
                    let (fwd, inv) = if diagonal {
                        let rates: Vec<f64> = (0..d).map(|i| a[(i, i)] * t).collect();
                        (diag_scaled(&rates), diag_scaled(&rates.iter().map(|r| -r).collect::<Vec<_>>()))
                    } else {
                        (scaled_expm(a, t), scaled_expm(&(-a), t))
                    };
                    CocycleValue { t, fwd, inv, log_abs_det: a.trace() * t, qr_log_diag: vec![] }
                })
                .collect()
        }
        CocycleSpec::MatrixIid { generators, probs } => evaluate_iid(generators, probs, omega, schedule)?,
        CocycleSpec::Pitchfork { params, dt, tol } => {
            let horizon = schedule.last().copied().unwrap_or(0.0);
            let fp = pitchfork_fixed_point(*params, *dt, *tol, omega, horizon)?;
            schedule
                .iter()
                .map(|&t| {
                    if t == 0.0 {
                        Ok(CocycleValue::identity(1))
                    } else {
                        Ok(CocycleValue::scalar(t, pitchfork_log_phi(*params, &fp, omega.shift, t)?))
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        CocycleSpec::RotationTower(tower) => {
            let shift = grid_index(omega.shift, 1.0).ok_or(Error::NotGridAligned { time: omega.shift, dt: 1.0 })?;
            let x0 = RotationTower::rotate(RotationTower::base_point(omega.seed), shift);
            let mut out = Vec::with_capacity(schedule.len());
            let mut acc = 0.0;
            let mut n = 0i64;
            for &t in schedule {
                let target = t.round() as i64;
                while n < target {
                    acc += tower.log_multiplier(RotationTower::rotate(x0, n));
                    n += 1;
                }
                out.push(if target == 0 { CocycleValue::identity(1) } else { CocycleValue::scalar(t, acc) });
            }
            out
        }
        CocycleSpec::Rescaled { base, c } => {
            let mut s = evaluate(base, omega, schedule)?;
            for v in &mut s.values {
                v.rescale(*c);
            }
            s.values
        }
    };
    Ok(CocycleSample { omega, values })
}

fn diag_scaled(log_entries: &[f64]) -> ScaledMatrix {
    let top = log_entries.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let diag = DVector::from_iterator(log_entries.len(), log_entries.iter().map(|l| (l - top).exp()));
    ScaledMatrix { m: DMatrix::from_diagonal(&diag), log_scale: top }
}

fn evaluate_iid(generators: &[DMatrix<f64>], probs: &[f64], omega: Omega, schedule: &[f64]) -> Result<Vec<CocycleValue>> {
    let d = generators[0].nrows();
    let shift = grid_index(omega.shift, 1.0).ok_or(Error::NotGridAligned { time: omega.shift, dt: 1.0 })?;
    let steps = schedule.last().map(|t| t.round() as usize).unwrap_or(0);
    let inverses: Vec<DMatrix<f64>> = generators
        .iter()
        .enumerate()
        .map(|(i, g)| g.clone().try_inverse().ok_or(Error::SingularMatrix(i)))
        .collect::<Result<_>>()?;
    let log_dets: Vec<f64> = generators.iter().enumerate().map(|(i, g)| log_abs_det(g, i)).collect::<Result<_>>()?;
    let mut cumulative = Vec::with_capacity(probs.len());
    let mut acc = 0.0;
    for p in probs {
        acc += p;
        cumulative.push(acc);
    }
    let uniforms = counter_uniforms(omega.seed, IID_DOMAIN, shift, steps);
    let mut fwd = ScaledMatrix::identity(d);
    let mut inv = ScaledMatrix::identity(d);
    let mut log_det = 0.0;
    let mut q = DMatrix::<f64>::identity(d, d);
    let mut qr_diag = vec![0.0; d];
    let mut out = Vec::with_capacity(schedule.len());
    let mut n = 0usize;
    for &t in schedule {
        let target = t.round() as usize;
        while n < target {
            let u = uniforms[n];
            let idx = cumulative.iter().position(|c| u < *c).unwrap_or(generators.len() - 1);
            fwd.left_mul(&generators[idx]);
            inv.right_mul(&inverses[idx]);
            log_det += log_dets[idx];
            let qr = (&generators[idx] * &q).qr();
            let r = qr.r();
            q = qr.q();
            for (i, v) in qr_diag.iter_mut().enumerate() {
                *v += r[(i, i)].abs().ln();
            }
            n += 1;
        }
        out.push(if target == 0 {
            CocycleValue::identity(d)
        } else {
            CocycleValue { t, fwd: fwd.clone(), inv: inv.clone(), log_abs_det: log_det, qr_log_diag: qr_diag.clone() }
        });
    }
    Ok(out)
}

/// Log singular values at each checkpoint for every seed: `[seed][checkpoint][i]`.
pub fn log_sv_profiles(spec: &CocycleSpec, seeds: &[u64], schedule: &[f64], workers: Workers) -> Result<Vec<Vec<Vec<f64>>>> {
    map_seeds(seeds, workers, |seed| {
        let s = evaluate(spec, Omega::new(seed), schedule)?;
        Ok(s.values.iter().map(|v| v.log_singular_values()).collect())
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FtleEnsemble {
    pub t: f64,
    pub seeds: Vec<u64>,
    pub lmax: Vec<f64>,
    pub lmin: Vec<f64>,
}

impl FtleEnsemble {
    pub fn max_lmax(&self) -> f64 {
        crate::numeric::max(&self.lmax)
    }

    pub fn min_lmin(&self) -> f64 {
        crate::numeric::min(&self.lmin)
    }

    pub fn fraction_lmax_above(&self, threshold: f64) -> (usize, f64) {
        let k = self.lmax.iter().filter(|l| **l > threshold).count();
        (k, k as f64 / self.lmax.len().max(1) as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,T,lmax,lmin\n");
        for i in 0..self.seeds.len() {
            out.push_str(&format!("{},{},{},{}\n", self.seeds[i], fmt17(self.t), fmt17(self.lmax[i]), fmt17(self.lmin[i])));
        }
        out
    }
}

/// Finite-time exponents at horizon `t` for every seed.
pub fn ftle_ensemble(spec: &CocycleSpec, t: f64, seeds: &[u64], workers: Workers) -> Result<FtleEnsemble> {
    if seeds.is_empty() || !(t > 0.0) {
        return Err(Error::InvalidParameter("need at least one seed and T > 0".into()));
    }
    let pairs = map_seeds(seeds, workers, |seed| {
        let s = evaluate(spec, Omega::new(seed), &[t])?;
        let v = &s.values[0];
        Ok((v.lambda_max(), v.lambda_min()))
    })?;
    Ok(FtleEnsemble {
        t,
        seeds: seeds.to_vec(),
        lmax: pairs.iter().map(|p| p.0).collect(),
        lmin: pairs.iter().map(|p| p.1).collect(),
    })
}

/// Block-maximum growth of a sample as the block size doubles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxGrowth {
    /// `(block size, mean of block maxima)`, block sizes increasing.
    pub levels: Vec<(usize, f64)>,
    /// Least-squares slope of the mean block maximum per doubling.
    pub slope: f64,
    pub diverging: bool,
}

/// Slope per doubling above which a sample maximum counts as unbounded.
pub const DIVERGENCE_SLOPE: f64 = 0.05;

/// Mean of maxima over disjoint blocks of size `N / 2^j`, `j = 0..`, down to
/// blocks of 16, and the slope of that mean against `log2` of the block size.
pub fn max_growth(values: &[f64]) -> MaxGrowth {
    let n = values.len();
    let mut levels = Vec::new();
    let mut size = n;
    while size >= 16 {
        let blocks = n / size;
        let means: Vec<f64> = (0..blocks)
            .map(|b| values[b * size..(b + 1) * size].iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        levels.push((size, crate::numeric::mean(&means)));
        size /= 2;
    }
    levels.reverse();
    let slope = if levels.len() >= 2 {
        let xs: Vec<f64> = levels.iter().map(|(s, _)| (*s as f64).log2()).collect();
        let ys: Vec<f64> = levels.iter().map(|(_, m)| *m).collect();
        let mx = crate::numeric::mean(&xs);
        let my = crate::numeric::mean(&ys);
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        num / den
    } else {
        0.0
    };
    MaxGrowth { levels, slope, diverging: slope >= DIVERGENCE_SLOPE }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnestepReport {
    pub n: usize,
    /// Ensemble max of `ln+ |Phi(1)|`.
    pub max_plus: f64,
    /// Ensemble max of `ln+ |Phi(1)^{-1}|`.
    pub max_minus: f64,
    pub growth_plus: MaxGrowth,
    pub growth_minus: MaxGrowth,
    /// Per-seed values, for diagnostics.
    pub plus: Vec<f64>,
    pub minus: Vec<f64>,
}

impl OnestepReport {
    pub fn unbounded_above(&self) -> bool {
        self.growth_plus.diverging
    }

    pub fn unbounded_below(&self) -> bool {
        self.growth_minus.diverging
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("block,mean_max_plus,mean_max_minus\n");
        for (a, b) in self.growth_plus.levels.iter().zip(&self.growth_minus.levels) {
            out.push_str(&format!("{},{},{}\n", a.0, fmt17(a.1), fmt17(b.1)));
        }
        out
    }
}

/// Monte Carlo estimates of `esssup ln+ |Phi(1)|` and `esssup ln+ |Phi(1)^{-1}|`.
pub fn onestep_log_norms(spec: &CocycleSpec, seeds: &[u64], workers: Workers) -> Result<OnestepReport> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("need at least one seed".into()));
    }
    let pairs = map_seeds(seeds, workers, |seed| {
        let s = evaluate(spec, Omega::new(seed), &[1.0])?;
        let v = &s.values[0];
        Ok((v.fwd.log_norm().max(0.0), v.inv.log_norm().max(0.0)))
    })?;
    let plus: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let minus: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(OnestepReport {
        n: seeds.len(),
        max_plus: crate::numeric::max(&plus),
        max_minus: crate::numeric::max(&minus),
        growth_plus: max_growth(&plus),
        growth_minus: max_growth(&minus),
        plus,
        minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::seed_range;
    use proptest::prelude::*;

    fn pf(alpha: f64) -> CocycleSpec {
        CocycleSpec::pitchfork(PitchforkParams::new(alpha, 1.0).unwrap(), 1e-3, 1e-9).unwrap()
    }

    fn dense(v: &CocycleValue) -> DMatrix<f64> {
        v.fwd.to_dense()
    }

    #[test]
    fn single_generator_power() {
        let spec = CocycleSpec::matrix_iid(vec![DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5])], vec![1.0]).unwrap();
        let s = evaluate(&spec, Omega::new(0), &[0.0, 1.0, 5.0, 10.0]).unwrap();
        for v in &s.values {
            let m = dense(v);
            let n = v.t;
            assert!((m[(0, 0)] - 2f64.powf(n)).abs() < 1e-12 * 2f64.powf(n));
            assert!((m[(1, 1)] - 2f64.powf(-n)).abs() < 1e-12);
            assert!(m[(0, 1)].abs() < 1e-300 && m[(1, 0)].abs() < 1e-300);
        }
        assert_eq!(dense(&s.values[0]), DMatrix::identity(2, 2));
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(CocycleSpec::matrix_iid(vec![DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0])], vec![1.0]).is_err());
        assert!(CocycleSpec::scalar_iid(&[2.0, 0.0]).is_err());
        assert!(CocycleSpec::matrix_iid(vec![DMatrix::identity(2, 2)], vec![0.5]).is_err());
        assert!(CocycleSpec::pitchfork(PitchforkParams::new(1.0, 0.0).unwrap(), 1e-3, 1e-8).is_err());
    }

    #[test]
    fn constant_scalar_exponents() {
        let spec = CocycleSpec::constant_scalar(-0.7);
        for t in [0.5, 3.0, 100.0] {
            let e = ftle_ensemble(&spec, t, &seed_range(0, 3), Workers(1)).unwrap();
            for i in 0..3 {
                assert!((e.lmax[i] + 0.7).abs() < 1e-12);
                assert!((e.lmin[i] + 0.7).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn constant_scalar_onestep_is_positive_parts() {
        let r = onestep_log_norms(&CocycleSpec::constant_scalar(-0.7), &seed_range(0, 64), Workers(1)).unwrap();
        assert!((r.max_plus - 0.0).abs() < 1e-12);
        assert!((r.max_minus - 0.7).abs() < 1e-12);
        assert!(!r.unbounded_above() && !r.unbounded_below());
    }

    #[test]
    fn pitchfork_bounded_by_linear_rate() {
        for alpha in [-1.0, 0.5] {
            let s = evaluate(&pf(alpha), Omega::new(3), &[0.5, 1.0, 2.0, 4.0]).unwrap();
            for v in &s.values {
                assert!(v.lambda_max() <= alpha);
            }
        }
    }

    #[test]
    fn pitchfork_negative_alpha_ftle() {
        let e = ftle_ensemble(&pf(-1.0), 5.0, &seed_range(0, 20), Workers(1)).unwrap();
        assert!(e.max_lmax() <= -1.0);
        for i in 0..20 {
            assert!(e.lmin[i] <= e.lmax[i]);
        }
    }

    #[test]
    fn pitchfork_two_routes_agree() {
        let par = PitchforkParams::new(0.3, 1.0).unwrap();
        let fp = pitchfork_fixed_point(par, 1e-3, 1e-10, Omega::new(4), 10.0).unwrap();
        let a = pitchfork_log_phi(par, &fp, 0.0, 10.0).unwrap();
        let b = pitchfork_log_phi_tangent(par, &fp, 0.0, 10.0).unwrap();
        // Left-point sum vs trapezoid plus the O(h) expansion of ln(1 + 2 a^2 h).
        assert!((a - b).abs() < 0.05, "{a} vs {b}");
    }

    #[test]
    fn pitchfork_onestep_bound() {
        let spec = pf(0.5);
        let r = onestep_log_norms(&spec, &seed_range(0, 16), Workers(1)).unwrap();
        for (i, seed) in seed_range(0, 16).into_iter().enumerate() {
            let fp = pitchfork_fixed_point(PitchforkParams::new(0.5, 1.0).unwrap(), 1e-3, 1e-9, Omega::new(seed), 1.0).unwrap();
            let amax = fp.slice(0, 1000).unwrap().iter().map(|a| a * a).fold(0.0, f64::max);
            assert!(r.plus[i] <= 0.5 + 3.0 * amax + 1e-12);
            assert!(r.minus[i] <= 0.5 + 3.0 * amax + 1e-12);
        }
    }

    #[test]
    fn cocycle_identity_matrix() {
        let g1 = DMatrix::from_row_slice(2, 2, &[1.2, 0.3, -0.1, 0.9]);
        let g2 = DMatrix::from_row_slice(2, 2, &[0.7, -0.4, 0.5, 1.1]);
        let spec = CocycleSpec::matrix_iid(vec![g1, g2], vec![0.3, 0.7]).unwrap();
        let (s, t) = (7.0, 9.0);
        let whole = evaluate(&spec, Omega::new(5), &[s + t]).unwrap().values[0].fwd.clone();
        let first = evaluate(&spec, Omega::new(5), &[s]).unwrap().values[0].fwd.clone();
        let second = evaluate(&spec, Omega::new(5).shifted(s), &[t]).unwrap().values[0].fwd.clone();
        let prod = second.mul(&first);
        let rel = (whole.to_dense() - prod.to_dense()).norm() / whole.to_dense().norm();
        assert!(rel <= 1e-6, "rel {rel}");
    }

    #[test]
    fn cocycle_identity_scalar_pitchfork() {
        let spec = pf(0.4);
        let (s, t) = (1.5, 2.5);
        let whole = evaluate(&spec, Omega::new(8), &[s + t]).unwrap().values[0].fwd.log_scale;
        let first = evaluate(&spec, Omega::new(8), &[s]).unwrap().values[0].fwd.log_scale;
        let second = evaluate(&spec, Omega::new(8).shifted(s), &[t]).unwrap().values[0].fwd.log_scale;
        let rel = ((first + second) - whole).exp() - 1.0;
        assert!(rel.abs() <= 1e-8, "rel {rel}");
    }

    #[test]
    fn flow_singular_values_exact() {
        let spec = CocycleSpec::diagonal_flow(&[-1.0, 1.0]).unwrap();
        let s = evaluate(&spec, Omega::new(0), &[1000.0]).unwrap();
        let l = s.values[0].log_singular_values();
        assert!((l[0] - 1000.0).abs() < 1e-9 && (l[1] + 1000.0).abs() < 1e-9);
        let rot = CocycleSpec::matrix_flow(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])).unwrap();
        let r = evaluate(&rot, Omega::new(0), &[1.0]).unwrap();
        let m = r.values[0].fwd.to_dense();
        assert!((m[(0, 0)] - 1f64.cos()).abs() < 1e-12 && (m[(0, 1)] - 1f64.sin()).abs() < 1e-12);
    }

    #[test]
    fn three_dimensional_middle_value() {
        let spec = CocycleSpec::diagonal_flow(&[-2.0, 0.5, 3.0]).unwrap();
        let l = evaluate(&spec, Omega::new(0), &[200.0]).unwrap().values[0].log_singular_values();
        assert!((l[0] - 600.0).abs() < 1e-8 && (l[1] - 100.0).abs() < 1e-8 && (l[2] + 400.0).abs() < 1e-8);
    }

    #[test]
    fn qr_diagonals_match_exponents_for_diagonal_products() {
        let spec = CocycleSpec::diagonal_iid(&[vec![2.0, 0.5], vec![8.0, 4.0]]).unwrap();
        let v = &evaluate(&spec, Omega::new(2), &[50.0]).unwrap().values[0];
        let l = v.log_singular_values();
        let mut q = v.qr_log_diag.clone();
        q.sort_by(|a, b| b.total_cmp(a));
        assert!((l[0] - q[0]).abs() < 1e-9 && (l[1] - q[1]).abs() < 1e-9);
        assert!((v.log_abs_det - (l[0] + l[1])).abs() < 1e-9);
    }

    #[test]
    fn rotation_tower_ftle_and_onestep() {
        let spec = CocycleSpec::rotation_tower(50).unwrap();
        let e = ftle_ensemble(&spec, 10.0, &seed_range(0, 2000), Workers(1)).unwrap();
        assert!(e.max_lmax() <= 1e-12);
        let r = onestep_log_norms(&spec, &seed_range(0, 2000), Workers(1)).unwrap();
        assert!(r.max_plus >= 2f64.ln());
    }

    #[test]
    fn rescaling_shifts_exponents() {
        let base = CocycleSpec::scalar_iid(&[2.0, 0.5]).unwrap();
        let e0 = ftle_ensemble(&base, 8.0, &seed_range(0, 50), Workers(1)).unwrap();
        let e1 = ftle_ensemble(&base.rescaled(3f64.ln()), 8.0, &seed_range(0, 50), Workers(1)).unwrap();
        for i in 0..50 {
            assert!((e1.lmax[i] - e0.lmax[i] - 3f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn block_max_growth_detects_unbounded_tails() {
        let bounded: Vec<f64> = (0..4096).map(|i| ((i * 7919) % 4096) as f64 / 4096.0).collect();
        assert!(!max_growth(&bounded).diverging);
        let heavy: Vec<f64> = (1..=4096).map(|i| -((((i * 7919) % 4096) as f64 + 0.5) / 4096.0).ln()).collect();
        assert!(max_growth(&heavy).diverging);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn directional_exponents_between_extremes(seed in 0u64..1000, a in -1.0f64..1.0, b in -1.0f64..1.0, c in -1.0f64..1.0, d in -1.0f64..1.0) {
            let g1 = DMatrix::from_row_slice(2, 2, &[1.5 + a, b, c, 0.8 + d]);
            let g2 = DMatrix::from_row_slice(2, 2, &[0.6, 0.9, -0.4, 1.3]);
            prop_assume!(g1.determinant().abs() > 0.1);
            let spec = CocycleSpec::matrix_iid(vec![g1, g2], vec![0.5, 0.5]).unwrap();
            let v = &evaluate(&spec, Omega::new(seed), &[12.0]).unwrap().values[0];
            for k in 0..100 {
                let th = k as f64 * 0.0314159 * 2.0 + 0.1;
                let x = DVector::from_vec(vec![th.cos(), th.sin()]);
                let l = v.lambda_dir(&x);
                prop_assert!(l <= v.lambda_max() + 1e-10);
                prop_assert!(l >= v.lambda_min() - 1e-10);
            }
        }

        #[test]
        fn iid_cocycle_identity(seed in 0u64..1000, s in 1u32..20, t in 1u32..20) {
            let g1 = DMatrix::from_row_slice(2, 2, &[1.1, 0.2, 0.0, 0.7]);
            let g2 = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.3, 1.2]);
            let spec = CocycleSpec::matrix_iid(vec![g1, g2], vec![0.5, 0.5]).unwrap();
            let (s, t) = (s as f64, t as f64);
            let whole = evaluate(&spec, Omega::new(seed), &[s + t]).unwrap().values[0].fwd.to_dense();
            let first = evaluate(&spec, Omega::new(seed), &[s]).unwrap().values[0].fwd.clone();
            let second = evaluate(&spec, Omega::new(seed).shifted(s), &[t]).unwrap().values[0].fwd.clone();
            let prod = second.mul(&first).to_dense();
            prop_assert!((whole.clone() - prod).norm() <= 1e-10 * whole.norm());
        }
    }
}
