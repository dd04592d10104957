//! Stationary density of the pitchfork diffusion and its moments.
//!
//! The density is `p(x) = N exp(V(x))` with `V(x) = (alpha x^2 - x^4 / 2) / sigma^2`.
//! The Lyapunov exponent of the random fixed point has two expressions,
//!
//! ```text
//! lambda = -(2 / sigma^2) int (alpha x - x^3)^2 p dx = alpha - 3 E[x^2],
//! ```
//!
//! equal by integration by parts: with `f = alpha x - x^3` and
//! `p' = (2 f / sigma^2) p`, `int f^2 p = (sigma^2 / 2) int f p' = -(sigma^2 / 2) int f' p`,
//! and `E[f'] = alpha - 3 E[x^2]`. Integrals run over `[-L, L]` where `V`
//! has dropped 60 nats below its maximum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::fmt17;
use crate::pitchfork::PitchforkParams;
use crate::quadrature::{integrate_with_breaks, QuadOptions};

/// Drop of the exponent, in nats, at which the domain is truncated.
pub const TRUNCATION_NATS: f64 = 60.0;

/// Tolerance on the agreement of the two exponent formulas.
pub const IDENTITY_TOL: f64 = 1e-8;

fn require_noise(params: &PitchforkParams) -> Result<()> {
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParameter("stationary density needs sigma > 0".into()));
    }
    Ok(())
}

/// Exponent `V(x)`.
pub fn exponent(params: &PitchforkParams, x: f64) -> f64 {
    let x2 = x * x;
    (params.alpha * x2 - 0.5 * x2 * x2) / (params.sigma * params.sigma)
}

/// Maximum of `V` over the real line.
pub fn exponent_max(params: &PitchforkParams) -> f64 {
    if params.alpha > 0.0 {
        0.5 * params.alpha * params.alpha / (params.sigma * params.sigma)
    } else {
        0.0
    }
}

/// Half-width `L` of the truncated domain.
pub fn truncation_radius(params: &PitchforkParams) -> f64 {
    let (a, s) = (params.alpha, params.sigma);
    let u = if a > 0.0 {
        a + (2.0 * TRUNCATION_NATS).sqrt() * s
    } else {
        a + (a * a + 2.0 * TRUNCATION_NATS * s * s).sqrt()
    };
    u.sqrt()
}

/// Locations of the density maxima.
pub fn modes(params: &PitchforkParams) -> Vec<f64> {
    if params.alpha > 0.0 {
        let m = params.alpha.sqrt();
        vec![-m, m]
    } else {
        vec![0.0]
    }
}

/// `int_{-L}^{L} h(x) e^{V(x) - max V} dx` for an even `h`, with error estimate.
fn weighted_even<H: Fn(f64) -> f64>(params: &PitchforkParams, h: H) -> Result<(f64, f64)> {
    let vmax = exponent_max(params);
    let l = truncation_radius(params);
    let mut breaks = vec![0.0];
    if params.alpha > 0.0 {
        breaks.push(params.alpha.sqrt());
    }
    breaks.push(l);
    let opts = QuadOptions { abs_tol: 1e-300, rel_tol: 1e-14, max_intervals: 4000 };
    let r = integrate_with_breaks(|x| h(x) * (exponent(params, x) - vmax).exp(), &breaks, opts)?;
    Ok((2.0 * r.value, 2.0 * r.error))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityProfile {
    pub params: PitchforkParams,
    /// `ln N`, so that `p(x) = exp(ln N + V(x))`.
    pub log_norm: f64,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// Relative error estimate of the normalizing integral.
    pub quad_error: f64,
}

impl DensityProfile {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,p\n");
        for (x, p) in self.x.iter().zip(&self.p) {
            out.push_str(&format!("{},{}\n", fmt17(*x), fmt17(*p)));
        }
        out
    }
}

/// `ln N` and the relative quadrature error of the normalizer.
pub fn log_normalizer(params: &PitchforkParams) -> Result<(f64, f64)> {
    require_noise(params)?;
    let (z, err) = weighted_even(params, |_| 1.0)?;
    Ok((-(z.ln()) - exponent_max(params), err / z))
}

/// Density values on `x_grid`.
pub fn stationary_density(params: PitchforkParams, x_grid: &[f64]) -> Result<DensityProfile> {
    let (log_norm, quad_error) = log_normalizer(&params)?;
    let p = x_grid.iter().map(|&x| (log_norm + exponent(&params, x)).exp()).collect();
    Ok(DensityProfile { params, log_norm, x: x_grid.to_vec(), p, quad_error })
}

/// `E[x^k]` under the stationary density; odd `k` gives 0.
pub fn moment(params: PitchforkParams, k: u32) -> Result<f64> {
    require_noise(&params)?;
    if k % 2 == 1 {
        return Ok(0.0);
    }
    if k == 0 {
        return Ok(1.0);
    }
    let (z, _) = weighted_even(&params, |_| 1.0)?;
    let (m, _) = weighted_even(&params, |x| x.powi(k as i32))?;
    Ok(m / z)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub alpha: f64,
    pub sigma: f64,
    pub ex2: f64,
    /// `alpha - 3 E[x^2]`, the reported value.
    pub lambda: f64,
    /// `-(2 / sigma^2) int (alpha x - x^3)^2 p`.
    pub lambda_integral: f64,
    pub discrepancy: f64,
}

/// Lyapunov exponent of the random fixed point, cross-checked by both formulas.
pub fn lyapunov_quadrature(params: PitchforkParams) -> Result<LyapunovEstimate> {
    require_noise(&params)?;
    let (z, _) = weighted_even(&params, |_| 1.0)?;
    let (m2, _) = weighted_even(&params, |x| x * x)?;
    let a = params.alpha;
    let (f2, _) = weighted_even(&params, |x| {
        let f = a * x - x * x * x;
        f * f
    })?;
    let ex2 = m2 / z;
    let lambda = a - 3.0 * ex2;
    let lambda_integral = -2.0 / (params.sigma * params.sigma) * f2 / z;
    let discrepancy = (lambda - lambda_integral).abs();
    if discrepancy > IDENTITY_TOL {
        return Err(Error::IdentityViolation(format!(
            "alpha - 3E[x^2] = {lambda} but the integral form gives {lambda_integral} (alpha = {a}, sigma = {})",
            params.sigma
        )));
    }
    Ok(LyapunovEstimate { alpha: a, sigma: params.sigma, ex2, lambda, lambda_integral, discrepancy })
}

/// Sweep table rows over a parameter grid.
pub fn sweep(alphas: &[f64], sigmas: &[f64]) -> Result<Vec<LyapunovEstimate>> {
    let mut rows = Vec::with_capacity(alphas.len() * sigmas.len());
    for &s in sigmas {
        for &a in alphas {
            rows.push(lyapunov_quadrature(PitchforkParams::new(a, s)?)?);
        }
    }
    Ok(rows)
}

pub fn sweep_csv(rows: &[LyapunovEstimate]) -> String {
    let mut out = String::from("alpha,sigma,Ex2,lambda\n");
    for r in rows {
        out.push_str(&format!("{},{},{},{}\n", fmt17(r.alpha), fmt17(r.sigma), fmt17(r.ex2), fmt17(r.lambda)));
    }
    out
}
