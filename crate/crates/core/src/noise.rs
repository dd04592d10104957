//! Two-sided discretized Wiener paths and the Wiener shift.
//!
//! A path is stored in an absolute frame `V[i] = W(i dt)` with `V[0] = 0`.
//! A [`NoisePath`] is a view of that frame re-based at an origin index `o`:
//!
//! ```text
//! (theta_s w)(k dt) = V[o + k] - V[o],    o = s / dt.
//! ```
//!
//! Shifting only moves `o`, so `theta_0 = id` and
//! `theta_t theta_s = theta_{s+t}` hold exactly, bit for bit.
//!
//! Increments come from counter-based streams: fine step `f` belongs to block
//! `b = floor(f / BLOCK_LEN)`, and block `b` is drawn from a ChaCha8 generator
//! seeded with the root seed on stream `zigzag(b)`. Any window, in any order of
//! extension, therefore regenerates the same numbers.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{fmt17, grid_index};

/// Number of fine increments drawn from one counter-based stream.
pub const BLOCK_LEN: i64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dt: f64,
    pub t_min: f64,
    pub t_max: f64,
}

impl GridSpec {
    pub fn new(dt: f64, t_min: f64, t_max: f64) -> Result<Self> {
        let g = GridSpec { dt, t_min, t_max };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidGrid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_min <= 0.0) {
            return Err(Error::InvalidGrid(format!("t_min must be <= 0, got {}", self.t_min)));
        }
        if !(self.t_max >= 0.0) {
            return Err(Error::InvalidGrid(format!("t_max must be >= 0, got {}", self.t_max)));
        }
        Ok(())
    }

    fn index_bounds(&self) -> Result<(i64, i64)> {
        let lo = grid_index(self.t_min, self.dt).ok_or(Error::NotGridAligned {
            time: self.t_min,
            dt: self.dt,
        })?;
        let hi = grid_index(self.t_max, self.dt).ok_or(Error::NotGridAligned {
            time: self.t_max,
            dt: self.dt,
        })?;
        Ok((lo, hi))
    }
}

/// Everything needed to regenerate a path bit-identically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub root_seed: u64,
    /// Fine generator steps per grid step.
    pub substeps: u32,
    /// Absolute grid index range that has been materialized.
    pub lo: i64,
    pub hi: i64,
    /// Steps added by each left extension, in order.
    pub left_extensions: Vec<i64>,
    /// Steps added by each right extension, in order.
    pub right_extensions: Vec<i64>,
}

#[derive(Debug)]
struct PathData {
    dt: f64,
    lo: i64,
    /// `values[i - lo] = V[i]` for `i in lo..=hi`.
    values: Vec<f64>,
    /// `increments[i - lo] = V[i+1] - V[i]` as generated, for `i in lo..hi`.
    increments: Vec<f64>,
    lineage: SeedLineage,
}

impl PathData {
    fn hi(&self) -> i64 {
        self.lo + self.values.len() as i64 - 1
    }
}

/// A handle on `theta_s w` for one materialized Wiener path.
#[derive(Debug, Clone)]
pub struct NoisePath {
    data: Arc<PathData>,
    origin: i64,
}

fn zigzag(b: i64) -> u64 {
    ((b << 1) ^ (b >> 63)) as u64
}

/// Grid increments for absolute grid steps `j0..j1`.
fn generate_increments(seed: u64, dt: f64, substeps: u32, j0: i64, j1: i64) -> Vec<f64> {
    let m = substeps as i64;
    let fine_dt = dt / substeps as f64;
    let scale = fine_dt.sqrt();
    let f0 = j0 * m;
    let f1 = j1 * m;
    let mut fine = Vec::with_capacity((f1 - f0).max(0) as usize);
    let mut f = f0;
    while f < f1 {
        let b = f.div_euclid(BLOCK_LEN);
        let start = b * BLOCK_LEN;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(zigzag(b));
        let stop = (start + BLOCK_LEN).min(f1);
        for pos in start..stop {
            let z: f64 = StandardNormal.sample(&mut rng);
            if pos >= f {
                fine.push(scale * z);
            }
        }
        f = stop;
    }
    fine.chunks(m as usize)
        .map(|c| c.iter().fold(0.0, |acc, v| acc + v))
        .collect()
}

/// Counter-based uniform draws in `[0, 1)` for positions `start..start + count`
/// of an independent stream family tagged by `domain`. Domain 0 is the
/// Wiener increment family and is rejected here.
pub fn counter_uniforms(seed: u64, domain: u8, start: i64, count: usize) -> Vec<f64> {
    use rand::Rng;
    assert!(domain != 0, "domain 0 is reserved for Wiener increments");
    let end = start + count as i64;
    let mut out = Vec::with_capacity(count);
    let mut f = start;
    while f < end {
        let b = f.div_euclid(BLOCK_LEN);
        let first = b * BLOCK_LEN;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((domain as u64) << 56) | (zigzag(b) & ((1u64 << 56) - 1)));
        let stop = (first + BLOCK_LEN).min(end);
        for pos in first..stop {
            let u: f64 = rng.random();
            if pos >= f {
                out.push(u);
            }
        }
        f = stop;
    }
    out
}

/// Sample a Wiener path on `grid` with one normal draw per step.
pub fn sample_path(seed: u64, grid: GridSpec) -> Result<NoisePath> {
    sample_path_refined(seed, grid, 1)
}

/// Sample a Wiener path whose grid increments are sums of `substeps` finer
/// increments. Paths with `(dt, m)` and `(dt / m, 1)` share one Brownian
/// realization, which couples runs at different step sizes.
pub fn sample_path_refined(seed: u64, grid: GridSpec, substeps: u32) -> Result<NoisePath> {
    grid.validate()?;
    if substeps == 0 {
        return Err(Error::InvalidParameter("substeps must be >= 1".into()));
    }
    let (lo, hi) = grid.index_bounds()?;
    let increments = generate_increments(seed, grid.dt, substeps, lo, hi);
    let mut values = vec![0.0; (hi - lo + 1) as usize];
    let zero = (-lo) as usize;
    for i in zero..(hi - lo) as usize {
        values[i + 1] = values[i] + increments[i];
    }
    for i in (0..zero).rev() {
        values[i] = values[i + 1] - increments[i];
    }
    let lineage = SeedLineage {
        root_seed: seed,
        substeps,
        lo,
        hi,
        left_extensions: vec![],
        right_extensions: vec![],
    };
    Ok(NoisePath {
        data: Arc::new(PathData { dt: grid.dt, lo, values, increments, lineage }),
        origin: 0,
    })
}

impl NoisePath {
    /// Rebuild a path from its lineage alone.
    pub fn regenerate(lineage: &SeedLineage, dt: f64) -> Result<NoisePath> {
        let mut lo = lineage.lo;
        let mut hi = lineage.hi;
        for s in &lineage.left_extensions {
            lo += s;
        }
        for s in &lineage.right_extensions {
            hi -= s;
        }
        let grid = GridSpec::new(dt, lo as f64 * dt, hi as f64 * dt)?;
        let mut p = sample_path_refined(lineage.root_seed, grid, lineage.substeps)?;
        for s in &lineage.left_extensions {
            p = p.extend_left(*s as f64 * dt)?;
        }
        for s in &lineage.right_extensions {
            p = p.extend_right(*s as f64 * dt)?;
        }
        Ok(p)
    }

    pub fn dt(&self) -> f64 {
        self.data.dt
    }

    pub fn lineage(&self) -> &SeedLineage {
        &self.data.lineage
    }

    pub fn seed(&self) -> u64 {
        self.data.lineage.root_seed
    }

    /// Smallest grid index (relative to the current origin) that is available.
    pub fn k_min(&self) -> i64 {
        self.data.lo - self.origin
    }

    /// Largest grid index (relative to the current origin) that is available.
    pub fn k_max(&self) -> i64 {
        self.data.hi() - self.origin
    }

    pub fn t_min(&self) -> f64 {
        self.k_min() as f64 * self.data.dt
    }

    pub fn t_max(&self) -> f64 {
        self.k_max() as f64 * self.data.dt
    }

    pub fn len(&self) -> usize {
        self.data.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.values.is_empty()
    }

    /// Grid index of `t` relative to the current origin.
    pub fn index_of(&self, t: f64) -> Result<i64> {
        grid_index(t, self.data.dt).ok_or(Error::NotGridAligned { time: t, dt: self.data.dt })
    }

    fn window_error(&self, k0: i64, k1: i64) -> Error {
        let dt = self.data.dt;
        Error::WindowViolation {
            requested_min: k0 as f64 * dt,
            requested_max: k1 as f64 * dt,
            available_min: self.t_min(),
            available_max: self.t_max(),
        }
    }

    /// Check that grid indices `k0..=k1` are materialized.
    pub fn require(&self, k0: i64, k1: i64) -> Result<()> {
        if k0 < self.k_min() || k1 > self.k_max() {
            return Err(self.window_error(k0, k1));
        }
        Ok(())
    }

    /// `(theta_s w)(k dt)`.
    pub fn value(&self, k: i64) -> Result<f64> {
        self.require(k, k)?;
        let base = self.data.values[(self.origin - self.data.lo) as usize];
        Ok(self.data.values[(self.origin + k - self.data.lo) as usize] - base)
    }

    /// Value at a grid-aligned time.
    pub fn value_at_grid(&self, t: f64) -> Result<f64> {
        self.value(self.index_of(t)?)
    }

    /// Value at an arbitrary time, linear between grid points.
    pub fn value_at(&self, t: f64) -> Result<f64> {
        let dt = self.data.dt;
        let q = t / dt;
        let k = q.floor() as i64;
        if let Some(exact) = grid_index(t, dt) {
            return self.value(exact);
        }
        let w = q - k as f64;
        Ok((1.0 - w) * self.value(k)? + w * self.value(k + 1)?)
    }

    /// Increment over step `k`, i.e. `W((k+1) dt) - W(k dt)` as generated.
    pub fn increment(&self, k: i64) -> Result<f64> {
        self.require(k, k + 1)?;
        Ok(self.data.increments[(self.origin + k - self.data.lo) as usize])
    }

    /// Increments for steps `k0..k1`.
    pub fn increments(&self, k0: i64, k1: i64) -> Result<&[f64]> {
        self.require(k0, k1)?;
        let a = (self.origin + k0 - self.data.lo) as usize;
        let b = (self.origin + k1 - self.data.lo) as usize;
        Ok(&self.data.increments[a..b])
    }

    /// Values `(theta_s w)(k dt)` for `k in k0..=k1`.
    pub fn values(&self, k0: i64, k1: i64) -> Result<Vec<f64>> {
        self.require(k0, k1)?;
        let base = self.data.values[(self.origin - self.data.lo) as usize];
        let a = (self.origin + k0 - self.data.lo) as usize;
        let b = (self.origin + k1 - self.data.lo) as usize;
        Ok(self.data.values[a..=b].iter().map(|v| v - base).collect())
    }

    /// `theta_s w` by grid index.
    pub fn shift_steps(&self, k: i64) -> Result<NoisePath> {
        self.require(k, k)?;
        Ok(NoisePath { data: Arc::clone(&self.data), origin: self.origin + k })
    }

    /// `theta_s w`; `s` must be a grid multiple inside the window.
    pub fn shift(&self, s: f64) -> Result<NoisePath> {
        self.shift_steps(self.index_of(s)?)
    }

    /// Extend the window to the left by `delta` time units.
    pub fn extend_left(&self, delta: f64) -> Result<NoisePath> {
        let steps = self.positive_steps(delta)?;
        let d = &*self.data;
        let new_lo = d.lo - steps;
        let fresh = generate_increments(d.lineage.root_seed, d.dt, d.lineage.substeps, new_lo, d.lo);
        let mut values = vec![0.0; steps as usize];
        values.extend_from_slice(&d.values);
        for i in (0..steps as usize).rev() {
            values[i] = values[i + 1] - fresh[i];
        }
        let mut increments = fresh;
        increments.extend_from_slice(&d.increments);
        let mut lineage = d.lineage.clone();
        lineage.lo = new_lo;
        lineage.left_extensions.push(steps);
        Ok(NoisePath {
            data: Arc::new(PathData { dt: d.dt, lo: new_lo, values, increments, lineage }),
            origin: self.origin,
        })
    }

    /// Extend the window to the right by `delta` time units.
    pub fn extend_right(&self, delta: f64) -> Result<NoisePath> {
        let steps = self.positive_steps(delta)?;
        let d = &*self.data;
        let hi = d.hi();
        let fresh = generate_increments(d.lineage.root_seed, d.dt, d.lineage.substeps, hi, hi + steps);
        let mut values = d.values.clone();
        values.reserve(steps as usize);
        for inc in &fresh {
            let last = *values.last().expect("non-empty path");
            values.push(last + inc);
        }
        let mut increments = d.increments.clone();
        increments.extend_from_slice(&fresh);
        let mut lineage = d.lineage.clone();
        lineage.hi = hi + steps;
        lineage.right_extensions.push(steps);
        Ok(NoisePath {
            data: Arc::new(PathData { dt: d.dt, lo: d.lo, values, increments, lineage }),
            origin: self.origin,
        })
    }

    /// Extend on either side so that relative indices `k0..=k1` are available.
    pub fn ensure_window(&self, k0: i64, k1: i64) -> Result<NoisePath> {
        let dt = self.data.dt;
        let mut p = self.clone();
        if k0 < p.k_min() {
            p = p.extend_left((p.k_min() - k0) as f64 * dt)?;
        }
        if k1 > p.k_max() {
            p = p.extend_right((k1 - p.k_max()) as f64 * dt)?;
        }
        Ok(p)
    }

    fn positive_steps(&self, delta: f64) -> Result<i64> {
        let steps = self.index_of(delta)?;
        if steps <= 0 {
            return Err(Error::InvalidParameter(format!("extension must be positive, got {delta}")));
        }
        Ok(steps)
    }

    /// CSV dump `t,w` of the current view.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,w\n");
        let dt = self.data.dt;
        for k in self.k_min()..=self.k_max() {
            let v = self.value(k).expect("index inside window");
            out.push_str(&format!("{},{}\n", fmt17(k as f64 * dt), fmt17(v)));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid(dt: f64, a: f64, b: f64) -> GridSpec {
        GridSpec::new(dt, a, b).unwrap()
    }

    #[test]
    fn sample_has_expected_size_and_pin() {
        let p = sample_path(7, grid(0.01, -1.0, 1.0)).unwrap();
        assert_eq!(p.len(), 201);
        assert_eq!(p.value(0).unwrap(), 0.0);
        assert_eq!(p.k_min(), -100);
        assert_eq!(p.k_max(), 100);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(GridSpec::new(0.0, -1.0, 1.0).is_err());
        assert!(GridSpec::new(0.1, 0.5, 1.0).is_err());
        assert!(GridSpec::new(0.1, -1.0, -0.5).is_err());
        assert!(sample_path(1, GridSpec { dt: 0.3, t_min: -1.0, t_max: 1.0 }).is_err());
    }

    #[test]
    fn deterministic() {
        let g = grid(0.01, -2.0, 3.0);
        let a = sample_path(11, g).unwrap().values(-200, 300).unwrap();
        let b = sample_path(11, g).unwrap().values(-200, 300).unwrap();
        assert_eq!(a, b);
        let c = sample_path(12, g).unwrap().values(-200, 300).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn shift_identity_and_algebra() {
        let p = sample_path(3, grid(0.01, -2.0, 2.0)).unwrap();
        let q = p.shift(0.0).unwrap();
        assert_eq!(p.values(-200, 200).unwrap(), q.values(-200, 200).unwrap());
        let s = p.shift(0.5).unwrap();
        assert_eq!(s.value_at_grid(-0.5).unwrap(), -p.value_at_grid(0.5).unwrap());
        assert_eq!(s.value(0).unwrap(), 0.0);
    }

    #[test]
    fn shift_outside_window_fails() {
        let p = sample_path(3, grid(0.01, -1.0, 1.0)).unwrap();
        assert!(matches!(p.shift(1.5), Err(Error::WindowViolation { .. })));
        assert!(matches!(p.shift(0.005), Err(Error::NotGridAligned { .. })));
    }

    #[test]
    fn extension_preserves_and_is_reproducible() {
        let p = sample_path(5, grid(0.01, -1.0, 1.0)).unwrap();
        let before = p.values(-100, 100).unwrap();
        let once = p.extend_left(2.0).unwrap();
        let twice = p.extend_left(1.0).unwrap().extend_left(1.0).unwrap();
        assert_eq!(once.values(-100, 100).unwrap(), before);
        assert_eq!(once.values(-300, 100).unwrap(), twice.values(-300, 100).unwrap());
        let direct = sample_path(5, grid(0.01, -3.0, 1.0)).unwrap();
        assert_eq!(direct.values(-300, 100).unwrap(), once.values(-300, 100).unwrap());
        let shifted = once.shift(-1.0).unwrap();
        assert_eq!(shifted.value(0).unwrap(), 0.0);
    }

    #[test]
    fn right_extension_matches_direct_sampling() {
        let p = sample_path(9, grid(0.01, -0.5, 0.5)).unwrap().extend_right(5.0).unwrap();
        let q = sample_path(9, grid(0.01, -0.5, 5.5)).unwrap();
        assert_eq!(p.values(-50, 550).unwrap(), q.values(-50, 550).unwrap());
    }

    #[test]
    fn regenerates_from_lineage() {
        let p = sample_path(21, grid(0.01, -1.0, 1.0))
            .unwrap()
            .extend_left(3.0)
            .unwrap()
            .extend_right(0.5)
            .unwrap();
        let q = NoisePath::regenerate(p.lineage(), p.dt()).unwrap();
        assert_eq!(p.values(-400, 150).unwrap(), q.values(-400, 150).unwrap());
    }

    #[test]
    fn refined_paths_share_the_realization() {
        let coarse = sample_path_refined(4, grid(0.002, -1.0, 1.0), 2).unwrap();
        let fine = sample_path(4, grid(0.001, -1.0, 1.0)).unwrap();
        for k in -500..=500 {
            let a = coarse.value(k).unwrap();
            let b = fine.value(2 * k).unwrap();
            assert!((a - b).abs() < 1e-12, "k={k} {a} {b}");
        }
    }

    #[test]
    fn variance_of_w1() {
        let n = 10_000;
        let g = grid(0.01, 0.0, 1.0);
        let vals: Vec<f64> = (0..n)
            .map(|s| sample_path(s as u64, g).unwrap().value(100).unwrap())
            .collect();
        let var = crate::numeric::variance(&vals);
        assert!((var - 1.0).abs() <= 3.0 * 2f64.sqrt() / 100.0, "var {var}");
    }

    fn ks_normal(mut xs: Vec<f64>, sd: f64) -> f64 {
        use statrs::distribution::{ContinuousCDF, Normal};
        let nd = Normal::new(0.0, sd).unwrap();
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, x)| {
                let c = nd.cdf(*x);
                (c - i as f64 / n).abs().max(((i + 1) as f64 / n - c).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn shifted_increments_are_normal() {
        let dt = 0.01;
        let p = sample_path(2024, grid(dt, -600.0, 1000.0)).unwrap();
        let s = p.shift(-500.0).unwrap();
        let inc = s.increments(0, 100_000).unwrap().to_vec();
        let d = ks_normal(inc, dt.sqrt());
        // Asymptotic Kolmogorov critical value at level 0.01.
        assert!(d < 1.628 / (1e5f64).sqrt(), "KS statistic {d}");
    }

    #[test]
    fn interpolation_between_grid_points() {
        let p = sample_path(1, grid(0.1, -1.0, 1.0)).unwrap();
        let mid = p.value_at(0.25).unwrap();
        let expect = 0.5 * (p.value(2).unwrap() + p.value(3).unwrap());
        assert!((mid - expect).abs() < 1e-12);
    }

    #[test]
    fn counter_uniforms_are_windowed_consistently() {
        let all = counter_uniforms(5, 1, -10, 9000);
        let part = counter_uniforms(5, 1, 4000, 100);
        assert_eq!(&all[4010..4110], &part[..]);
        let other = counter_uniforms(5, 2, 4000, 100);
        assert_ne!(part, other);
        assert!(all.iter().all(|u| (0.0..1.0).contains(u)));
    }

    #[test]
    fn csv_header_and_rows() {
        let p = sample_path(1, grid(0.5, -1.0, 1.0)).unwrap();
        let csv = p.to_csv();
        assert!(csv.starts_with("t,w\n"));
        assert_eq!(csv.lines().count(), 6);
    }

    proptest! {
        #[test]
        fn shift_flow_property_is_exact(seed in 0u64..1000, s in -300i64..300, t in -300i64..300) {
            let p = sample_path(seed, grid(0.01, -8.0, 8.0)).unwrap();
            let a = p.shift_steps(s).unwrap().shift_steps(t).unwrap();
            let b = p.shift_steps(s + t).unwrap();
            let lo = a.k_min().max(b.k_min());
            let hi = a.k_max().min(b.k_max());
            prop_assert_eq!(a.values(lo, hi).unwrap(), b.values(lo, hi).unwrap());
        }

        #[test]
        fn extension_never_rewrites(seed in 0u64..1000, left in 1i64..5000, right in 1i64..5000) {
            let p = sample_path(seed, grid(0.001, -0.5, 0.5)).unwrap();
            let before = p.values(-500, 500).unwrap();
            let q = p.extend_left(left as f64 * 0.001).unwrap().extend_right(right as f64 * 0.001).unwrap();
            prop_assert_eq!(q.values(-500, 500).unwrap(), before);
            prop_assert_eq!(q.k_min(), -500 - left);
            prop_assert_eq!(q.k_max(), 500 + right);
        }
    }
}
