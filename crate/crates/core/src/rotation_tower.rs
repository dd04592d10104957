//! Scalar cocycle over the golden-mean circle rotation with an explicit tower
//! of arcs.
//!
//! Points of the circle `R/Z` are `u64` fixed-point numbers (`x / 2^64`), so
//! the rotation `x -> x + phi` is an exact wrapping addition. For each
//! `n = 2..=n_max` an arc `U_n` of length `min(1/n^3, g/4)` is placed, where
//! `g` is the smallest spacing of `{0, phi, 2 phi}`, such that all arcs
//! `U_n, theta U_n, theta^2 U_n` are pairwise disjoint. The multiplier is
//!
//! ```text
//! A(x) = 1/n  on U_n and theta^2 U_n,   n  on theta U_n,   1 elsewhere.
//! ```

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// `round(2^64 (sqrt(5) - 1) / 2)`.
pub const GOLDEN_ANGLE: u64 = 0x9E37_79B9_7F4A_7C15;

const CIRCLE: u128 = 1u128 << 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TowerArc {
    pub n: u32,
    /// 0 for `U_n`, 1 for `theta U_n`, 2 for `theta^2 U_n`.
    pub level: u8,
    pub start: u64,
    pub len: u64,
}

impl TowerArc {
    fn end(&self) -> u128 {
        self.start as u128 + self.len as u128
    }

    pub fn contains(&self, x: u64) -> bool {
        x >= self.start && (x as u128) < self.end()
    }

    pub fn log_multiplier(&self) -> f64 {
        let l = (self.n as f64).ln();
        if self.level == 1 {
            l
        } else {
            -l
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationTower {
    pub n_max: u32,
    /// All arcs sorted by start point.
    pub arcs: Vec<TowerArc>,
}

fn circle_gap() -> u64 {
    let pts = {
        let mut v = vec![0u64, GOLDEN_ANGLE, GOLDEN_ANGLE.wrapping_mul(2)];
        v.sort_unstable();
        v
    };
    let mut gap = CIRCLE - pts[2] as u128 + pts[0] as u128;
    for w in pts.windows(2) {
        gap = gap.min((w[1] - w[0]) as u128);
    }
    gap as u64
}

/// Arc length `min(2^64 / n^3, gap / 4)`.
pub fn arc_length(n: u32) -> u64 {
    let cube = (n as u128).pow(3);
    ((CIRCLE / cube) as u64).min(circle_gap() / 4)
}

impl RotationTower {
    /// Place arcs greedily from the left. Each arc carries a guard of an eighth
    /// of its length on both sides.
    pub fn new(n_max: u32) -> Result<Self> {
        if n_max < 2 {
            return Err(Error::InvalidParameter(format!("n_max must be >= 2, got {n_max}")));
        }
        let mut placed: Vec<TowerArc> = Vec::new();
        for n in 2..=n_max {
            let len = arc_length(n);
            let guard = (len / 8).max(1) as u128;
            let mut p: u128 = 0;
            'search: loop {
                if p >= CIRCLE {
                    return Err(Error::Construction(format!("no room for arc {n}")));
                }
                for level in 0..3u8 {
                    let start = (p as u64).wrapping_add(GOLDEN_ANGLE.wrapping_mul(level as u64)) as u128;
                    let end = start + len as u128;
                    if end + guard > CIRCLE {
                        p += CIRCLE - start;
                        continue 'search;
                    }
                    let lo = start.saturating_sub(guard);
                    if let Some(hit) = placed.iter().find(|a| lo < a.end() && (a.start as u128) < end + guard) {
                        p += hit.end() + guard - start;
                        continue 'search;
                    }
                }
                break;
            }
            for level in 0..3u8 {
                let start = (p as u64).wrapping_add(GOLDEN_ANGLE.wrapping_mul(level as u64));
                placed.push(TowerArc { n, level, start, len });
            }
        }
        placed.sort_by_key(|a| a.start);
        let tower = RotationTower { n_max, arcs: placed };
        tower.verify()?;
        Ok(tower)
    }

    /// Exact integer check of disjointness and of the rotation structure.
    pub fn verify(&self) -> Result<()> {
        for w in self.arcs.windows(2) {
            if w[0].end() > w[1].start as u128 {
                return Err(Error::Construction(format!("arcs {:?} and {:?} overlap", w[0], w[1])));
            }
        }
        for n in 2..=self.n_max {
            let levels: Vec<&TowerArc> = (0..3u8)
                .map(|l| self.arcs.iter().find(|a| a.n == n && a.level == l))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| Error::Construction(format!("arc {n} incomplete")))?;
            for l in 1..3 {
                if levels[l].start != levels[0].start.wrapping_add(GOLDEN_ANGLE.wrapping_mul(l as u64)) {
                    return Err(Error::Construction(format!("arc {n} level {l} is not a rotation image")));
                }
            }
        }
        Ok(())
    }

    pub fn locate(&self, x: u64) -> Option<&TowerArc> {
        let idx = self.arcs.partition_point(|a| a.start <= x);
        if idx == 0 {
            return None;
        }
        let arc = &self.arcs[idx - 1];
        arc.contains(x).then_some(arc)
    }

    /// `ln A(x)`.
    pub fn log_multiplier(&self, x: u64) -> f64 {
        self.locate(x).map(|a| a.log_multiplier()).unwrap_or(0.0)
    }

    /// `theta^k x`.
    pub fn rotate(x: u64, k: i64) -> u64 {
        x.wrapping_add(GOLDEN_ANGLE.wrapping_mul(k as u64))
    }

    /// Base point for a realization seed.
    pub fn base_point(seed: u64) -> u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(3u64 << 56);
        rng.next_u64()
    }

    /// Measure of the union of all arcs.
    pub fn covered_measure(&self) -> f64 {
        self.arcs.iter().map(|a| a.len as f64).sum::<f64>() / CIRCLE as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction_succeeds_and_is_disjoint() {
        for n_max in [2, 10, 25, 50, 200] {
            let t = RotationTower::new(n_max).unwrap();
            assert_eq!(t.arcs.len(), 3 * (n_max as usize - 1));
            t.verify().unwrap();
            assert!(t.covered_measure() < 1.0);
        }
    }

    #[test]
    fn arc_lengths_follow_cubic_law() {
        let g = circle_gap() as f64 / CIRCLE as f64;
        assert!((g - 0.2360679).abs() < 1e-6);
        assert_eq!(arc_length(2), circle_gap() / 4);
        assert_eq!(arc_length(10), (CIRCLE / 1000) as u64);
    }

    #[test]
    fn rejects_tiny_family() {
        assert!(RotationTower::new(1).is_err());
    }

    /// Membership by scanning every arc; the oracle for `locate`.
    fn brute_force(t: &RotationTower, x: u64) -> f64 {
        let hits: Vec<&TowerArc> = t.arcs.iter().filter(|a| a.contains(x)).collect();
        assert!(hits.len() <= 1);
        hits.first().map(|a| a.log_multiplier()).unwrap_or(0.0)
    }

    #[test]
    fn entering_an_arc_gives_n_then_inverse() {
        let t = RotationTower::new(50).unwrap();
        for arc in t.arcs.iter().filter(|a| a.level == 0) {
            for x in [arc.start, arc.start + arc.len / 2, arc.start + arc.len - 1] {
                let n = arc.n as f64;
                assert!((t.log_multiplier(x) + n.ln()).abs() < 1e-15);
                assert!((t.log_multiplier(RotationTower::rotate(x, 1)) - n.ln()).abs() < 1e-15);
                assert!((t.log_multiplier(RotationTower::rotate(x, 2)) + n.ln()).abs() < 1e-15);
            }
        }
    }

    proptest! {
        #[test]
        fn lookup_matches_brute_force(x in any::<u64>(), steps in 0i64..40) {
            let t = RotationTower::new(25).unwrap();
            for k in 0..steps {
                let y = RotationTower::rotate(x, k);
                prop_assert_eq!(t.log_multiplier(y), brute_force(&t, y));
            }
        }

        #[test]
        fn partial_products_bounded_above(x in any::<u64>()) {
            let t = RotationTower::new(50).unwrap();
            let mut s = 0.0;
            for k in 0..60 {
                s += t.log_multiplier(RotationTower::rotate(x, k));
                if k >= 1 {
                    prop_assert!(s <= 1e-12);
                }
            }
        }
    }
}
