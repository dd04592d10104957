//! Log-scaled matrices for long cocycle products.
//!
//! A product is stored as `e^s M` with `M` normalized to unit max-entry, and
//! the inverse product is accumulated separately. The largest singular value
//! comes from `M`, the smallest from the largest singular value of the inverse,
//! so both extremes stay accurate even when their ratio exceeds `1e300`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledMatrix {
    pub m: DMatrix<f64>,
    pub log_scale: f64,
}

impl ScaledMatrix {
    pub fn identity(d: usize) -> Self {
        ScaledMatrix { m: DMatrix::identity(d, d), log_scale: 0.0 }
    }

    pub fn from_matrix(m: DMatrix<f64>) -> Self {
        let mut s = ScaledMatrix { m, log_scale: 0.0 };
        s.normalize();
        s
    }

    pub fn scalar(log_abs: f64, sign: f64) -> Self {
        ScaledMatrix { m: DMatrix::from_element(1, 1, sign), log_scale: log_abs }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn normalize(&mut self) {
        let amax = self.m.amax();
        if amax > 0.0 && amax.is_finite() {
            self.m /= amax;
            self.log_scale += amax.ln();
        }
    }

    /// `self <- a self`.
    pub fn left_mul(&mut self, a: &DMatrix<f64>) {
        self.m = a * &self.m;
        self.normalize();
    }

    /// `self <- self a`.
    pub fn right_mul(&mut self, a: &DMatrix<f64>) {
        self.m = &self.m * a;
        self.normalize();
    }

    /// `self * other`.
    pub fn mul(&self, other: &ScaledMatrix) -> ScaledMatrix {
        let mut out = ScaledMatrix { m: &self.m * &other.m, log_scale: self.log_scale + other.log_scale };
        out.normalize();
        out
    }

    /// Dense value; overflows when `log_scale` is beyond the f64 range.
    pub fn to_dense(&self) -> DMatrix<f64> {
        &self.m * self.log_scale.exp()
    }

    /// Spectral norm on the log scale.
    pub fn log_norm(&self) -> f64 {
        self.log_scale + spectral_norm(&self.m).ln()
    }

    /// `ln |self x|`.
    pub fn log_apply_norm(&self, x: &DVector<f64>) -> f64 {
        self.log_scale + (&self.m * x).norm().ln()
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].abs();
    }
    m.singular_values().max()
}

/// Singular values in descending order with matching left and right vectors.
pub fn sorted_svd(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>, DMatrix<f64>) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_columns(&order.iter().map(|&i| u.column(i).into_owned()).collect::<Vec<_>>());
    let v_sorted = DMatrix::from_columns(&order.iter().map(|&i| vt.row(i).transpose()).collect::<Vec<_>>());
    (s, u_sorted, v_sorted)
}

/// `ln |det m|`, or an error for a singular matrix.
pub fn log_abs_det(m: &DMatrix<f64>, index: usize) -> Result<f64> {
    let det = m.clone().lu().determinant();
    if det == 0.0 || !det.is_finite() {
        return Err(Error::SingularMatrix(index));
    }
    Ok(det.abs().ln())
}

/// Orthonormal basis of the orthogonal complement of the columns of `basis`.
pub fn orthogonal_complement(basis: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    if basis.ncols() == 0 {
        return DMatrix::identity(d, d);
    }
    if basis.ncols() >= d {
        return DMatrix::zeros(d, 0);
    }
    let proj = basis * basis.transpose();
    let comp = DMatrix::identity(d, d) - proj;
    let (s, u, _) = sorted_svd(&comp);
    let k = d - basis.ncols();
    let cols: Vec<DVector<f64>> = (0..k).map(|i| u.column(i).into_owned()).collect();
    debug_assert!(s[k - 1] > 0.5);
    DMatrix::from_columns(&cols)
}

/// Principal angles (radians, ascending) between the column spans of two
/// orthonormal bases.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return vec![];
    }
    let c = a.transpose() * b;
    let mut s: Vec<f64> = c.singular_values().iter().map(|v| v.clamp(-1.0, 1.0).acos()).collect();
    s.sort_by(|x, y| x.total_cmp(y));
    s.truncate(a.ncols().min(b.ncols()));
    s
}

/// Orthonormal basis of the intersection of two subspaces given by
/// orthonormal bases, via principal vectors with angle below `angle_tol`.
/// Also returns the smallest angle that was rejected, as a conditioning hint.
pub fn intersect(a: &DMatrix<f64>, b: &DMatrix<f64>, angle_tol: f64) -> (DMatrix<f64>, f64) {
    let d = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return (DMatrix::zeros(d, 0), f64::INFINITY);
    }
    let c = a.transpose() * b;
    let (s, u, _) = sorted_svd(&c);
    let mut cols = Vec::new();
    let mut rejected = f64::INFINITY;
    for (i, sv) in s.iter().enumerate() {
        let angle = sv.clamp(-1.0, 1.0).acos();
        if angle <= angle_tol {
            cols.push(a * u.column(i));
        } else {
            rejected = rejected.min(angle);
        }
    }
    if cols.is_empty() {
        return (DMatrix::zeros(d, 0), rejected);
    }
    (DMatrix::from_columns(&cols), rejected)
}

/// Dense matrix exponential `exp(a t)` as a scaled matrix, by scaling and
/// squaring with renormalization after each squaring.
pub fn scaled_expm(a: &DMatrix<f64>, t: f64) -> ScaledMatrix {
    let d = a.nrows();
    if t == 0.0 {
        return ScaledMatrix::identity(d);
    }
    let norm = (a * t).amax() * d as f64;
    let mut squarings = 0u32;
    let mut h = t;
    while norm / 2f64.powi(squarings as i32) > 0.5 {
        squarings += 1;
    }
    h /= 2f64.powi(squarings as i32);
    let mut out = ScaledMatrix::from_matrix((a * h).exp());
    for _ in 0..squarings {
        out = out.mul(&out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaled_products_track_huge_norms() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
        let mut p = ScaledMatrix::identity(2);
        for _ in 0..2000 {
            p.left_mul(&a);
        }
        assert!((p.log_norm() - 2000.0 * 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn expm_matches_diagonal() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let e = scaled_expm(&a, 500.0);
        assert!((e.log_norm() - 500.0).abs() < 1e-9);
        let small = scaled_expm(&a, 0.3).to_dense();
        assert!((small[(0, 0)] - (-0.3f64).exp()).abs() < 1e-14);
        assert!((small[(1, 1)] - 0.3f64.exp()).abs() < 1e-14);
    }

    #[test]
    fn expm_general_matrix() {
        // Nilpotent part: exp([[0,1],[0,0]] t) = [[1,t],[0,1]].
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let e = scaled_expm(&a, 3.0).to_dense();
        assert!((e[(0, 1)] - 3.0).abs() < 1e-12);
        assert!((e[(0, 0)] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_sorted_descending() {
        let m = DMatrix::from_row_slice(2, 2, &[0.1, 0.0, 0.0, 3.0]);
        let (s, _u, v) = sorted_svd(&m);
        assert!(s[0] > s[1]);
        assert!((v[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn complement_and_angles() {
        let e1 = DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]);
        let c = orthogonal_complement(&e1, 3);
        assert_eq!(c.ncols(), 2);
        assert!((e1.transpose() * &c).amax() < 1e-12);
        let ang = principal_angles(&e1, &e1);
        assert!(ang[0] < 1e-7);
    }

    #[test]
    fn intersection_of_planes() {
        let a = DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let b = DMatrix::from_column_slice(3, 2, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        let (i, _) = intersect(&a, &b, 1e-6);
        assert_eq!(i.ncols(), 1);
        assert!((i[(1, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_determinant_detected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(log_abs_det(&m, 3).is_err());
    }
}
