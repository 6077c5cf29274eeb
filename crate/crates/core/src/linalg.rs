//! Dense complex helpers shared by the simulator.
//!
//! Most transforms in this crate are real orthogonal (the canonical total-spin
//! basis and its x-rotated copy), so conjugation by a real matrix is routed
//! through `f64` products, which `nalgebra` hands to an optimized GEMM.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest entry-wise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

pub fn vec_max_abs_diff(a: &CVector, b: &CVector) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    a.iter()
        .zip(b.iter())
        .fold(0.0_f64, |acc, (x, y)| acc.max((x - y).norm()))
}

/// max |M - M^dagger|
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn trace(m: &CMatrix) -> C64 {
    (0..m.nrows()).map(|i| m[(i, i)]).sum()
}

pub fn identity(dim: usize) -> CMatrix {
    CMatrix::identity(dim, dim)
}

/// Returns `Some(real part)` when every imaginary part is exactly zero.
pub fn real_part_if_real(m: &CMatrix) -> Option<DMatrix<f64>> {
    if m.iter().all(|z| z.im == 0.0) {
        Some(m.map(|z| z.re))
    } else {
        None
    }
}

pub fn split(m: &CMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    (m.map(|z| z.re), m.map(|z| z.im))
}

pub fn join(re: &DMatrix<f64>, im: &DMatrix<f64>) -> CMatrix {
    re.zip_map(im, C64::new)
}

/// `R^T M R` for a real `R`.
pub fn conjugate_by_real_t(r: &DMatrix<f64>, m: &CMatrix) -> CMatrix {
    let (re, im) = split(m);
    let rt = r.transpose();
    let re = &rt * (&re * r);
    let im = &rt * (&im * r);
    join(&re, &im)
}

/// `R M R^T` for a real `R`.
pub fn conjugate_by_real(r: &DMatrix<f64>, m: &CMatrix) -> CMatrix {
    let (re, im) = split(m);
    let rt = r.transpose();
    let re = r * (&re * &rt);
    let im = r * (&im * &rt);
    join(&re, &im)
}

/// Expectation value `v^dagger M v`.
pub fn expectation(m: &CMatrix, v: &CVector) -> C64 {
    v.dotc(&(m * v))
}

/// Checks `||M^dagger M - I||_max < tol` and returns the defect.
pub fn unitarity_defect(m: &CMatrix) -> f64 {
    let prod = m.adjoint() * m;
    max_abs_diff(&prod, &identity(m.nrows()))
}

pub fn binomial(n: u64, k: i64) -> u64 {
    if k < 0 || k as u64 > n {
        return 0;
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial(4, 2), 6);
        assert_eq!(binomial(4, -1), 0);
        assert_eq!(binomial(4, 5), 0);
        assert_eq!(binomial(12, 6), 924);
        assert_eq!(binomial(0, 0), 1);
    }

    #[test]
    fn real_conjugation_matches_complex_product() {
        let r = DMatrix::from_row_slice(2, 2, &[0.6, -0.8, 0.8, 0.6]);
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(1.0, 0.0),
                C64::new(0.2, 0.3),
                C64::new(0.2, -0.3),
                C64::new(-0.5, 0.0),
            ],
        );
        let rc = r.map(|x| C64::new(x, 0.0));
        let expect = rc.transpose() * &m * &rc;
        assert!(max_abs_diff(&conjugate_by_real_t(&r, &m), &expect) < 1e-15);
        let expect = &rc * &m * rc.transpose();
        assert!(max_abs_diff(&conjugate_by_real(&r, &m), &expect) < 1e-15);
    }
}
