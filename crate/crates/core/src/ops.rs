//! Qubit-register operators in the computational basis.
//!
//! Register convention: basis index `i` encodes `|q_1 q_2 ... q_N>` with `q_1`
//! as the most significant bit, and `|0>` is the spin-up (`sigma_z = +1`) state.
//! Sites are numbered `1..=N`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector, C64, I, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "x" | "X" => Ok(Axis::X),
            "y" | "Y" => Ok(Axis::Y),
            "z" | "Z" => Ok(Axis::Z),
            other => Err(Error::invalid(format!(
                "unknown axis '{other}', expected x, y or z"
            ))),
        }
    }
}

/// Bit mask of site `n` (1-based) in an `N`-qubit register.
#[inline]
pub fn site_mask(num_qubits: usize, site: usize) -> usize {
    1usize << (num_qubits - site)
}

/// Generalized permutation matrix: `U e_c = phase[c] e_{target[c]}`.
///
/// Pauli strings, the correction unitaries and the idealized scattering
/// errors are all of this form, so their action costs `O(dim)` per vector and
/// `O(dim^2)` per density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Monomial {
    target: Vec<usize>,
    phase: Vec<C64>,
}

impl Monomial {
    pub fn new(target: Vec<usize>, phase: Vec<C64>) -> Result<Self> {
        if target.len() != phase.len() {
            return Err(Error::invalid("monomial target/phase length mismatch"));
        }
        let mut seen = vec![false; target.len()];
        for &t in &target {
            if t >= target.len() || std::mem::replace(&mut seen[t], true) {
                return Err(Error::invalid("monomial target is not a permutation"));
            }
        }
        Ok(Self { target, phase })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            target: (0..dim).collect(),
            phase: vec![ONE; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.target.len()
    }

    pub fn target(&self, c: usize) -> usize {
        self.target[c]
    }

    pub fn phase(&self, c: usize) -> C64 {
        self.phase[c]
    }

    pub fn adjoint(&self) -> Self {
        let mut target = vec![0; self.dim()];
        let mut phase = vec![ZERO; self.dim()];
        for c in 0..self.dim() {
            target[self.target[c]] = c;
            phase[self.target[c]] = self.phase[c].conj();
        }
        Self { target, phase }
    }

    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.dim(), "dimension mismatch");
        let mut out = CVector::zeros(v.len());
        for c in 0..v.len() {
            out[self.target[c]] = self.phase[c] * v[c];
        }
        out
    }

    /// `U M U^dagger`
    pub fn conjugate(&self, m: &CMatrix) -> CMatrix {
        assert_eq!(m.nrows(), self.dim(), "dimension mismatch");
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for b in 0..d {
            let tb = self.target[b];
            let pb = self.phase[b].conj();
            for a in 0..d {
                out[(self.target[a], tb)] = self.phase[a] * m[(a, b)] * pb;
            }
        }
        out
    }

    /// `U M`
    pub fn left_mul(&self, m: &CMatrix) -> CMatrix {
        assert_eq!(m.nrows(), self.dim(), "dimension mismatch");
        let mut out = CMatrix::zeros(m.nrows(), m.ncols());
        for b in 0..m.ncols() {
            for a in 0..m.nrows() {
                out[(self.target[a], b)] = self.phase[a] * m[(a, b)];
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let d = self.dim();
        let mut out = CMatrix::zeros(d, d);
        for c in 0..d {
            out[(self.target[c], c)] = self.phase[c];
        }
        out
    }
}

/// Single-site Pauli operator `sigma^axis_site` on an `N`-qubit register.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliOp {
    pub num_qubits: usize,
    pub axis: Axis,
    pub site: usize,
}

impl PauliOp {
    pub fn new(num_qubits: usize, axis: Axis, site: usize) -> Result<Self> {
        if site == 0 || site > num_qubits {
            return Err(Error::invalid(format!(
                "site {site} outside 1..={num_qubits}"
            )));
        }
        Ok(Self {
            num_qubits,
            axis,
            site,
        })
    }

    pub fn dim(&self) -> usize {
        1usize << self.num_qubits
    }

    pub fn to_monomial(&self) -> Monomial {
        let dim = self.dim();
        let mask = site_mask(self.num_qubits, self.site);
        let mut target = Vec::with_capacity(dim);
        let mut phase = Vec::with_capacity(dim);
        for i in 0..dim {
            let up = i & mask == 0;
            match self.axis {
                Axis::X => {
                    target.push(i ^ mask);
                    phase.push(ONE);
                }
                // sigma_y |0> = i|1>, sigma_y |1> = -i|0>
                Axis::Y => {
                    target.push(i ^ mask);
                    phase.push(if up { I } else { -I });
                }
                Axis::Z => {
                    target.push(i);
                    phase.push(if up { ONE } else { -ONE });
                }
            }
        }
        Monomial { target, phase }
    }

    pub fn to_dense(&self) -> CMatrix {
        self.to_monomial().to_dense()
    }
}

/// Compressed-row sparse complex matrix, used for the collective spin
/// operators whose dense form would dominate memory at larger `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOp {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOp {
    /// Builds from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows = Vec::with_capacity(triplets.len());
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                cols.push(c);
                vals.push(v);
                last = Some((r, c));
            }
        }
        let mut keep_rows = Vec::with_capacity(rows.len());
        let mut keep_cols = Vec::with_capacity(rows.len());
        let mut keep_vals = Vec::with_capacity(rows.len());
        for ((r, c), v) in rows.into_iter().zip(cols).zip(vals) {
            if v != ZERO {
                keep_rows.push(r);
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for &r in &keep_rows {
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            dim,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn mul_vec(&self, v: &CVector) -> CVector {
        assert_eq!(v.len(), self.dim, "dimension mismatch");
        CVector::from_iterator(
            self.dim,
            (0..self.dim).map(|r| self.row(r).map(|(c, a)| a * v[c]).sum::<C64>()),
        )
    }

    /// `tr(M rho)` for a dense `rho`.
    pub fn trace_with(&self, rho: &CMatrix) -> C64 {
        let mut acc = ZERO;
        for r in 0..self.dim {
            for (c, a) in self.row(r) {
                acc += a * rho[(c, r)];
            }
        }
        acc
    }

    /// Sub-matrix on a sorted index subset.
    pub fn restrict(&self, indices: &[usize]) -> CMatrix {
        let mut pos = vec![usize::MAX; self.dim];
        for (k, &i) in indices.iter().enumerate() {
            pos[i] = k;
        }
        let mut out = CMatrix::zeros(indices.len(), indices.len());
        for (k, &r) in indices.iter().enumerate() {
            for (c, a) in self.row(r) {
                if pos[c] != usize::MAX {
                    out[(k, pos[c])] += a;
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, a) in self.row(r) {
                out[(r, c)] += a;
            }
        }
        out
    }
}

/// Applies `u^{(x)N}` (the same 2x2 unitary on every qubit) to a state vector.
pub fn apply_product(u: &[[C64; 2]; 2], num_qubits: usize, v: &mut [C64]) {
    assert_eq!(v.len(), 1usize << num_qubits, "dimension mismatch");
    for site in 1..=num_qubits {
        let mask = site_mask(num_qubits, site);
        for i in 0..v.len() {
            if i & mask == 0 {
                let (a, b) = (v[i], v[i | mask]);
                v[i] = u[0][0] * a + u[0][1] * b;
                v[i | mask] = u[1][0] * a + u[1][1] * b;
            }
        }
    }
}

/// Single-qubit factor of the global rotation `exp(-i angle S_axis)`.
pub fn rotation_factor(axis: Axis, angle: f64) -> [[C64; 2]; 2] {
    let (c, s) = ((angle / 2.0).cos(), (angle / 2.0).sin());
    match axis {
        Axis::X => [
            [C64::new(c, 0.0), C64::new(0.0, -s)],
            [C64::new(0.0, -s), C64::new(c, 0.0)],
        ],
        Axis::Y => [
            [C64::new(c, 0.0), C64::new(-s, 0.0)],
            [C64::new(s, 0.0), C64::new(c, 0.0)],
        ],
        Axis::Z => [[C64::new(c, -s), ZERO], [ZERO, C64::new(c, s)]],
    }
}

/// Applies the global spin rotation `exp(-i angle S_axis)` to every column of `m`.
pub fn rotate_columns(m: &CMatrix, num_qubits: usize, axis: Axis, angle: f64) -> CMatrix {
    let u = rotation_factor(axis, angle);
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        apply_product(&u, num_qubits, col.as_mut_slice());
    }
    out
}

/// Dense matrix of `exp(-i angle S_axis)`; meant for small registers and tests.
pub fn rotation_dense(num_qubits: usize, axis: Axis, angle: f64) -> CMatrix {
    rotate_columns(
        &CMatrix::identity(1 << num_qubits, 1 << num_qubits),
        num_qubits,
        axis,
        angle,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, unitarity_defect};

    #[test]
    fn pauli_dense_single_qubit() {
        let x = PauliOp::new(1, Axis::X, 1).unwrap().to_dense();
        let y = PauliOp::new(1, Axis::Y, 1).unwrap().to_dense();
        let z = PauliOp::new(1, Axis::Z, 1).unwrap().to_dense();
        assert_eq!(x, CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]));
        assert_eq!(y, CMatrix::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]));
        assert_eq!(z, CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]));
        // xy = iz
        assert!(max_abs_diff(&(&x * &y), &(z * I)) < 1e-15);
    }

    #[test]
    fn site_one_is_most_significant() {
        let x1 = PauliOp::new(2, Axis::X, 1).unwrap().to_monomial();
        assert_eq!(x1.target(0), 2); // |00> -> |10>
    }

    #[test]
    fn rejects_bad_site() {
        assert!(PauliOp::new(3, Axis::Z, 0).is_err());
        assert!(PauliOp::new(3, Axis::Z, 4).is_err());
    }

    #[test]
    fn monomial_conjugate_and_adjoint() {
        let m = PauliOp::new(3, Axis::Y, 2).unwrap().to_monomial();
        let dense = m.to_dense();
        let rho = CMatrix::from_fn(8, 8, |i, j| {
            C64::new((i * 3 + j) as f64, i as f64 - j as f64)
        });
        let expect = &dense * &rho * dense.adjoint();
        assert!(max_abs_diff(&m.conjugate(&rho), &expect) < 1e-12);
        assert!(max_abs_diff(&m.adjoint().to_dense(), &dense.adjoint()) < 1e-15);
        assert!(max_abs_diff(&m.left_mul(&rho), &(&dense * &rho)) < 1e-12);
    }

    #[test]
    fn monomial_rejects_non_permutation() {
        assert!(Monomial::new(vec![0, 0], vec![ONE, ONE]).is_err());
    }

    #[test]
    fn rotation_is_unitary_and_composes() {
        let r = rotation_dense(3, Axis::Y, 0.7);
        assert!(unitarity_defect(&r) < 1e-14);
        let r2 = rotation_dense(3, Axis::Y, 1.4);
        assert!(max_abs_diff(&(&r * &r), &r2) < 1e-14);
    }

    #[test]
    fn sparse_roundtrip() {
        let op =
            SparseOp::from_triplets(3, vec![(0, 1, ONE), (0, 1, ONE), (2, 2, I), (1, 0, ZERO)]);
        assert_eq!(op.nnz(), 2);
        let d = op.to_dense();
        assert_eq!(d[(0, 1)], C64::new(2.0, 0.0));
        assert_eq!(d[(2, 2)], I);
        let v = CVector::from_vec(vec![ONE, I, ONE]);
        assert!(crate::linalg::vec_max_abs_diff(&op.mul_vec(&v), &(&d * &v)) < 1e-15);
    }
}
