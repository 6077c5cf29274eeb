//! Total-spin eigenbasis `|s, l, m>` of an `N`-qubit register.
//!
//! Construction follows the highest-weight route: diagonalize `S^2 - S_z`
//! inside the `S_z = s` eigenspace, keep the eigenvectors with eigenvalue
//! `s^2` (these are exactly the `|s, l, s>` states, since the spectrum
//! `s(s+1) - m` never coincides for different `(s, m)`), fix their phase,
//! orthonormalize with modified Gram-Schmidt and fill in lower `m` with the
//! normalized lowering operator.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, binomial, max_abs_diff, real_part_if_real, CMatrix, CVector, C64, ONE};
use crate::ops::{rotate_columns, site_mask, Axis, PauliOp, SparseOp};

/// Largest register handled with dense `2^N x 2^N` matrices by default.
pub const DEFAULT_MAX_N: usize = 12;

/// Eigenvalues of `S^2 - S_z` closer than this belong to one sector.
pub const DEGENERACY_TOL: f64 = 1e-8;

const PHASE_TOL: f64 = 1e-10;

/// Rejects odd, zero or over-capacity register sizes.
pub fn check_register(n: usize, max_n: usize) -> Result<()> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "qubit count must be an even integer >= 2, got {n}"
        )));
    }
    if n > max_n {
        let dim = 1usize << n.min(40);
        return Err(Error::Capacity {
            n,
            max_n,
            dim,
            bytes: (dim as u128) * (dim as u128) * 16,
        });
    }
    Ok(())
}

/// Number of independent spin-`s` irreducible blocks in `N` qubits,
/// `C(N, N/2 - s) - C(N, N/2 - s - 1)`.
pub fn degeneracy(n: usize, s: i32) -> Result<usize> {
    if !n.is_multiple_of(2) {
        return Err(Error::invalid(format!("qubit count must be even, got {n}")));
    }
    let half = (n / 2) as i32;
    if s < 0 || s > half {
        return Err(Error::invalid(format!("spin s = {s} outside [0, {half}]")));
    }
    let k = (half - s) as i64;
    Ok((binomial(n as u64, k) - binomial(n as u64, k - 1)) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectorLabel {
    pub s: i32,
    pub l: usize,
    pub m: i32,
}

impl SectorLabel {
    pub fn new(s: i32, l: usize, m: i32) -> Self {
        Self { s, l, m }
    }
}

impl fmt::Display for SectorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "|{},{},{}>", self.s, self.l, self.m)
    }
}

/// One `(s, l)` block: `2s + 1` consecutive columns starting at `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub s: i32,
    pub l: usize,
    pub offset: usize,
}

impl Sector {
    pub fn dim(&self) -> usize {
        (2 * self.s + 1) as usize
    }

    pub fn column(&self, m: i32) -> usize {
        self.offset + (m + self.s) as usize
    }

    pub fn columns(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.dim()
    }

    pub fn contains_m(&self, m: i32) -> bool {
        m.abs() <= self.s
    }
}

/// Collective spin operators `S_j = (1/2) sum_n sigma^j_n` and `S^2`.
#[derive(Debug, Clone)]
pub struct CollectiveOps {
    pub n: usize,
    pub sx: SparseOp,
    pub sy: SparseOp,
    pub sz: SparseOp,
    pub ssq: SparseOp,
}

impl CollectiveOps {
    pub fn build(n: usize) -> Result<Self> {
        Self::build_with_limit(n, DEFAULT_MAX_N)
    }

    pub fn build_with_limit(n: usize, max_n: usize) -> Result<Self> {
        check_register(n, max_n)?;
        let dim = 1usize << n;
        let half = C64::new(0.5, 0.0);
        let mut trip: [Vec<(usize, usize, C64)>; 3] = Default::default();
        for axis in Axis::ALL {
            for site in 1..=n {
                let p = PauliOp::new(n, axis, site)?.to_monomial();
                for c in 0..dim {
                    trip[axis.index()].push((p.target(c), c, half * p.phase(c)));
                }
            }
        }
        let [tx, ty, tz] = trip;
        // S^2 = 3N/4 - N(N-1)/4 + sum_{n<n'} SWAP_{nn'}
        let nf = n as f64;
        let base = 0.75 * nf - 0.25 * nf * (nf - 1.0);
        let mut tsq = Vec::with_capacity(dim * (1 + n * (n - 1) / 2));
        for i in 0..dim {
            let mut diag = base;
            for a in 1..=n {
                for b in a + 1..=n {
                    let (ma, mb) = (site_mask(n, a), site_mask(n, b));
                    if (i & ma == 0) == (i & mb == 0) {
                        diag += 1.0;
                    } else {
                        tsq.push((i ^ ma ^ mb, i, ONE));
                    }
                }
            }
            tsq.push((i, i, C64::new(diag, 0.0)));
        }
        Ok(Self {
            n,
            sx: SparseOp::from_triplets(dim, tx),
            sy: SparseOp::from_triplets(dim, ty),
            sz: SparseOp::from_triplets(dim, tz),
            ssq: SparseOp::from_triplets(dim, tsq),
        })
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    /// `sigma^axis` embedded at `site` (1-based).
    pub fn pauli(&self, axis: Axis, site: usize) -> Result<PauliOp> {
        PauliOp::new(self.n, axis, site)
    }

    pub fn spin(&self, axis: Axis) -> &SparseOp {
        match axis {
            Axis::X => &self.sx,
            Axis::Y => &self.sy,
            Axis::Z => &self.sz,
        }
    }
}

/// `S_- v` for a real vector (`S_-` flips one `|0>` to `|1>` with unit weight).
fn lower(n: usize, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for (i, &a) in v.iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        for site in 1..=n {
            let mask = site_mask(n, site);
            if i & mask == 0 {
                out[i | mask] += a;
            }
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Makes the first non-negligible amplitude positive.
fn fix_phase(v: &mut [f64]) {
    if let Some(first) = v.iter().copied().find(|x| x.abs() > PHASE_TOL) {
        if first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Highest-weight states `|s, l, s>` from the `S_z = s` block of `S^2 - S_z`.
fn highest_weight_states(ops: &CollectiveOps, s: i32) -> Result<Vec<Vec<f64>>> {
    let n = ops.n;
    let dim = ops.dim();
    let weight = (n as i32 / 2 - s) as u32;
    let block: Vec<usize> = (0..dim).filter(|i| i.count_ones() == weight).collect();
    let h = &ops.ssq.restrict(&block) - &ops.sz.restrict(&block);
    let h_re = real_part_if_real(&h).ok_or_else(|| {
        Error::invariant(
            "real S^2 - S_z",
            "collective operator block has imaginary entries",
        )
    })?;
    let eig = SymmetricEigen::new(h_re);
    let target = (s * s) as f64;
    let expected = degeneracy(n, s)?;
    let mut found = Vec::with_capacity(expected);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if (lambda - target).abs() < DEGENERACY_TOL {
            let mut v = vec![0.0; dim];
            for (j, &idx) in block.iter().enumerate() {
                v[idx] = eig.eigenvectors[(j, k)];
            }
            fix_phase(&mut v);
            found.push(v);
        }
    }
    if found.len() != expected {
        return Err(Error::SectorResolution {
            s,
            l: found.len().min(expected) + 1,
            detail: format!(
                "found {} eigenvectors at S^2 - S_z = {target}, expected {expected}",
                found.len()
            ),
        });
    }
    // modified Gram-Schmidt in solver order
    for l in 0..found.len() {
        let (done, rest) = found.split_at_mut(l);
        let v = &mut rest[0];
        for u in done.iter() {
            let proj: f64 = u.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(x, a)| *x -= proj * a);
        }
        let nv = norm(v);
        if nv < 1e-6 {
            return Err(Error::SectorResolution {
                s,
                l: l + 1,
                detail: format!("highest-weight vector collapsed under Gram-Schmidt (norm {nv:e})"),
            });
        }
        v.iter_mut().for_each(|x| *x /= nv);
        fix_phase(v);
    }
    Ok(found)
}

/// Change of basis from the computational basis to labeled `|s, l, m>` states.
#[derive(Debug, Clone)]
pub struct SpinBasis {
    n: usize,
    axis: Axis,
    transform: CMatrix,
    real: Option<DMatrix<f64>>,
    sectors: Vec<Sector>,
    labels: Vec<SectorLabel>,
    lookup: HashMap<(i32, usize), usize>,
    degeneracies: BTreeMap<i32, usize>,
}

impl SpinBasis {
    pub fn build(n: usize) -> Result<Self> {
        Self::build_with_limit(n, DEFAULT_MAX_N)
    }

    pub fn build_with_limit(n: usize, max_n: usize) -> Result<Self> {
        let ops = CollectiveOps::build_with_limit(n, max_n)?;
        Self::from_ops(&ops)
    }

    pub fn from_ops(ops: &CollectiveOps) -> Result<Self> {
        let n = ops.n;
        let dim = ops.dim();
        let mut real = DMatrix::<f64>::zeros(dim, dim);
        let mut sectors = Vec::new();
        let mut offset = 0;
        let mut s = n as i32 / 2;
        while s >= 0 {
            for (l0, hw) in highest_weight_states(ops, s)?.into_iter().enumerate() {
                let sector = Sector {
                    s,
                    l: l0 + 1,
                    offset,
                };
                let mut v = hw;
                for m in (-s..=s).rev() {
                    if m < s {
                        v = lower(n, &v);
                        let nv = norm(&v);
                        if nv < 1e-6 {
                            return Err(Error::SectorResolution {
                                s,
                                l: sector.l,
                                detail: format!("lowering annihilated the state at m = {m}"),
                            });
                        }
                        v.iter_mut().for_each(|x| *x /= nv);
                    }
                    real.column_mut(sector.column(m)).copy_from_slice(&v);
                }
                offset += sector.dim();
                sectors.push(sector);
            }
            s -= 1;
        }
        if offset != dim {
            return Err(Error::invariant(
                "dimension sum",
                format!("sectors span {offset} columns, register has {dim}"),
            ));
        }
        Ok(Self::assemble(
            n,
            Axis::Z,
            real.map(|x| C64::new(x, 0.0)),
            sectors,
        ))
    }

    pub(crate) fn assemble(n: usize, axis: Axis, transform: CMatrix, sectors: Vec<Sector>) -> Self {
        let real = real_part_if_real(&transform);
        let mut labels = vec![SectorLabel::new(0, 0, 0); transform.ncols()];
        let mut lookup = HashMap::new();
        let mut degeneracies = BTreeMap::new();
        for (q, sec) in sectors.iter().enumerate() {
            lookup.insert((sec.s, sec.l), q);
            *degeneracies.entry(sec.s).or_insert(0) += 1;
            for m in -sec.s..=sec.s {
                labels[sec.column(m)] = SectorLabel::new(sec.s, sec.l, m);
            }
        }
        Self {
            n,
            axis,
            transform,
            real,
            sectors,
            labels,
            lookup,
            degeneracies,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    /// Quantization axis of the `m` label (`z` for the canonical basis).
    pub fn axis(&self) -> Axis {
        self.axis
    }

    /// Columns are the `|s, l, m>` states in canonical order.
    pub fn transform(&self) -> &CMatrix {
        &self.transform
    }

    /// Real copy of the transform when it has no imaginary part.
    pub fn real_transform(&self) -> Option<&DMatrix<f64>> {
        self.real.as_ref()
    }

    /// Sectors in the q order: descending `s`, ascending `l`.
    pub fn sectors(&self) -> &[Sector] {
        &self.sectors
    }

    pub fn degeneracies(&self) -> &BTreeMap<i32, usize> {
        &self.degeneracies
    }

    pub fn max_spin(&self) -> i32 {
        self.n as i32 / 2
    }

    /// The error-free (maximal spin) sector `(N/2, 1)`.
    pub fn top_sector(&self) -> Sector {
        self.sectors[0]
    }

    /// Position of `(s, l)` in the q order (0-based).
    pub fn sector_position(&self, s: i32, l: usize) -> Result<usize> {
        self.lookup.get(&(s, l)).copied().ok_or_else(|| {
            Error::invalid(format!("no sector (s = {s}, l = {l}) for N = {}", self.n))
        })
    }

    pub fn sector(&self, s: i32, l: usize) -> Result<Sector> {
        Ok(self.sectors[self.sector_position(s, l)?])
    }

    /// Column of `|s, l, m>`.
    pub fn sector_index(&self, s: i32, l: usize, m: i32) -> Result<usize> {
        let sec = self.sector(s, l)?;
        if !sec.contains_m(m) {
            return Err(Error::invalid(format!("m = {m} outside [-{s}, {s}]")));
        }
        Ok(sec.column(m))
    }

    /// Inverse of [`SpinBasis::sector_index`].
    pub fn label(&self, column: usize) -> Result<SectorLabel> {
        self.labels
            .get(column)
            .copied()
            .ok_or_else(|| Error::invalid(format!("column {column} outside 0..{}", self.dim())))
    }

    pub fn labels(&self) -> &[SectorLabel] {
        &self.labels
    }

    pub fn column(&self, s: i32, l: usize, m: i32) -> Result<CVector> {
        Ok(self
            .transform
            .column(self.sector_index(s, l, m)?)
            .into_owned())
    }

    /// `T^dagger M T`: an operator or density matrix from the computational
    /// basis into this basis.
    pub fn to_spin(&self, m: &CMatrix) -> CMatrix {
        match &self.real {
            Some(r) => linalg::conjugate_by_real_t(r, m),
            None => self.transform.adjoint() * m * &self.transform,
        }
    }

    /// `T M T^dagger`: back to the computational basis.
    pub fn to_computational(&self, m: &CMatrix) -> CMatrix {
        match &self.real {
            Some(r) => linalg::conjugate_by_real(r, m),
            None => &self.transform * m * self.transform.adjoint(),
        }
    }

    pub fn vector_to_spin(&self, v: &CVector) -> CVector {
        self.transform.adjoint() * v
    }

    pub fn vector_to_computational(&self, v: &CVector) -> CVector {
        &self.transform * v
    }

    /// Diagonal blocks `P_q (T^dagger rho T) P_q` for every sector, without
    /// forming the full `T^dagger rho T`.
    pub fn sector_blocks(&self, rho: &CMatrix) -> Vec<CMatrix> {
        match &self.real {
            Some(r) => {
                let (re, im) = linalg::split(rho);
                let re_t = &re * r;
                let im_t = &im * r;
                self.sectors
                    .iter()
                    .map(|sec| {
                        let cols = r.columns(sec.offset, sec.dim());
                        let a = cols.transpose() * re_t.columns(sec.offset, sec.dim());
                        let b = cols.transpose() * im_t.columns(sec.offset, sec.dim());
                        linalg::join(&a, &b)
                    })
                    .collect()
            }
            None => {
                let rho_t = rho * &self.transform;
                self.sectors
                    .iter()
                    .map(|sec| {
                        self.transform.columns(sec.offset, sec.dim()).adjoint()
                            * rho_t.columns(sec.offset, sec.dim())
                    })
                    .collect()
            }
        }
    }

    /// The basis with every column rotated onto `axis`: identity for `z`,
    /// `exp(-i S_y pi/2)` for `x`, `exp(+i S_x pi/2)` for `y`.
    pub fn rotated(&self, axis: Axis) -> SpinBasis {
        let transform = match axis {
            Axis::Z => self.transform.clone(),
            Axis::X => rotate_columns(
                &self.transform,
                self.n,
                Axis::Y,
                std::f64::consts::FRAC_PI_2,
            ),
            Axis::Y => rotate_columns(
                &self.transform,
                self.n,
                Axis::X,
                -std::f64::consts::FRAC_PI_2,
            ),
        };
        Self::assemble(self.n, axis, transform, self.sectors.clone())
    }

    /// Checks every basis invariant and reports the worst defects.
    pub fn validate(&self, ops: &CollectiveOps) -> Result<BasisReport> {
        if ops.n != self.n {
            return Err(Error::invalid(
                "collective operators built for a different N",
            ));
        }
        let gram = match &self.real {
            Some(r) => (r.transpose() * r).map(|x| C64::new(x, 0.0)),
            None => self.transform.adjoint() * &self.transform,
        };
        let unitarity = max_abs_diff(&gram, &linalg::identity(self.dim()));
        let s_axis = ops.spin(self.axis);
        let mut s2_residual = 0.0_f64;
        let mut sm_residual = 0.0_f64;
        for (c, lbl) in self.labels.iter().enumerate() {
            let v = self.transform.column(c).into_owned();
            let s2 = (lbl.s * (lbl.s + 1)) as f64;
            let r = ops.ssq.mul_vec(&v) - v.map(|z| z * s2);
            s2_residual = s2_residual.max(r.norm());
            let r = s_axis.mul_vec(&v) - v.map(|z| z * lbl.m as f64);
            sm_residual = sm_residual.max(r.norm());
        }
        let mut degeneracy_ok = true;
        for (&s, &count) in &self.degeneracies {
            degeneracy_ok &= degeneracy(self.n, s)? == count;
        }
        let dimension_sum: usize = self
            .degeneracies
            .iter()
            .map(|(&s, &l)| (2 * s as usize + 1) * l)
            .sum();
        Ok(BasisReport {
            n: self.n,
            unitarity_defect: unitarity,
            max_s2_residual: s2_residual,
            max_m_residual: sm_residual,
            degeneracies_match: degeneracy_ok && self.degeneracies.len() == self.n / 2 + 1,
            dimension_sum,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BasisReport {
    pub n: usize,
    pub unitarity_defect: f64,
    pub max_s2_residual: f64,
    pub max_m_residual: f64,
    pub degeneracies_match: bool,
    pub dimension_sum: usize,
}

impl BasisReport {
    /// Names the first failed check, if any.
    pub fn failure(&self) -> Option<String> {
        if self.unitarity_defect >= 1e-10 {
            return Some(format!(
                "unitarity defect {:e} >= 1e-10",
                self.unitarity_defect
            ));
        }
        if self.max_s2_residual >= 1e-9 {
            return Some(format!(
                "S^2 eigen-residual {:e} >= 1e-9",
                self.max_s2_residual
            ));
        }
        if self.max_m_residual >= 1e-9 {
            return Some(format!(
                "S_axis eigen-residual {:e} >= 1e-9",
                self.max_m_residual
            ));
        }
        if !self.degeneracies_match {
            return Some("sector degeneracies differ from the binomial formula".into());
        }
        if self.dimension_sum != 1usize << self.n {
            return Some(format!("sector dimensions sum to {}", self.dimension_sum));
        }
        None
    }
}

impl PartialEq for SpinBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n
            && self.axis == other.axis
            && self.sectors == other.sectors
            && self.transform == other.transform
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{hermiticity_defect, unitarity_defect, I, ZERO};

    fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
        a * b - b * a
    }

    #[test]
    fn degeneracy_examples() {
        assert_eq!(degeneracy(4, 2).unwrap(), 1);
        assert_eq!(degeneracy(4, 1).unwrap(), 3);
        assert_eq!(degeneracy(4, 0).unwrap(), 2);
        assert_eq!(degeneracy(8, 3).unwrap(), 7);
        assert!(degeneracy(4, 3).is_err());
        assert!(degeneracy(4, -1).is_err());
        assert!(degeneracy(5, 1).is_err());
    }

    #[test]
    fn register_checks() {
        assert!(matches!(check_register(3, 12), Err(Error::InvalidInput(_))));
        assert!(matches!(check_register(0, 12), Err(Error::InvalidInput(_))));
        match check_register(14, 12) {
            Err(Error::Capacity { n, bytes, .. }) => {
                assert_eq!(n, 14);
                assert_eq!(bytes, 16384u128 * 16384 * 16);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
        assert!(check_register(14, 14).is_ok());
    }

    #[test]
    fn collective_ops_n2() {
        let ops = CollectiveOps::build(2).unwrap();
        let sz = ops.sz.to_dense();
        let diag: Vec<f64> = (0..4).map(|i| sz[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 0.0, 0.0, -1.0]);
        let ssq = ops.ssq.to_dense();
        let re = ssq.map(|z| z.re);
        let mut eig: Vec<f64> = SymmetricEigen::new(re)
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [0.0, 2.0, 2.0, 2.0];
        for (a, b) in eig.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn collective_ops_invariants() {
        for n in [2, 4, 6] {
            let ops = CollectiveOps::build(n).unwrap();
            let (sx, sy, sz) = (ops.sx.to_dense(), ops.sy.to_dense(), ops.sz.to_dense());
            let ssq = ops.ssq.to_dense();
            for (j, s) in [&sx, &sy, &sz].into_iter().enumerate() {
                let mut sum = CMatrix::zeros(1 << n, 1 << n);
                for site in 1..=n {
                    sum += ops.pauli(Axis::ALL[j], site).unwrap().to_dense();
                }
                assert_eq!(&sum.map(|z| z * 0.5), s);
                assert!(hermiticity_defect(s) == 0.0);
            }
            assert!(max_abs_diff(&commutator(&sx, &sy), &sz.map(|z| z * I)) < 1e-12);
            assert!(max_abs_diff(&commutator(&sy, &sz), &sx.map(|z| z * I)) < 1e-12);
            assert!(max_abs_diff(&commutator(&sz, &sx), &sy.map(|z| z * I)) < 1e-12);
            let sum_sq = &sx * &sx + &sy * &sy + &sz * &sz;
            assert!(max_abs_diff(&sum_sq, &ssq) < 1e-12);
            for s in [&sx, &sy, &sz] {
                assert!(linalg::max_abs(&commutator(&ssq, s)) < 1e-12);
            }
        }
    }

    #[test]
    fn collective_trace_n4() {
        let ops = CollectiveOps::build(4).unwrap();
        let tr = linalg::trace(&ops.ssq.to_dense());
        assert!((tr.re - 48.0).abs() < 1e-12);
    }

    #[test]
    fn triplet_and_singlet_n2() {
        let b = SpinBasis::build(2).unwrap();
        let v = b.column(1, 1, 0).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let expect = CVector::from_vec(vec![ZERO, C64::new(r, 0.0), C64::new(r, 0.0), ZERO]);
        assert!(crate::linalg::vec_max_abs_diff(&v, &expect) < 1e-12);
        let singlet = b.column(0, 1, 0).unwrap();
        for m in -1..=1 {
            assert!(b.column(1, 1, m).unwrap().dotc(&singlet).norm() < 1e-12);
        }
    }

    #[test]
    fn sector_counts_n6() {
        let b = SpinBasis::build(6).unwrap();
        let d: Vec<(i32, usize)> = b.degeneracies().iter().map(|(&s, &l)| (s, l)).collect();
        assert_eq!(d, vec![(0, 5), (1, 9), (2, 5), (3, 1)]);
        let total: usize = d.iter().map(|&(s, l)| (2 * s as usize + 1) * l).sum();
        assert_eq!(total, 64);
    }

    #[test]
    fn q_order_n4() {
        let b = SpinBasis::build(4).unwrap();
        let order: Vec<(i32, usize)> = b.sectors().iter().map(|s| (s.s, s.l)).collect();
        assert_eq!(order, vec![(2, 1), (1, 1), (1, 2), (1, 3), (0, 1), (0, 2)]);
    }

    #[test]
    fn sector_index_examples() {
        let b = SpinBasis::build(4).unwrap();
        assert_eq!(b.sector_index(2, 1, -2).unwrap(), 0);
        assert_eq!(b.sector_index(2, 1, 2).unwrap(), 4);
        for c in 0..16 {
            let lbl = b.label(c).unwrap();
            assert_eq!(b.sector_index(lbl.s, lbl.l, lbl.m).unwrap(), c);
        }
        assert!(b.sector_index(2, 2, 0).is_err());
        assert!(b.sector_index(1, 1, 2).is_err());
        assert!(b.sector_index(3, 1, 0).is_err());
        assert!(b.label(16).is_err());
    }

    #[test]
    fn lowering_matrix_elements() {
        let ops = CollectiveOps::build(6).unwrap();
        let b = SpinBasis::from_ops(&ops).unwrap();
        let s_minus = &ops.sx.to_dense() - ops.sy.to_dense().map(|z| z * I);
        for sec in b.sectors() {
            for m in -sec.s..sec.s {
                let upper = b.column(sec.s, sec.l, m + 1).unwrap();
                let lower_v = b.column(sec.s, sec.l, m).unwrap();
                let elem = lower_v.dotc(&(&s_minus * &upper));
                let expect = (((sec.s * (sec.s + 1)) - m * (m + 1)) as f64).sqrt();
                assert!((elem - C64::new(expect, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn validation_and_determinism() {
        for n in [2, 4, 6, 8] {
            let ops = CollectiveOps::build(n).unwrap();
            let b = SpinBasis::from_ops(&ops).unwrap();
            let rep = b.validate(&ops).unwrap();
            assert!(rep.failure().is_none(), "N={n}: {:?}", rep.failure());
            let again = SpinBasis::from_ops(&ops).unwrap();
            assert!(b == again);
        }
    }

    #[test]
    fn highest_weight_phase_convention() {
        let b = SpinBasis::build(6).unwrap();
        for sec in b.sectors() {
            let v = b.transform().column(sec.column(sec.s));
            let first = v.iter().find(|z| z.norm() > PHASE_TOL).unwrap();
            assert!(first.re > 0.0 && first.im == 0.0);
        }
    }

    #[test]
    fn rotated_bases() {
        let ops = CollectiveOps::build(4).unwrap();
        let b = SpinBasis::from_ops(&ops).unwrap();
        assert_eq!(b.rotated(Axis::Z).transform(), b.transform());
        for axis in [Axis::X, Axis::Y] {
            let r = b.rotated(axis);
            assert!(unitarity_defect(r.transform()) < 1e-10);
            let rep = r.validate(&ops).unwrap();
            assert!(rep.failure().is_none(), "{axis}: {:?}", rep.failure());
        }
        assert!(b.rotated(Axis::X).real_transform().is_some());
    }

    #[test]
    fn rotated_top_state_n2() {
        let b = SpinBasis::build(2).unwrap().rotated(Axis::X);
        let v = b.column(1, 1, 1).unwrap();
        // (|0> + |1>)(|0> + |1>) / 2, up to a global phase
        let phase = v[0] / v[0].norm();
        for k in 0..4 {
            assert!((v[k] / phase - C64::new(0.5, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn sector_blocks_match_full_transform() {
        let b = SpinBasis::build(4).unwrap();
        let rho = CMatrix::from_fn(16, 16, |i, j| {
            C64::new((i + 2 * j) as f64 * 0.01, (i as f64 - j as f64) * 0.02)
        });
        let full = b.to_spin(&rho);
        let blocks = b.sector_blocks(&rho);
        for (sec, blk) in b.sectors().iter().zip(&blocks) {
            let expect = full
                .view((sec.offset, sec.offset), (sec.dim(), sec.dim()))
                .into_owned();
            assert!(max_abs_diff(blk, &expect) < 1e-13);
        }
        let back = b.to_computational(&full);
        assert!(max_abs_diff(&back, &rho) < 1e-13);
        let y = b.rotated(Axis::Y);
        let blocks = y.sector_blocks(&rho);
        let full = y.to_spin(&rho);
        for (sec, blk) in y.sectors().iter().zip(&blocks) {
            let expect = full
                .view((sec.offset, sec.offset), (sec.dim(), sec.dim()))
                .into_owned();
            assert!(max_abs_diff(blk, &expect) < 1e-13);
        }
    }
}
