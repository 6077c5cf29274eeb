//! Syndrome projection and correction for the spinor code.
//!
//! The projectors `P_sl` are block masks in the spin basis and every
//! correction `U_sl` is a generalized permutation there, so the correction
//! superoperator only needs the diagonal sector blocks of `T^dagger rho T`.

use serde::{Deserialize, Serialize};

use crate::basis::{Sector, SpinBasis};
use crate::channels::{swap_monomial, ReadoutConfusion};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, CVector};
use crate::ops::Monomial;
use crate::states::{BasisTag, DensityState};

#[derive(Debug, Clone)]
pub struct SpinorCode {
    basis: SpinBasis,
    corrections: Vec<Monomial>,
}

/// Wraps `basis` with the correction unitaries
/// `U_sl = exp[i pi/2 sum_{|m|<=s} (|N/2,1,m><s,l,m| + h.c.)]`; the error-free
/// sector gets the identity.
pub fn build_code(basis: SpinBasis) -> Result<SpinorCode> {
    let top = basis.top_sector();
    let corrections = basis
        .sectors()
        .iter()
        .enumerate()
        .map(|(q, sec)| {
            let pairs: Vec<(usize, usize)> = if q == 0 {
                Vec::new()
            } else {
                (-sec.s..=sec.s)
                    .map(|m| (sec.column(m), top.column(m)))
                    .collect()
            };
            swap_monomial(basis.dim(), &pairs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SpinorCode { basis, corrections })
}

/// Output of one syndrome round.
#[derive(Debug, Clone)]
pub struct Corrected {
    pub rho: DensityState,
    /// `tr(P_q rho)` before correction, in the q order.
    pub sector_weights: Vec<f64>,
}

impl SpinorCode {
    pub fn basis(&self) -> &SpinBasis {
        &self.basis
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    /// Sectors in the q order.
    pub fn q_order(&self) -> &[Sector] {
        self.basis.sectors()
    }

    pub fn q_max(&self) -> usize {
        self.basis.sectors().len()
    }

    /// `U_q` in the spin basis.
    pub fn correction(&self, q: usize) -> &Monomial {
        &self.corrections[q]
    }

    pub fn correction_for(&self, s: i32, l: usize) -> Result<&Monomial> {
        Ok(&self.corrections[self.basis.sector_position(s, l)?])
    }

    /// `P_q` in the spin basis (a diagonal 0/1 mask).
    pub fn projector_spin(&self, q: usize) -> CMatrix {
        let dim = self.basis.dim();
        let mut p = CMatrix::zeros(dim, dim);
        for c in self.basis.sectors()[q].columns() {
            p[(c, c)] = linalg::ONE;
        }
        p
    }

    /// `P_q` in the computational basis.
    pub fn projector(&self, q: usize) -> CMatrix {
        let sec = self.basis.sectors()[q];
        let cols = self.basis.transform().columns(sec.offset, sec.dim());
        cols * cols.adjoint()
    }

    /// `U_q` in the computational basis.
    pub fn correction_computational(&self, q: usize) -> CMatrix {
        self.basis.to_computational(&self.corrections[q].to_dense())
    }

    fn blocks(&self, rho: &DensityState) -> Result<Vec<CMatrix>> {
        if rho.matrix.nrows() != self.basis.dim() {
            return Err(Error::invalid(format!(
                "state dimension {} does not match code dimension {}",
                rho.matrix.nrows(),
                self.basis.dim()
            )));
        }
        Ok(match rho.basis {
            BasisTag::Computational => self.basis.sector_blocks(&rho.matrix),
            BasisTag::Spin => self
                .basis
                .sectors()
                .iter()
                .map(|sec| {
                    rho.matrix
                        .view((sec.offset, sec.offset), (sec.dim(), sec.dim()))
                        .into_owned()
                })
                .collect(),
        })
    }

    /// `sum_q U_q P_q rho P_q U_q^dagger`.
    pub fn syndrome_correct(&self, rho: &DensityState) -> Result<Corrected> {
        let blocks = self.blocks(rho)?;
        let weights = blocks.iter().map(|b| linalg::trace(b).re).collect();
        // U_q sends |s,l,m> to i|N/2,1,m>; the phases cancel under conjugation
        let top = self.basis.top_sector();
        let n1 = top.dim();
        let mut acc = CMatrix::zeros(n1, n1);
        for (sec, b) in self.basis.sectors().iter().zip(&blocks) {
            let shift = (top.s - sec.s) as usize;
            let mut view = acc.view_mut((shift, shift), (sec.dim(), sec.dim()));
            view += b;
        }
        let matrix = match rho.basis {
            BasisTag::Spin => {
                let dim = self.basis.dim();
                let mut full = CMatrix::zeros(dim, dim);
                full.view_mut((top.offset, top.offset), (n1, n1))
                    .copy_from(&acc);
                full
            }
            BasisTag::Computational => self.back_transform(&acc, &[top]),
        };
        Ok(Corrected {
            rho: DensityState {
                n: rho.n,
                matrix,
                basis: rho.basis,
            },
            sector_weights: weights,
        })
    }

    /// `sum_{q, q'} p_c(q, q') U_{q'} P_q rho P_q U_{q'}^dagger`.
    pub fn syndrome_correct_faulty(
        &self,
        rho: &DensityState,
        confusion: &ReadoutConfusion,
    ) -> Result<Corrected> {
        if confusion.q_max != self.q_max() {
            return Err(Error::invalid(format!(
                "confusion matrix covers {} sectors, code has {}",
                confusion.q_max,
                self.q_max()
            )));
        }
        if confusion.is_identity() {
            return self.syndrome_correct(rho);
        }
        let blocks = self.blocks(rho)?;
        let weights = blocks.iter().map(|b| linalg::trace(b).re).collect();
        let dim = self.basis.dim();
        let sectors = self.basis.sectors();
        let mut out = CMatrix::zeros(dim, dim);
        let mut touched = vec![false; sectors.len()];
        let sector_of = |c: usize| sectors.partition_point(|s| s.offset + s.dim() <= c);
        for (q, (sec, b)) in sectors.iter().zip(&blocks).enumerate() {
            for (q_read, u) in self.corrections.iter().enumerate() {
                let w = confusion.get(q, q_read);
                if w == 0.0 {
                    continue;
                }
                let cols: Vec<usize> = sec.columns().collect();
                for (a, &ca) in cols.iter().enumerate() {
                    let (ta, pa) = (u.target(ca), u.phase(ca) * w);
                    touched[sector_of(ta)] = true;
                    for (bb, &cb) in cols.iter().enumerate() {
                        out[(ta, u.target(cb))] += pa * b[(a, bb)] * u.phase(cb).conj();
                    }
                }
            }
        }
        let matrix = match rho.basis {
            BasisTag::Spin => out,
            BasisTag::Computational => {
                let support: Vec<Sector> = sectors
                    .iter()
                    .zip(&touched)
                    .filter(|(_, &t)| t)
                    .map(|(s, _)| *s)
                    .collect();
                let cols: Vec<usize> = support.iter().flat_map(|s| s.columns()).collect();
                let sub = CMatrix::from_fn(cols.len(), cols.len(), |i, j| out[(cols[i], cols[j])]);
                self.back_transform(&sub, &support)
            }
        };
        Ok(Corrected {
            rho: DensityState {
                n: rho.n,
                matrix,
                basis: rho.basis,
            },
            sector_weights: weights,
        })
    }

    /// `T_S X T_S^dagger` where `T_S` holds the columns of `support`.
    fn back_transform(&self, x: &CMatrix, support: &[Sector]) -> CMatrix {
        let cols: Vec<usize> = support.iter().flat_map(|s| s.columns()).collect();
        match self.basis.real_transform() {
            Some(r) => {
                let t = r.select_columns(&cols);
                let (re, im) = linalg::split(x);
                let tt = t.transpose();
                linalg::join(&(&t * (&re * &tt)), &(&t * (&im * &tt)))
            }
            None => {
                let t = self.basis.transform().select_columns(&cols);
                &t * x * t.adjoint()
            }
        }
    }

    /// Code-space amplitudes of `v` on `|N/2, 1, m>`, ascending `m`.
    pub fn top_amplitudes(&self, v: &CVector) -> CVector {
        let top = self.basis.top_sector();
        self.basis
            .transform()
            .columns(top.offset, top.dim())
            .adjoint()
            * v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeParameters {
    pub n: usize,
    /// Largest `|m|` used by code words.
    pub m_max: f64,
}

/// `d = N/2 - m_max`.
pub fn code_distance(params: CodeParameters) -> Result<f64> {
    let half = params.n as f64 / 2.0;
    if !(params.m_max >= 0.0 && params.m_max <= half) || (2.0 * params.m_max).fract() != 0.0 {
        return Err(Error::invalid(format!(
            "m_max = {} must be a half-integer in [0, {half}]",
            params.m_max
        )));
    }
    Ok(half - params.m_max)
}
