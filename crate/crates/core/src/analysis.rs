//! Closed-form diagnostics: deformation factors and their fit, Knill-Laflamme
//! matrices for phase-flip and depolarizing errors, the approximate-KL bound
//! and the exact KL check for idealized scattering errors.
//!
//! Throughout, `m` is the `S_z` eigenvalue. The maximal-spin deformation is
//! then `<N/2, m| sigma^z_n |N/2, m> = 2m/N`.

use std::io::Write;

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4, SymmetricEigen, Vector2};
use serde::Serialize;

use crate::basis::SpinBasis;
use crate::channels::IdealErrorSet;
use crate::error::{Error, Result};
use crate::linalg::{CVector, C64, ZERO};
use crate::ops::{Axis, PauliOp};
use crate::qec::SpinorCode;
use crate::states::{encode_coherent, q_function_top, QGrid, QGridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeformationEntry {
    pub s: i32,
    pub l: usize,
    pub site: usize,
    pub m: i32,
    pub value: C64,
}

/// `D_sl^(n)(m) = <s,l,m| sigma^axis_n |N/2,1,m>` for every sector and `m`.
#[derive(Debug, Clone)]
pub struct DeformationTable {
    pub n_qubits: usize,
    pub axis: Axis,
    pub entries: Vec<DeformationEntry>,
}

/// Deformation factors for a phase flip on `site` in the canonical basis.
pub fn deformation_factors(basis: &SpinBasis, site: usize) -> Result<DeformationTable> {
    deformation_table(basis, Axis::Z, &[site])
}

/// Deformation factors of `sigma^axis` on each of `sites`, taken between the
/// columns of `basis` (use the x-rotated basis with `Axis::X` for bit flips).
pub fn deformation_table(
    basis: &SpinBasis,
    axis: Axis,
    sites: &[usize],
) -> Result<DeformationTable> {
    let n = basis.n();
    let top = basis.top_sector();
    let t = basis.transform();
    let mut entries = Vec::new();
    for &site in sites {
        let pauli = PauliOp::new(n, axis, site)?.to_monomial();
        for m in -top.s..=top.s {
            let err = pauli.apply(&t.column(top.column(m)).into_owned());
            for sec in basis.sectors() {
                if !sec.contains_m(m) {
                    continue;
                }
                let value = t.column(sec.column(m)).dotc(&err);
                entries.push(DeformationEntry {
                    s: sec.s,
                    l: sec.l,
                    site,
                    m,
                    value,
                });
            }
        }
    }
    Ok(DeformationTable {
        n_qubits: n,
        axis,
        entries,
    })
}

impl DeformationTable {
    pub fn get(&self, s: i32, l: usize, site: usize, m: i32) -> Option<C64> {
        self.entries
            .iter()
            .find(|e| e.s == s && e.l == l && e.site == site && e.m == m)
            .map(|e| e.value)
    }

    fn sites(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.entries.iter().map(|e| e.site).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// `max_(n, m) |sum_(s,l) |D|^2 - 1|`.
    pub fn completeness_defect(&self) -> f64 {
        let half = self.n_qubits as i32 / 2;
        let mut worst = 0.0_f64;
        for site in self.sites() {
            for m in -half..=half {
                let sum: f64 = self
                    .entries
                    .iter()
                    .filter(|e| e.site == site && e.m == m)
                    .map(|e| e.value.norm_sqr())
                    .sum();
                worst = worst.max((sum - 1.0).abs());
            }
        }
        worst
    }

    /// Largest `|D|` in sectors with `s < N/2 - 1`.
    pub fn sparsity_defect(&self) -> f64 {
        let cutoff = self.n_qubits as i32 / 2 - 1;
        self.entries
            .iter()
            .filter(|e| e.s < cutoff)
            .fold(0.0, |a, e| a.max(e.value.norm()))
    }

    /// `max_m |D_top(m) - 2m/N|`.
    pub fn top_linear_defect(&self) -> f64 {
        let half = self.n_qubits as i32 / 2;
        let nf = self.n_qubits as f64;
        self.entries
            .iter()
            .filter(|e| e.s == half)
            .fold(0.0, |a, e| {
                a.max((e.value - C64::new(2.0 * e.m as f64 / nf, 0.0)).norm())
            })
    }

    /// Header `s,l,n,m,re_D,im_D`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "s,l,n,m,re_D,im_D")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{:.16e},{:.16e}",
                e.s, e.l, e.site, e.m, e.value.re, e.value.im
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AmplitudeEntry {
    pub l: usize,
    pub site: usize,
    pub amplitude: C64,
}

/// Fit of the `s = N/2 - 1` factors to `A_l^(n) (1 + b x^2 + c x^4)`, `x = 2m/N`.
#[derive(Debug, Clone, Serialize)]
pub struct DeformationFit {
    pub n_qubits: usize,
    pub amplitudes: Vec<AmplitudeEntry>,
    pub b: f64,
    pub c: f64,
    /// Largest `|D/A - (1 + b x^2 + c x^4)|` over all fitted points.
    pub residual: f64,
    /// Largest spread of `D/A` between different `(l, n)` at equal `m`.
    pub shape_spread: f64,
    /// `max_n |sum_l |A_l^(n)|^2 - 1|`.
    pub amplitude_norm_defect: f64,
}

pub fn fit_deformation(table: &DeformationTable) -> Result<DeformationFit> {
    let n = table.n_qubits;
    let s = n as i32 / 2 - 1;
    let nf = n as f64;
    let mut amplitudes = Vec::new();
    let mut points: Vec<(f64, C64)> = Vec::new();
    let mut shapes: std::collections::BTreeMap<i32, Vec<C64>> = Default::default();
    for site in table.sites() {
        let ls: Vec<usize> = {
            let mut v: Vec<usize> = table
                .entries
                .iter()
                .filter(|e| e.s == s && e.site == site)
                .map(|e| e.l)
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        };
        for l in ls {
            let a = table.get(s, l, site, 0).unwrap_or(ZERO);
            amplitudes.push(AmplitudeEntry {
                l,
                site,
                amplitude: a,
            });
            if a.norm() < 1e-12 {
                continue;
            }
            for e in table
                .entries
                .iter()
                .filter(|e| e.s == s && e.l == l && e.site == site)
            {
                let g = e.value / a;
                points.push((2.0 * e.m as f64 / nf, g));
                shapes.entry(e.m).or_default().push(g);
            }
        }
    }
    if points.is_empty() {
        return Err(Error::invariant(
            "deformation fit",
            "every A_l^(n) vanishes; the shape is undefined",
        ));
    }
    let rows = points.len();
    let design = DMatrix::from_fn(rows, 2, |r, c| points[r].0.powi(2 * (c as i32 + 1)));
    let rhs = DVector::from_fn(rows, |r, _| points[r].1.re - 1.0);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::invariant("deformation fit", e.to_string()))?;
    let (b, c) = (coef[0], coef[1]);
    let residual = points.iter().fold(0.0_f64, |acc, (x, g)| {
        let model = 1.0 + b * x * x + c * x.powi(4);
        acc.max((g - C64::new(model, 0.0)).norm())
    });
    let shape_spread = shapes.values().fold(0.0_f64, |acc, gs| {
        gs.iter().fold(acc, |acc, g| acc.max((g - gs[0]).norm()))
    });
    let mut amplitude_norm_defect = 0.0_f64;
    for site in table.sites() {
        let sum: f64 = amplitudes
            .iter()
            .filter(|a| a.site == site)
            .map(|a| a.amplitude.norm_sqr())
            .sum();
        amplitude_norm_defect = amplitude_norm_defect.max((sum - 1.0).abs());
    }
    Ok(DeformationFit {
        n_qubits: n,
        amplitudes,
        b,
        c,
        residual,
        shape_spread,
        amplitude_norm_defect,
    })
}

fn check_open_probability(p: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("p = {p} must lie in (0, 1)")));
    }
    Ok(())
}

/// `a_m = sqrt(p(1-p)) 2m/N`.
pub fn phase_flip_offdiagonal(n: usize, p: f64, m: i32) -> f64 {
    (p * (1.0 - p)).sqrt() * 2.0 * m as f64 / n as f64
}

/// `[[1-p, a_m], [a_m, p]]` for the error set `{sqrt(1-p) I, sqrt(p) sigma^z_n}`.
pub fn kl_matrix_phase_flip(n: usize, p: f64, m: i32) -> Result<Matrix2<f64>> {
    check_open_probability(p)?;
    if m.unsigned_abs() as usize > n / 2 {
        return Err(Error::invalid(format!("|m| = {} exceeds N/2", m.abs())));
    }
    let a = phase_flip_offdiagonal(n, p, m);
    Ok(Matrix2::new(1.0 - p, a, a, p))
}

/// `<C_m| E_i^dagger E_j |C_m'>` for `{sqrt(1-p) I, sqrt(p) sigma^z_site}`.
pub fn kl_phase_flip_brute(
    basis: &SpinBasis,
    p: f64,
    m: i32,
    m_prime: i32,
    site: usize,
) -> Result<Matrix2<C64>> {
    let top = basis.top_sector();
    let cm = basis.column(top.s, top.l, m)?;
    let cmp = basis.column(top.s, top.l, m_prime)?;
    let z = PauliOp::new(basis.n(), Axis::Z, site)?.to_monomial();
    let ops = [
        cmp.map(|v| v * (1.0 - p).sqrt()),
        z.apply(&cmp).map(|v| v * p.sqrt()),
    ];
    let bra = [
        cm.map(|v| v * (1.0 - p).sqrt()),
        z.apply(&cm).map(|v| v * p.sqrt()),
    ];
    Ok(Matrix2::from_fn(|i, j| bra[i].dotc(&ops[j])))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEigen {
    /// `(1 + Delta)/2` and `(1 - Delta)/2` for unit-trace input.
    pub values: [f64; 2],
    pub vectors: [Vector2<f64>; 2],
}

/// Eigenpairs of a real symmetric `2x2` matrix, larger eigenvalue first. The
/// leading eigenvector tends to `(1, 0)` as the off-diagonal vanishes with
/// `w00 > w11`.
pub fn kl_eigen(w: &Matrix2<f64>) -> KlEigen {
    let (a, d, off) = (w[(0, 0)], w[(1, 1)], 0.5 * (w[(0, 1)] + w[(1, 0)]));
    let mean = 0.5 * (a + d);
    let delta = ((a - d).powi(2) + 4.0 * off * off).sqrt();
    let (l0, l1) = (mean + 0.5 * delta, mean - 0.5 * delta);
    let c1 = Vector2::new(l0 - d, off);
    let c2 = Vector2::new(off, l0 - a);
    let v0 = if c1.norm() >= c2.norm() { c1 } else { c2 };
    let v0 = if v0.norm() == 0.0 {
        Vector2::new(1.0, 0.0)
    } else {
        v0 / v0.norm()
    };
    KlEigen {
        values: [l0, l1],
        vectors: [v0, Vector2::new(-v0[1], v0[0])],
    }
}

/// `Delta_m = sqrt(4 a_m^2 + (1 - 2p)^2)`.
pub fn kl_delta(n: usize, p: f64, m: i32) -> f64 {
    let a = phase_flip_offdiagonal(n, p, m);
    (4.0 * a * a + (1.0 - 2.0 * p).powi(2)).sqrt()
}

/// `r = 2|a_m| / |1 - 2p|`; the eigenvectors are m-independent when `r << 1`.
/// Infinite at `p = 1/2` with `m != 0`.
pub fn kl_criterion(n: usize, p: f64, m: i32) -> Result<f64> {
    check_open_probability(p)?;
    if m == 0 {
        return Ok(0.0);
    }
    let gamma = (1.0 - 2.0 * p).abs();
    if gamma == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(2.0 * phase_flip_offdiagonal(n, p, m).abs() / gamma)
}

const PAULI_LABELS: [&str; 4] = ["I", "x", "y", "z"];

/// Code-word band `|m| <= floor(N^exponent)`, capped at `N/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandSpec {
    pub exponent: f64,
}

impl Default for BandSpec {
    fn default() -> Self {
        Self { exponent: 0.5 }
    }
}

impl BandSpec {
    pub fn m_max(&self, n: usize) -> i32 {
        let raw = (n as f64).powf(self.exponent);
        // floor with a guard against sqrt(4) = 1.9999...
        let k = (raw + 1e-9).floor() as i32;
        k.min(n as i32 / 2)
    }
}

/// `D^x_m = sqrt((N+2m)(N-2m-2)) / (2N)`, clamped at 0.
pub fn dx_factor(n: usize, m: i32) -> f64 {
    let (nf, mf) = (n as f64, m as f64);
    ((nf + 2.0 * mf) * (nf - 2.0 * mf - 2.0)).max(0.0).sqrt() / (2.0 * nf)
}

/// `D^z_m = 2m/N`.
pub fn dz_factor(n: usize, m: i32) -> f64 {
    2.0 * m as f64 / n as f64
}

/// Exact `<C_m|E_i^dagger E_j|C_m'>` and the diagonal-in-`m` approximation
/// for the depolarizing set `{sqrt(1-p) I, sqrt(p/3) sigma^(x,y,z)_site}`.
pub fn kl_matrix_depolarizing(
    basis: &SpinBasis,
    p: f64,
    m: i32,
    m_prime: i32,
    site: usize,
) -> Result<(Matrix4<C64>, Matrix4<C64>)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("p = {p} outside [0, 1]")));
    }
    let top = basis.top_sector();
    let cm = basis.column(top.s, top.l, m)?;
    let cmp = basis.column(top.s, top.l, m_prime)?;
    let apply = |v: &CVector| -> Result<Vec<CVector>> {
        let mut out = vec![v.map(|z| z * (1.0 - p).sqrt())];
        for axis in Axis::ALL {
            let op = PauliOp::new(basis.n(), axis, site)?.to_monomial();
            out.push(op.apply(v).map(|z| z * (p / 3.0).sqrt()));
        }
        Ok(out)
    };
    let (bra, ket) = (apply(&cm)?, apply(&cmp)?);
    let exact = Matrix4::from_fn(|i, j| bra[i].dotc(&ket[j]));
    Ok((exact, depolarizing_analytic(basis.n(), p, m, m_prime)))
}

fn depolarizing_analytic(n: usize, p: f64, m: i32, m_prime: i32) -> Matrix4<C64> {
    let mut f = Matrix4::from_element(ZERO);
    if m != m_prime {
        return f;
    }
    let q = ((1.0 - p) * p / 3.0).sqrt();
    let (dx, dz) = (dx_factor(n, m), dz_factor(n, m));
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    f[(0, 0)] = r(1.0 - p);
    for k in 1..4 {
        f[(k, k)] = r(p / 3.0);
    }
    f[(0, 1)] = r(q * dx);
    f[(1, 0)] = r(q * dx);
    f[(0, 3)] = r(q * dz);
    f[(3, 0)] = r(q * dz);
    f[(1, 2)] = i(p / 3.0 * dz);
    f[(2, 1)] = i(-p / 3.0 * dz);
    f[(2, 3)] = i(p / 3.0 * dx);
    f[(3, 2)] = i(-p / 3.0 * dx);
    f
}

/// Large-`N` limit of the depolarizing KL matrix.
pub fn depolarizing_limit(p: f64) -> Matrix4<C64> {
    let q = ((1.0 - p) * p / 3.0).sqrt();
    let mut a = Matrix4::from_element(ZERO);
    a[(0, 0)] = C64::new(1.0 - p, 0.0);
    for k in 1..4 {
        a[(k, k)] = C64::new(p / 3.0, 0.0);
    }
    a[(0, 1)] = C64::new(q / 2.0, 0.0);
    a[(1, 0)] = C64::new(q / 2.0, 0.0);
    a[(2, 3)] = C64::new(0.0, p / 6.0);
    a[(3, 2)] = C64::new(0.0, -p / 6.0);
    a
}

/// Convergence constants `(C, L)` for the depolarizing set.
pub fn depolarizing_constants(p: f64) -> (Matrix4<f64>, Matrix4<f64>) {
    let q = ((1.0 - p) * p / 3.0).sqrt();
    let mut c = Matrix4::zeros();
    c[(0, 1)] = q / 4.0;
    c[(1, 0)] = q / 4.0;
    c[(2, 3)] = p / 12.0;
    c[(3, 2)] = p / 12.0;
    let mut l = Matrix4::zeros();
    l[(0, 1)] = q / 2.0;
    l[(1, 0)] = q / 2.0;
    l[(0, 3)] = q;
    l[(3, 0)] = q;
    l[(1, 2)] = p / 3.0;
    l[(2, 1)] = p / 3.0;
    l[(2, 3)] = p / 6.0;
    l[(3, 2)] = p / 6.0;
    (c, l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KlEntry {
    pub i: usize,
    pub j: usize,
    pub m: i32,
    pub m_prime: i32,
    pub exact: C64,
    pub analytic: C64,
}

#[derive(Debug, Clone)]
pub struct KlReport {
    pub label: String,
    pub n_qubits: usize,
    pub p: f64,
    pub site: usize,
    pub band_m_max: i32,
    pub entries: Vec<KlEntry>,
    pub alpha: Matrix4<C64>,
    pub eigenvalues: [f64; 4],
    pub c: Matrix4<f64>,
    pub l: Matrix4<f64>,
    pub k_star: f64,
    /// `2 r K* / sqrt(N)` with `r = 4`.
    pub epsilon_n: f64,
    /// Supremum of `|<C_m|F_k^dagger F_l|C_m'> - lambda_k delta_kl delta_mm'|`
    /// with exact matrix elements.
    pub observed_sup: f64,
    /// The same supremum with the diagonal-in-`m` approximation.
    pub analytic_sup: f64,
    /// Largest `|f_ij(m,m) - conj(f_ji(m,m))|`.
    pub hermiticity_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlBoundJson {
    #[serde(rename = "K_star")]
    pub k_star: f64,
    #[serde(rename = "epsilon_N")]
    pub epsilon_n: f64,
    pub observed_sup: f64,
    pub pass: bool,
}

impl KlReport {
    pub fn pass(&self) -> bool {
        self.observed_sup <= self.epsilon_n
    }

    pub fn bound_json(&self) -> KlBoundJson {
        KlBoundJson {
            k_star: self.k_star,
            epsilon_n: self.epsilon_n,
            observed_sup: self.observed_sup,
            pass: self.pass(),
        }
    }

    /// Header `i,j,m,mprime,re_f,im_f,re_analytic,im_analytic`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "i,j,m,mprime,re_f,im_f,re_analytic,im_analytic")?;
        for e in &self.entries {
            writeln!(
                w,
                "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                PAULI_LABELS[e.i],
                PAULI_LABELS[e.j],
                e.m,
                e.m_prime,
                e.exact.re,
                e.exact.im,
                e.analytic.re,
                e.analytic.im
            )?;
        }
        Ok(())
    }
}

/// Checks the approximate Knill-Laflamme bound for single-qubit depolarizing
/// errors on `site` over the band of code words.
pub fn kl_bound_check(basis: &SpinBasis, p: f64, band: BandSpec, site: usize) -> Result<KlReport> {
    let n = basis.n();
    let alpha = depolarizing_limit(p);
    let herm = (alpha - alpha.adjoint())
        .iter()
        .fold(0.0_f64, |a, z| a.max(z.norm()));
    if herm > 1e-10 {
        return Err(Error::invariant(
            "Hermitian limit matrix",
            format!("defect {herm:e}"),
        ));
    }
    let eig = SymmetricEigen::new(alpha);
    let v = eig.eigenvectors;
    let lambda = eig.eigenvalues;
    let (c, l) = depolarizing_constants(p);
    let k_star = c.sum() + l.sum();
    let r = 4.0;
    let epsilon_n = 2.0 * r * k_star / (n as f64).sqrt();
    let m_max = band.m_max(n);
    let mut entries = Vec::new();
    let (mut observed, mut analytic_sup, mut hermiticity) = (0.0_f64, 0.0_f64, 0.0_f64);
    for m in -m_max..=m_max {
        for mp in -m_max..=m_max {
            let (f, fa) = kl_matrix_depolarizing(basis, p, m, mp, site)?;
            for i in 0..4 {
                for j in 0..4 {
                    entries.push(KlEntry {
                        i,
                        j,
                        m,
                        m_prime: mp,
                        exact: f[(i, j)],
                        analytic: fa[(i, j)],
                    });
                }
            }
            if m == mp {
                hermiticity =
                    hermiticity.max((f - f.adjoint()).iter().fold(0.0, |a, z| a.max(z.norm())));
            }
            let g = v.adjoint() * f * v;
            let ga = v.adjoint() * fa * v;
            for k in 0..4 {
                for kk in 0..4 {
                    let target = if k == kk && m == mp { lambda[k] } else { 0.0 };
                    observed = observed.max((g[(k, kk)] - target).norm());
                    analytic_sup = analytic_sup.max((ga[(k, kk)] - target).norm());
                }
            }
        }
    }
    Ok(KlReport {
        label: format!("depolarizing(p={p}, n={site})"),
        n_qubits: n,
        p,
        site,
        band_m_max: m_max,
        entries,
        alpha,
        eigenvalues: [lambda[0], lambda[1], lambda[2], lambda[3]],
        c,
        l,
        k_star,
        epsilon_n,
        observed_sup: observed,
        analytic_sup,
        hermiticity_defect: hermiticity,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct IdealKlReport {
    pub n_qubits: usize,
    pub m_max: i32,
    pub operators: usize,
    /// Largest `|<C_m|F_q^dagger F_q'|C_m'>|` with `m != m'`.
    pub max_off_diagonal_m: f64,
    /// Largest `|h_qq'(m) - h_qq'(-m_max)|`.
    pub max_m_variation: f64,
    pub hermiticity_defect: f64,
    /// Largest deviation from `sqrt(p_q p_q') g_qq'`.
    pub max_g_error: f64,
}

impl IdealKlReport {
    pub fn pass(&self, tol: f64) -> bool {
        self.max_off_diagonal_m < tol
            && self.max_m_variation < tol
            && self.hermiticity_defect < tol
            && self.max_g_error < tol
    }
}

/// Brute-force Knill-Laflamme matrix of an idealized error set on code words
/// `|N/2, 1, m>`, `|m| <= m_max`. The identity Kraus operator (if present)
/// counts as an error that leaves code words alone.
pub fn verify_ideal_kl(
    basis: &SpinBasis,
    errors: &IdealErrorSet,
    m_max: i32,
) -> Result<IdealKlReport> {
    let half = basis.max_spin();
    if m_max < 0 || m_max > half {
        return Err(Error::invalid(format!(
            "m_max = {m_max} outside [0, {half}]"
        )));
    }
    let top = basis.top_sector();
    let kraus = &errors.channel.kraus;
    // (s, l, probability) per Kraus operator; s = -1 marks the identity
    let mut meta: Vec<(i32, usize, f64)> = Vec::new();
    if errors.identity_probability > 0.0 {
        meta.push((-1, 0, errors.identity_probability));
    }
    meta.extend(errors.terms.iter().map(|t| (t.s, t.l, t.probability)));
    let expected = |a: usize, b: usize| -> f64 {
        let ((s, l, p), (s2, l2, p2)) = (meta[a], meta[b]);
        let edge = half - 1;
        let g = match (s == edge, s2 == edge) {
            (false, false) => 1.0,
            (true, true)
                if l == l2 => {
                    1.0
                }
            _ => 0.0,
        };
        (p * p2).sqrt() * g
    };
    let dim = basis.dim();
    let images: Vec<Vec<CVector>> = (-m_max..=m_max)
        .map(|m| {
            let mut e = CVector::from_element(dim, ZERO);
            e[top.column(m)] = C64::new(1.0, 0.0);
            kraus
                .iter()
                .map(|k| match &k.op {
                    crate::channels::KrausOp::Monomial(mm) => mm.apply(&e),
                    crate::channels::KrausOp::Dense(d) => d * &e,
                })
                .collect()
        })
        .collect();
    let k = kraus.len();
    let mut report = IdealKlReport {
        n_qubits: basis.n(),
        m_max,
        operators: k,
        max_off_diagonal_m: 0.0,
        max_m_variation: 0.0,
        hermiticity_defect: 0.0,
        max_g_error: 0.0,
    };
    for a in 0..k {
        for b in 0..k {
            let h0 = images[0][a].dotc(&images[0][b]);
            for (mi, img) in images.iter().enumerate() {
                for (mj, img2) in images.iter().enumerate() {
                    let h = img[a].dotc(&img2[b]);
                    if mi != mj {
                        report.max_off_diagonal_m = report.max_off_diagonal_m.max(h.norm());
                        continue;
                    }
                    let h_ba = img[b].dotc(&img[a]);
                    report.hermiticity_defect =
                        report.hermiticity_defect.max((h - h_ba.conj()).norm());
                    report.max_m_variation = report.max_m_variation.max((h - h0).norm());
                    report.max_g_error = report
                        .max_g_error
                        .max((h - C64::new(expected(a, b), 0.0)).norm());
                }
            }
        }
    }
    Ok(report)
}

/// Parameters of the error-projected Q-function panels.
#[derive(Debug, Clone, Copy)]
pub struct ErrorPanelSpec {
    pub alpha: C64,
    pub beta: C64,
    pub site: usize,
    /// Degeneracy index of the `s = N/2 - 1` sector; `None` picks the last.
    pub error_l: Option<usize>,
    pub grid: QGridSpec,
}

#[derive(Debug, Clone)]
pub struct ErrorPanel {
    pub label: char,
    pub axis: Option<Axis>,
    pub s: i32,
    pub l: usize,
    pub grid: QGrid,
}

/// Q-functions of `P_sl sigma^j_n |alpha, beta>` (unnormalized) for
/// `j = x, y, z` and `(s, l)` in `{(N/2, 1), (N/2 - 1, l_err)}`, plus the
/// unperturbed state. Error-sector projections are rotated back with `U_sl`
/// so their overlap with coherent states is nonzero.
pub fn error_panels(code: &SpinorCode, spec: &ErrorPanelSpec) -> Result<Vec<ErrorPanel>> {
    let basis = code.basis();
    let n = basis.n();
    let half = basis.max_spin();
    let err_s = half - 1;
    let err_l = spec.error_l.unwrap_or(basis.degeneracies()[&err_s]);
    let err_sector = basis.sector(err_s, err_l)?;
    let top = basis.top_sector();
    let psi = encode_coherent(n, spec.alpha, spec.beta)?;
    let t = basis.transform();
    let mut panels = Vec::new();
    let labels = ['a', 'b', 'c', 'd', 'e', 'f'];
    for (row, axis) in Axis::ALL.into_iter().enumerate() {
        let hit = PauliOp::new(n, axis, spec.site)?
            .to_monomial()
            .apply(&psi.amplitudes);
        for (col, sec) in [top, err_sector].into_iter().enumerate() {
            // U_sl |s,l,m> = i |N/2,1,m>; the global i drops out of Q
            let mut amps = vec![ZERO; n + 1];
            for m in -sec.s..=sec.s {
                amps[(m + half) as usize] = t.column(sec.column(m)).dotc(&hit);
            }
            panels.push(ErrorPanel {
                label: labels[2 * row + col],
                axis: Some(axis),
                s: sec.s,
                l: sec.l,
                grid: q_function_top(&amps, &spec.grid)?,
            });
        }
    }
    let amps: Vec<C64> = (-half..=half)
        .map(|m| t.column(top.column(m)).dotc(&psi.amplitudes))
        .collect();
    panels.push(ErrorPanel {
        label: 'g',
        axis: None,
        s: half,
        l: 1,
        grid: q_function_top(&amps, &spec.grid)?,
    });
    Ok(panels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qec::build_code;

    #[test]
    fn top_sector_is_linear() {
        for n in [4, 6, 8] {
            let b = SpinBasis::build(n).unwrap();
            let t = deformation_factors(&b, 1).unwrap();
            assert!(t.top_linear_defect() < 1e-12, "N={n}");
            assert!(t.get(n as i32 / 2, 1, 1, 0).unwrap().norm() < 1e-12);
            assert!(t.completeness_defect() < 1e-9);
            assert!(t.sparsity_defect() < 1e-10);
        }
    }

    #[test]
    fn shape_is_common_across_l_and_n() {
        let b = SpinBasis::build(6).unwrap();
        let t = deformation_table(&b, Axis::Z, &[1, 2]).unwrap();
        let fit = fit_deformation(&t).unwrap();
        assert!(fit.shape_spread < 1e-8);
        assert!(fit.amplitude_norm_defect < 1e-8);
    }

    #[test]
    fn n8_fit_constants() {
        let b = SpinBasis::build(8).unwrap();
        let t = deformation_table(&b, Axis::Z, &(1..=8).collect::<Vec<_>>()).unwrap();
        let fit = fit_deformation(&t).unwrap();
        assert!((fit.b - -0.484984506296).abs() < 1e-9, "b = {}", fit.b);
        assert!((fit.c - -0.207695958844).abs() < 1e-9, "c = {}", fit.c);
        // the s = N/2 - 1 shape is sqrt(1 - x^2), which a quartic cannot match at N = 8
        assert!(
            (fit.residual - 6.313e-4).abs() < 1e-6,
            "residual = {}",
            fit.residual
        );
    }

    #[test]
    fn phase_flip_matrix_matches_brute_force() {
        let n = 6;
        let b = SpinBasis::build(n).unwrap();
        let p = 0.23;
        for m in -3..=3 {
            let w = kl_matrix_phase_flip(n, p, m).unwrap();
            for mp in -3..=3 {
                let brute = kl_phase_flip_brute(&b, p, m, mp, 2).unwrap();
                for i in 0..2 {
                    for j in 0..2 {
                        let expect = if m == mp { w[(i, j)] } else { 0.0 };
                        assert!((brute[(i, j)] - C64::new(expect, 0.0)).norm() < 1e-12);
                    }
                }
            }
        }
        assert_eq!(
            kl_matrix_phase_flip(8, 0.1, 0).unwrap(),
            Matrix2::new(0.9, 0.0, 0.0, 0.1)
        );
        assert!(kl_matrix_phase_flip(8, 0.0, 0).is_err());
        assert!(kl_matrix_phase_flip(8, 0.1, 5).is_err());
    }

    #[test]
    fn eigen_closed_form() {
        let w = kl_matrix_phase_flip(8, 0.1, 2).unwrap();
        let e = kl_eigen(&w);
        let delta = kl_delta(8, 0.1, 2);
        assert!((e.values[0] - (1.0 + delta) / 2.0).abs() < 1e-14);
        assert!((e.values[1] - (1.0 - delta) / 2.0).abs() < 1e-14);
        assert!((e.values[0] + e.values[1] - 1.0).abs() < 1e-14);
        let a = phase_flip_offdiagonal(8, 0.1, 2);
        assert!((e.values[0] * e.values[1] - (0.09 - a * a)).abs() < 1e-14);
        for k in 0..2 {
            let r = w * e.vectors[k] - e.vectors[k] * e.values[k];
            assert!(r.norm() < 1e-14);
        }
        let e0 = kl_eigen(&Matrix2::new(0.9, 0.0, 0.0, 0.1));
        assert!((e0.values[0] - 0.9).abs() < 1e-15 && (e0.values[1] - 0.1).abs() < 1e-15);
        assert_eq!(e0.vectors[0], Vector2::new(1.0, 0.0));
        let e1 = kl_eigen(&Matrix2::new(0.2, 0.0, 0.0, 0.8));
        assert_eq!(e1.vectors[0], Vector2::new(0.0, 1.0));
    }

    #[test]
    fn criterion_values() {
        assert_eq!(kl_criterion(8, 0.3, 0).unwrap(), 0.0);
        assert_eq!(kl_criterion(8, 0.5, 1).unwrap(), f64::INFINITY);
        let r16 = kl_criterion(16, 0.1, 4).unwrap();
        let r64 = kl_criterion(64, 0.1, 8).unwrap();
        assert!((r64 / r16 - 0.5).abs() < 1e-12);
        assert!(kl_criterion(8, 1.0, 1).is_err());
    }

    #[test]
    fn band_widths() {
        let band = BandSpec::default();
        assert_eq!(band.m_max(4), 2);
        assert_eq!(band.m_max(8), 2);
        assert_eq!(band.m_max(10), 3);
        assert_eq!(band.m_max(2), 1);
    }

    #[test]
    fn depolarizing_limits_and_zero_p() {
        let b = SpinBasis::build(4).unwrap();
        let (f, fa) = kl_matrix_depolarizing(&b, 0.0, 1, 1, 1).unwrap();
        assert!((f[(0, 0)] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert_eq!(f.iter().filter(|z| z.norm() > 1e-15).count(), 1);
        assert_eq!(fa.iter().filter(|z| z.norm() > 1e-15).count(), 1);
        let rep = kl_bound_check(&b, 0.0, BandSpec::default(), 1).unwrap();
        assert!(rep.observed_sup < 1e-14);
        let p: f64 = 0.1;
        let q = ((1.0 - p) * p / 3.0).sqrt();
        assert!((dx_factor(10_000, 0) - 0.5).abs() < 1e-3);
        let rep = kl_bound_check(&b, p, BandSpec::default(), 1).unwrap();
        assert!((rep.k_star - (3.5 * q + 7.0 * p / 6.0)).abs() < 1e-14);
        assert!(rep.hermiticity_defect < 1e-10);
    }

    #[test]
    fn ideal_kl_holds() {
        let b = SpinBasis::build(6).unwrap();
        let set = IdealErrorSet::uniform(&b, 0.6).unwrap();
        let rep = verify_ideal_kl(&b, &set, 1).unwrap();
        assert!(rep.pass(1e-9), "{rep:?}");
        let rep = verify_ideal_kl(&b, &set, 2).unwrap();
        assert!(rep.pass(1e-9), "{rep:?}");
        // m = +-N/2 sits outside every error swap, breaking the structure
        assert!(!verify_ideal_kl(&b, &set, 3).unwrap().pass(1e-9));
    }

    #[test]
    fn seven_panels() {
        let code = build_code(SpinBasis::build(4).unwrap()).unwrap();
        let spec = ErrorPanelSpec {
            alpha: C64::new((std::f64::consts::PI / 8.0).cos(), 0.0),
            beta: C64::new((std::f64::consts::PI / 8.0).sin(), 0.0),
            site: 1,
            error_l: None,
            grid: QGridSpec {
                n_theta: 8,
                n_phi: 8,
            },
        };
        let panels = error_panels(&code, &spec).unwrap();
        assert_eq!(panels.len(), 7);
        assert_eq!(panels[1].l, 3);
        assert_eq!(panels[6].label, 'g');
        let max_g = panels[6].grid.values.iter().cloned().fold(0.0, f64::max);
        assert!(max_g <= 1.0 + 1e-9);
    }
}
