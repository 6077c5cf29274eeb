//! Encoded states, Bloch-vector readout, the logical error metric and Husimi
//! Q-functions.
//!
//! The maximal-spin states `|N/2, 1, m>` of the canonical basis are the
//! normalized Dicke states with all-positive amplitudes, so projections onto
//! the code space are computed by summing over Hamming-weight classes rather
//! than through the full basis transform.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::basis::SpinBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, binomial, hermiticity_defect, CMatrix, CVector, C64, ZERO};
use crate::ops::{Axis, PauliOp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisTag {
    Computational,
    Spin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    pub n: usize,
    pub amplitudes: CVector,
    pub basis: BasisTag,
}

impl PureState {
    pub fn new(n: usize, amplitudes: CVector, basis: BasisTag) -> Result<Self> {
        if amplitudes.len() != 1usize << n {
            return Err(Error::invalid(format!(
                "state of length {} does not match N = {n}",
                amplitudes.len()
            )));
        }
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("state norm {norm} differs from 1")));
        }
        Ok(Self {
            n,
            amplitudes,
            basis,
        })
    }

    pub fn to_computational(&self, basis: &SpinBasis) -> PureState {
        match self.basis {
            BasisTag::Computational => self.clone(),
            BasisTag::Spin => PureState {
                n: self.n,
                amplitudes: basis.vector_to_computational(&self.amplitudes),
                basis: BasisTag::Computational,
            },
        }
    }

    pub fn to_spin(&self, basis: &SpinBasis) -> PureState {
        match self.basis {
            BasisTag::Spin => self.clone(),
            BasisTag::Computational => PureState {
                n: self.n,
                amplitudes: basis.vector_to_spin(&self.amplitudes),
                basis: BasisTag::Spin,
            },
        }
    }

    pub fn density(&self) -> DensityState {
        DensityState {
            n: self.n,
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
            basis: self.basis,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub n: usize,
    pub matrix: CMatrix,
    pub basis: BasisTag,
}

impl DensityState {
    pub fn new(n: usize, matrix: CMatrix, basis: BasisTag) -> Result<Self> {
        let dim = 1usize << n;
        if matrix.shape() != (dim, dim) {
            return Err(Error::invalid(format!(
                "density matrix shape {:?} does not match N = {n}",
                matrix.shape()
            )));
        }
        Ok(Self { n, matrix, basis })
    }

    /// `I / 2^N`.
    pub fn maximally_mixed(n: usize) -> Self {
        let dim = 1usize << n;
        Self {
            n,
            matrix: CMatrix::identity(dim, dim).map(|z| z / dim as f64),
            basis: BasisTag::Computational,
        }
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// Hermiticity and unit trace to 1e-10; with `spectrum` also checks
    /// eigenvalues >= -1e-9.
    pub fn check(&self, spectrum: bool) -> Result<()> {
        let herm = hermiticity_defect(&self.matrix);
        if herm > 1e-10 {
            return Err(Error::invariant(
                "density hermiticity",
                format!("defect {herm:e}"),
            ));
        }
        let tr = self.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-10 {
            return Err(Error::invariant("density trace", format!("trace {tr}")));
        }
        if spectrum {
            let herm_part = (&self.matrix + self.matrix.adjoint()).map(|z| z * 0.5);
            let min = SymmetricEigen::new(herm_part)
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            if min < -1e-9 {
                return Err(Error::invariant(
                    "density positivity",
                    format!("eigenvalue {min:e}"),
                ));
            }
        }
        Ok(())
    }

    pub fn to_computational(&self, basis: &SpinBasis) -> DensityState {
        match self.basis {
            BasisTag::Computational => self.clone(),
            BasisTag::Spin => DensityState {
                n: self.n,
                matrix: basis.to_computational(&self.matrix),
                basis: BasisTag::Computational,
            },
        }
    }

    pub fn to_spin(&self, basis: &SpinBasis) -> DensityState {
        match self.basis {
            BasisTag::Spin => self.clone(),
            BasisTag::Computational => DensityState {
                n: self.n,
                matrix: basis.to_spin(&self.matrix),
                basis: BasisTag::Spin,
            },
        }
    }
}

/// Normalized collective expectations `<S_j> / (N/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochReadout {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl BlochReadout {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// Unit vector for polar angle `theta` and azimuth `phi`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self::new(
            theta.sin() * phi.cos(),
            theta.sin() * phi.sin(),
            theta.cos(),
        )
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// `(theta, phi)` with `phi` in `(-pi, pi]`; `phi` is 0 on the poles.
    pub fn angles(&self) -> (f64, f64) {
        let rho = self.x.hypot(self.y);
        (
            rho.atan2(self.z),
            if rho == 0.0 {
                0.0
            } else {
                self.y.atan2(self.x)
            },
        )
    }

    pub fn distance(&self, other: &BlochReadout) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// Normalizes `(alpha, beta)`; the flag reports whether rescaling was needed.
pub fn normalize_amplitudes(alpha: C64, beta: C64) -> Result<(C64, C64, bool)> {
    let norm = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::invalid(
            "coherent-state amplitudes must be finite and not both zero",
        ));
    }
    if (norm * norm - 1.0).abs() <= 1e-9 {
        return Ok((alpha, beta, false));
    }
    Ok((alpha / norm, beta / norm, true))
}

/// `alpha = cos(theta/2)`, `beta = e^{i phi} sin(theta/2)`.
pub fn coherent_amplitudes(theta: f64, phi: f64) -> (C64, C64) {
    (
        C64::new((theta / 2.0).cos(), 0.0),
        C64::from_polar((theta / 2.0).sin(), phi),
    )
}

/// `(alpha|0> + beta|1>)^{(x)N}` in the computational basis. Inputs that are
/// not normalized are rescaled with a logged warning.
pub fn encode_coherent(n: usize, alpha: C64, beta: C64) -> Result<PureState> {
    let (alpha, beta, rescaled) = normalize_amplitudes(alpha, beta)?;
    if rescaled {
        log::warn!("coherent-state amplitudes renormalized to unit norm");
    }
    if n == 0 || n > 30 {
        return Err(Error::invalid(format!("unsupported qubit count {n}")));
    }
    let alpha_pow: Vec<C64> = (0..=n).map(|k| alpha.powu(k as u32)).collect();
    let beta_pow: Vec<C64> = (0..=n).map(|k| beta.powu(k as u32)).collect();
    let amps = CVector::from_fn(1usize << n, |i, _| {
        let ones = i.count_ones() as usize;
        alpha_pow[n - ones] * beta_pow[ones]
    });
    Ok(PureState {
        n,
        amplitudes: amps,
        basis: BasisTag::Computational,
    })
}

/// Amplitudes of a coherent state on `|N/2, 1, m>`, ascending `m`:
/// `sqrt(C(N, k)) alpha^k beta^(N-k)` with `k = m + N/2`.
pub fn dicke_amplitudes(n: usize, alpha: C64, beta: C64) -> Vec<C64> {
    (0..=n)
        .map(|k| {
            alpha.powu(k as u32)
                * beta.powu((n - k) as u32)
                * (binomial(n as u64, k as i64) as f64).sqrt()
        })
        .collect()
}

/// `S_z` eigenvalue of computational basis index `i` (site 1 is the MSB).
pub fn sz_of_index(n: usize, i: usize) -> i32 {
    n as i32 / 2 - i.count_ones() as i32
}

/// Multiplies each computational amplitude by `exp(i xi m^2)`, `m` its
/// `S_z` eigenvalue. On a coherent state this is the one-axis twisted state.
pub fn spin_squeeze(state: &PureState, xi: f64) -> Result<PureState> {
    if state.basis != BasisTag::Computational {
        return Err(Error::invalid(
            "spin_squeeze expects a computational-basis state",
        ));
    }
    let n = state.n;
    let amps = CVector::from_fn(state.amplitudes.len(), |i, _| {
        let m = sz_of_index(n, i) as f64;
        state.amplitudes[i] * C64::from_polar(1.0, xi * m * m)
    });
    Ok(PureState {
        n,
        amplitudes: amps,
        basis: BasisTag::Computational,
    })
}

/// `tr(rho S_axis)` using the Pauli monomials directly.
pub fn collective_expectation(rho: &CMatrix, n: usize, axis: Axis) -> Result<f64> {
    let mut acc = ZERO;
    for site in 1..=n {
        let p = PauliOp::new(n, axis, site)?.to_monomial();
        for i in 0..rho.nrows() {
            acc += rho[(i, p.target(i))] * p.phase(i);
        }
    }
    Ok(0.5 * acc.re)
}

/// `(tr(rho S_x), tr(rho S_y), tr(rho S_z)) / (N/2)`.
pub fn decode_bloch(rho: &DensityState) -> Result<BlochReadout> {
    if rho.basis != BasisTag::Computational {
        return Err(Error::invalid(
            "decode_bloch expects a computational-basis density matrix",
        ));
    }
    let half = rho.n as f64 / 2.0;
    let e = |axis| collective_expectation(&rho.matrix, rho.n, axis).map(|v| v / half);
    Ok(BlochReadout::new(e(Axis::X)?, e(Axis::Y)?, e(Axis::Z)?))
}

/// Half the Euclidean distance between normalized Bloch vectors, i.e.
/// `(1/N) sqrt(sum_j (<S_j> - <S_j>_0)^2)`.
pub fn logical_error(rho: &DensityState, reference: &BlochReadout) -> Result<f64> {
    Ok(0.5 * decode_bloch(rho)?.distance(reference))
}

/// Projection of a computational-basis state onto the maximal-spin sector,
/// as amplitudes on `|N/2, 1, m>` in ascending `m`.
pub fn top_sector_amplitudes(state: &PureState) -> Result<Vec<C64>> {
    if state.basis != BasisTag::Computational {
        return Err(Error::invalid("expected a computational-basis state"));
    }
    let n = state.n;
    let mut out = vec![ZERO; n + 1];
    for (i, a) in state.amplitudes.iter().enumerate() {
        out[n - i.count_ones() as usize] += *a;
    }
    for (k, v) in out.iter_mut().enumerate() {
        *v /= (binomial(n as u64, k as i64) as f64).sqrt();
    }
    Ok(out)
}

/// `P rho P` restricted to the maximal-spin sector, ascending `m` on both axes.
pub fn top_sector_block(rho: &DensityState) -> Result<CMatrix> {
    if rho.basis != BasisTag::Computational {
        return Err(Error::invalid(
            "expected a computational-basis density matrix",
        ));
    }
    let n = rho.n;
    let mut out = CMatrix::zeros(n + 1, n + 1);
    for j in 0..rho.matrix.ncols() {
        let kj = n - j.count_ones() as usize;
        for i in 0..rho.matrix.nrows() {
            out[(n - i.count_ones() as usize, kj)] += rho.matrix[(i, j)];
        }
    }
    let norms: Vec<f64> = (0..=n)
        .map(|k| (binomial(n as u64, k as i64) as f64).sqrt())
        .collect();
    Ok(CMatrix::from_fn(n + 1, n + 1, |a, b| {
        out[(a, b)] / (norms[a] * norms[b])
    }))
}

/// Uniform `theta x phi` sampling. `theta` spans `[0, pi]` including both
/// poles; `phi` spans `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QGridSpec {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for QGridSpec {
    fn default() -> Self {
        Self {
            n_theta: 64,
            n_phi: 128,
        }
    }
}

impl QGridSpec {
    pub fn thetas(&self) -> Vec<f64> {
        (0..self.n_theta)
            .map(|i| PI * i as f64 / (self.n_theta - 1) as f64)
            .collect()
    }

    pub fn phis(&self) -> Vec<f64> {
        (0..self.n_phi)
            .map(|j| 2.0 * PI * j as f64 / self.n_phi as f64)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QGrid {
    pub theta_samples: Vec<f64>,
    pub phi_samples: Vec<f64>,
    /// Row-major: `values[i * n_phi + j]` is `Q(theta_i, phi_j)`.
    pub values: Vec<f64>,
}

impl QGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.phi_samples.len() + j]
    }

    /// Grid node with the largest value.
    pub fn argmax(&self) -> (usize, usize) {
        let k =
            self.values.iter().enumerate().fold(
                0,
                |best, (k, &v)| if v > self.values[best] { k } else { best },
            );
        (k / self.phi_samples.len(), k % self.phi_samples.len())
    }

    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "theta,phi,Q")?;
        for (i, t) in self.theta_samples.iter().enumerate() {
            for (j, p) in self.phi_samples.iter().enumerate() {
                writeln!(w, "{t:.16e},{p:.16e},{:.16e}", self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// State handed to [`q_function`].
pub enum QInput<'a> {
    Pure(&'a PureState),
    Mixed(&'a DensityState),
}

/// `Q(theta, phi) = <theta, phi| rho |theta, phi>` with coherent `|theta, phi>`.
pub fn q_function(state: QInput<'_>, spec: &QGridSpec) -> Result<QGrid> {
    if spec.n_theta < 2 || spec.n_phi < 2 {
        return Err(Error::invalid(
            "Q-function grid needs at least 2 points per axis",
        ));
    }
    let block = match state {
        QInput::Pure(psi) => {
            let v = CVector::from_vec(top_sector_amplitudes(psi)?);
            &v * v.adjoint()
        }
        QInput::Mixed(rho) => top_sector_block(rho)?,
    };
    Ok(q_grid_from_block(&block, spec))
}

/// Q-function of an (unnormalized) code-space vector given by its
/// amplitudes on `|N/2, 1, m>`, ascending `m`.
pub fn q_function_top(amplitudes: &[C64], spec: &QGridSpec) -> Result<QGrid> {
    if spec.n_theta < 2 || spec.n_phi < 2 {
        return Err(Error::invalid(
            "Q-function grid needs at least 2 points per axis",
        ));
    }
    if amplitudes.len() < 2 {
        return Err(Error::invalid("need at least two code-space amplitudes"));
    }
    let v = CVector::from_column_slice(amplitudes);
    Ok(q_grid_from_block(&(&v * v.adjoint()), spec))
}

fn q_grid_from_block(block: &CMatrix, spec: &QGridSpec) -> QGrid {
    let n = block.nrows() - 1;
    let thetas = spec.thetas();
    let phis = spec.phis();
    let mut values = Vec::with_capacity(thetas.len() * phis.len());
    for &t in &thetas {
        for &p in &phis {
            values.push(q_value_block(block, n, t, p));
        }
    }
    QGrid {
        theta_samples: thetas,
        phi_samples: phis,
        values,
    }
}

fn q_value_block(block: &CMatrix, n: usize, theta: f64, phi: f64) -> f64 {
    let (a, b) = coherent_amplitudes(theta, phi);
    let c = CVector::from_vec(dicke_amplitudes(n, a, b));
    linalg::expectation(block, &c).re.max(0.0)
}

/// Q-function at a single point.
pub fn q_value(state: QInput<'_>, theta: f64, phi: f64) -> Result<f64> {
    let block = match state {
        QInput::Pure(psi) => {
            let v = CVector::from_vec(top_sector_amplitudes(psi)?);
            &v * v.adjoint()
        }
        QInput::Mixed(rho) => top_sector_block(rho)?,
    };
    Ok(q_value_block(&block, block.nrows() - 1, theta, phi))
}
