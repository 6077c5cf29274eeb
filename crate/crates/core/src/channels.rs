//! Error processes: Pauli and depolarizing Kraus sets, idealized
//! sector-scattering errors and the syndrome readout confusion model.
//!
//! Single-qubit Kraus operators are kept as scaled generalized permutations
//! in the computational basis, so one conjugation costs `O(4^N)` instead of a
//! dense matrix product. [`ChannelSpec::in_spin_basis`] materializes dense
//! spin-basis copies when needed.

use nalgebra::DMatrix;

use crate::basis::SpinBasis;
use crate::error::{Error, Result};
use crate::linalg::{self, max_abs_diff, CMatrix, C64, I};
use crate::ops::{Axis, Monomial, PauliOp};
use crate::states::{BasisTag, DensityState};

#[derive(Debug, Clone)]
pub enum KrausOp {
    Monomial(Monomial),
    Dense(CMatrix),
}

#[derive(Debug, Clone)]
pub struct Kraus {
    pub op: KrausOp,
    pub basis: BasisTag,
}

impl Kraus {
    pub fn dim(&self) -> usize {
        match &self.op {
            KrausOp::Monomial(m) => m.dim(),
            KrausOp::Dense(d) => d.nrows(),
        }
    }

    pub fn to_dense(&self) -> CMatrix {
        match &self.op {
            KrausOp::Monomial(m) => m.to_dense(),
            KrausOp::Dense(d) => d.clone(),
        }
    }

    /// `K rho K^dagger`.
    pub fn conjugate(&self, rho: &CMatrix) -> CMatrix {
        match &self.op {
            KrausOp::Monomial(m) => m.conjugate(rho),
            KrausOp::Dense(k) => k * rho * k.adjoint(),
        }
    }

    fn scaled_monomial(m: Monomial, scale: f64, basis: BasisTag) -> Result<Self> {
        let dim = m.dim();
        let target = (0..dim).map(|c| m.target(c)).collect();
        let phase = (0..dim).map(|c| m.phase(c) * scale).collect();
        Ok(Self {
            op: KrausOp::Monomial(Monomial::new(target, phase)?),
            basis,
        })
    }
}

#[derive(Debug, Clone)]
pub struct ChannelSpec {
    pub kraus: Vec<Kraus>,
    pub label: String,
}

impl ChannelSpec {
    pub fn new(kraus: Vec<Kraus>, label: impl Into<String>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::invalid("a channel needs at least one Kraus operator"))?;
        let (dim, basis) = (first.dim(), first.basis);
        if kraus.iter().any(|k| k.dim() != dim || k.basis != basis) {
            return Err(Error::invalid(
                "Kraus operators differ in dimension or basis",
            ));
        }
        Ok(Self {
            kraus,
            label: label.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.kraus[0].dim()
    }

    pub fn basis(&self) -> BasisTag {
        self.kraus[0].basis
    }

    /// `max |sum_j K_j^dagger K_j - I|`.
    pub fn completeness_defect(&self) -> f64 {
        let dim = self.dim();
        let mut acc = CMatrix::zeros(dim, dim);
        for k in &self.kraus {
            match &k.op {
                KrausOp::Monomial(m) => {
                    for c in 0..dim {
                        acc[(c, c)] += C64::new(m.phase(c).norm_sqr(), 0.0);
                    }
                }
                KrausOp::Dense(d) => acc += d.adjoint() * d,
            }
        }
        max_abs_diff(&acc, &linalg::identity(dim))
    }

    /// Dense copy with every operator expressed in the spin basis.
    pub fn in_spin_basis(&self, basis: &SpinBasis) -> ChannelSpec {
        let kraus = self
            .kraus
            .iter()
            .map(|k| match k.basis {
                BasisTag::Spin => k.clone(),
                BasisTag::Computational => Kraus {
                    op: KrausOp::Dense(basis.to_spin(&k.to_dense())),
                    basis: BasisTag::Spin,
                },
            })
            .collect();
        ChannelSpec {
            kraus,
            label: self.label.clone(),
        }
    }

    /// Dense copy with every operator expressed in the computational basis.
    pub fn in_computational_basis(&self, basis: &SpinBasis) -> ChannelSpec {
        let kraus = self
            .kraus
            .iter()
            .map(|k| match k.basis {
                BasisTag::Computational => k.clone(),
                BasisTag::Spin => Kraus {
                    op: KrausOp::Dense(basis.to_computational(&k.to_dense())),
                    basis: BasisTag::Computational,
                },
            })
            .collect();
        ChannelSpec {
            kraus,
            label: self.label.clone(),
        }
    }
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("{name} = {p} outside [0, 1]")));
    }
    Ok(())
}

/// `{sqrt(1-p) I, sqrt(p/3) sigma_n^x, sqrt(p/3) sigma_n^y, sqrt(p/3) sigma_n^z}`.
pub fn depolarizing_kraus(n_qubits: usize, p: f64, site: usize) -> Result<ChannelSpec> {
    check_probability("p", p)?;
    let dim = 1usize << n_qubits;
    let mut kraus = vec![Kraus::scaled_monomial(
        Monomial::identity(dim),
        (1.0 - p).sqrt(),
        BasisTag::Computational,
    )?];
    for axis in Axis::ALL {
        let m = PauliOp::new(n_qubits, axis, site)?.to_monomial();
        kraus.push(Kraus::scaled_monomial(
            m,
            (p / 3.0).sqrt(),
            BasisTag::Computational,
        )?);
    }
    ChannelSpec::new(kraus, format!("depolarizing(p={p}, n={site})"))
}

/// `sum_j K_j rho K_j^dagger`.
pub fn apply_channel(rho: &DensityState, ch: &ChannelSpec) -> Result<DensityState> {
    if rho.matrix.nrows() != ch.dim() {
        return Err(Error::invalid(format!(
            "channel dimension {} does not match state dimension {}",
            ch.dim(),
            rho.matrix.nrows()
        )));
    }
    if rho.basis != ch.basis() {
        return Err(Error::invalid(
            "channel and state are expressed in different bases",
        ));
    }
    let mut out = CMatrix::zeros(rho.matrix.nrows(), rho.matrix.ncols());
    for k in &ch.kraus {
        out += k.conjugate(&rho.matrix);
    }
    Ok(DensityState {
        n: rho.n,
        matrix: out,
        basis: rho.basis,
    })
}

/// One depolarizing pass over every site `1..=N` in order.
pub fn depolarize_all(rho: &DensityState, p: f64) -> Result<DensityState> {
    let mut out = rho.clone();
    for site in 1..=rho.n {
        out = apply_channel(&out, &depolarizing_kraus(rho.n, p, site)?)?;
    }
    Ok(out)
}

/// `sigma_n^j rho sigma_n^j`.
pub fn pauli_error(rho: &DensityState, axis: Axis, site: usize) -> Result<DensityState> {
    if rho.basis != BasisTag::Computational {
        return Err(Error::invalid(
            "pauli_error expects a computational-basis state",
        ));
    }
    let p = PauliOp::new(rho.n, axis, site)?.to_monomial();
    Ok(DensityState {
        n: rho.n,
        matrix: p.conjugate(&rho.matrix),
        basis: rho.basis,
    })
}

/// Swaps `|a_m>` and `|b_m>` with a factor `i` for each paired column and is
/// the identity elsewhere; this is `exp(i pi/2 sum_m (|a_m><b_m| + h.c.))`.
pub(crate) fn swap_monomial(dim: usize, pairs: &[(usize, usize)]) -> Result<Monomial> {
    let mut target: Vec<usize> = (0..dim).collect();
    let mut phase = vec![C64::new(1.0, 0.0); dim];
    for &(a, b) in pairs {
        target[a] = b;
        target[b] = a;
        phase[a] = I;
        phase[b] = I;
    }
    Monomial::new(target, phase)
}

/// `F_{s l l~} / sqrt(p)` in the spin basis: swaps `|s, l, m>` and
/// `|s+1, l~, m>` with a factor `i` for `|m| <= s`.
pub fn ideal_error_unitary(
    basis: &SpinBasis,
    s: i32,
    l: usize,
    l_tilde: usize,
) -> Result<Monomial> {
    if s + 1 > basis.max_spin() {
        return Err(Error::invalid(format!(
            "ideal error needs s + 1 <= N/2, got s = {s} for N = {}",
            basis.n()
        )));
    }
    let lower = basis.sector(s, l)?;
    let upper = basis.sector(s + 1, l_tilde)?;
    let pairs: Vec<(usize, usize)> = (-s..=s)
        .map(|m| (lower.column(m), upper.column(m)))
        .collect();
    swap_monomial(basis.dim(), &pairs)
}

/// `F_{s l l~} = sqrt(p) exp[i pi/2 sum_m (|s,l,m><s+1,l~,m| + h.c.)]` as a
/// spin-basis Kraus operator.
pub fn ideal_error(basis: &SpinBasis, s: i32, l: usize, l_tilde: usize, p: f64) -> Result<Kraus> {
    check_probability("p", p)?;
    Kraus::scaled_monomial(
        ideal_error_unitary(basis, s, l, l_tilde)?,
        p.sqrt(),
        BasisTag::Spin,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdealErrorTerm {
    pub s: i32,
    pub l: usize,
    pub l_tilde: usize,
    pub probability: f64,
}

/// A complete set of idealized errors; leftover probability goes to an
/// identity Kraus operator.
#[derive(Debug, Clone)]
pub struct IdealErrorSet {
    pub terms: Vec<IdealErrorTerm>,
    pub identity_probability: f64,
    pub channel: ChannelSpec,
}

impl IdealErrorSet {
    pub fn new(basis: &SpinBasis, terms: Vec<IdealErrorTerm>) -> Result<Self> {
        let total: f64 = terms.iter().map(|t| t.probability).sum();
        if terms.iter().any(|t| t.probability < 0.0) || total > 1.0 + 1e-12 {
            return Err(Error::invalid(format!(
                "ideal error probabilities must be nonnegative with sum <= 1, got {total}"
            )));
        }
        let identity_probability = (1.0 - total).max(0.0);
        let mut kraus = Vec::with_capacity(terms.len() + 1);
        if identity_probability > 0.0 {
            kraus.push(Kraus::scaled_monomial(
                Monomial::identity(basis.dim()),
                identity_probability.sqrt(),
                BasisTag::Spin,
            )?);
        }
        for t in &terms {
            kraus.push(ideal_error(basis, t.s, t.l, t.l_tilde, t.probability)?);
        }
        let channel = ChannelSpec::new(kraus, "ideal scattering errors")?;
        Ok(Self {
            terms,
            identity_probability,
            channel,
        })
    }

    /// Every constructible `(s, l, l~)` with probability `p_total / count`.
    pub fn uniform(basis: &SpinBasis, p_total: f64) -> Result<Self> {
        check_probability("p_total", p_total)?;
        let triples = Self::triples(basis);
        let each = p_total / triples.len() as f64;
        let terms = triples
            .into_iter()
            .map(|(s, l, l_tilde)| IdealErrorTerm {
                s,
                l,
                l_tilde,
                probability: each,
            })
            .collect();
        Self::new(basis, terms)
    }

    /// All `(s, l, l~)` with `s + 1 <= N/2`.
    pub fn triples(basis: &SpinBasis) -> Vec<(i32, usize, usize)> {
        let deg = basis.degeneracies();
        let mut out = Vec::new();
        for s in (0..basis.max_spin()).rev() {
            for l in 1..=deg[&s] {
                for lt in 1..=deg[&(s + 1)] {
                    out.push((s, l, lt));
                }
            }
        }
        out
    }
}

/// Row-stochastic `p_c(q, q')`: true syndrome `q`, reported syndrome `q'`,
/// both 0-based in the q order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReadoutConfusion {
    pub q_max: usize,
    pub matrix: DMatrix<f64>,
}

impl ReadoutConfusion {
    pub fn identity(q_max: usize) -> Self {
        Self {
            q_max,
            matrix: DMatrix::identity(q_max, q_max),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.matrix == DMatrix::identity(self.q_max, self.q_max)
    }

    pub fn get(&self, q: usize, q_read: usize) -> f64 {
        self.matrix[(q, q_read)]
    }
}

/// Off-by-one readout error with probability `p`; an out-of-range neighbour
/// folds back onto the boundary outcome.
fn confusion_layer(q_max: usize, p: f64) -> DMatrix<f64> {
    if q_max == 1 {
        return DMatrix::identity(1, 1);
    }
    let mut m = DMatrix::zeros(q_max, q_max);
    for q in 0..q_max {
        let boundary = q == 0 || q == q_max - 1;
        m[(q, q)] = if boundary { 1.0 - p / 2.0 } else { 1.0 - p };
        if q > 0 {
            m[(q, q - 1)] = p / 2.0;
        }
        if q + 1 < q_max {
            m[(q, q + 1)] = p / 2.0;
        }
    }
    m
}

/// Confusion matrix for measurement error `p_m` and initialization error
/// `p_i`; the two layers compose as `L(p_i) L(p_m)`.
pub fn readout_confusion(q_max: usize, p_m: f64, p_i: f64) -> Result<ReadoutConfusion> {
    if q_max < 1 {
        return Err(Error::invalid("q_max must be at least 1"));
    }
    check_probability("p_m", p_m)?;
    check_probability("p_i", p_i)?;
    let matrix = match (p_m > 0.0, p_i > 0.0) {
        (false, false) => DMatrix::identity(q_max, q_max),
        (true, false) => confusion_layer(q_max, p_m),
        (false, true) => confusion_layer(q_max, p_i),
        (true, true) => confusion_layer(q_max, p_i) * confusion_layer(q_max, p_m),
    };
    Ok(ReadoutConfusion { q_max, matrix })
}
