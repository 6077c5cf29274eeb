//! Cycle simulation, logical error rates, sweeps and threshold extrapolation.
//!
//! One cycle is: depolarize every qubit in ascending site order, then (unless
//! disabled) measure the syndrome and correct, then decode the logical error.
//! Evolution is exact on the density matrix; nothing is sampled.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cache::load_or_build;
use crate::channels::{depolarize_all, readout_confusion, ReadoutConfusion};
use crate::error::{Error, Result};
use crate::qec::{build_code, SpinorCode};
use crate::states::{
    coherent_amplitudes, decode_bloch, encode_coherent, logical_error, spin_squeeze,
};

/// Crossover probability: one depolarizing round maps every state to `I/2^N`.
pub const P_HIGH: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub n: usize,
    pub p: f64,
    pub theta: f64,
    pub phi: f64,
    pub cycles: usize,
    pub qec_enabled: bool,
    pub p_m: f64,
    pub p_i: f64,
    pub xi: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 4,
            p: 0.1,
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
            cycles: 30,
            qec_enabled: true,
            p_m: 0.0,
            p_i: 0.0,
            xi: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("p", self.p), ("p_m", self.p_m), ("p_i", self.p_i)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.cycles < 1 {
            return Err(Error::invalid("cycles must be at least 1"));
        }
        if !self.theta.is_finite()
            || !self.phi.is_finite()
            || self.xi.is_some_and(|x| !x.is_finite())
        {
            return Err(Error::invalid("angles must be finite"));
        }
        if self.n < 2 || !self.n.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "qubit count must be an even integer >= 2, got {}",
                self.n
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleRecord {
    pub t: usize,
    pub eps_l: f64,
    /// `((s, l), tr(P_sl rho))` in the q order, taken before correction.
    pub sector_weights: Vec<((i32, usize), f64)>,
}

impl CycleRecord {
    pub fn weight_smax(&self) -> f64 {
        self.sector_weights.first().map_or(0.0, |w| w.1)
    }

    pub fn weight_rest(&self) -> f64 {
        self.sector_weights.iter().skip(1).map(|w| w.1).sum()
    }
}

/// Builds the code for `n`, optionally through the basis cache.
pub fn code_for(n: usize, max_n: usize, cache_dir: Option<&Path>) -> Result<SpinorCode> {
    build_code(load_or_build(n, max_n, cache_dir)?)
}

/// Runs `config.cycles` cycles; records `t = 0` and every completed cycle.
pub fn run_cycles(config: &RunConfig, code: &SpinorCode) -> Result<Vec<CycleRecord>> {
    config.validate()?;
    if code.n() != config.n {
        return Err(Error::invalid(format!(
            "code built for N = {}, config asks for N = {}",
            code.n(),
            config.n
        )));
    }
    let (alpha, beta) = coherent_amplitudes(config.theta, config.phi);
    let mut psi = encode_coherent(config.n, alpha, beta)?;
    if let Some(xi) = config.xi {
        psi = spin_squeeze(&psi, xi)?;
    }
    let mut rho = psi.density();
    let reference = decode_bloch(&rho)?;
    let confusion: Option<ReadoutConfusion> = if config.p_m > 0.0 || config.p_i > 0.0 {
        Some(readout_confusion(code.q_max(), config.p_m, config.p_i)?)
    } else {
        None
    };
    let labels: Vec<(i32, usize)> = code.q_order().iter().map(|s| (s.s, s.l)).collect();
    let weights_of = |rho: &crate::states::DensityState| -> Vec<((i32, usize), f64)> {
        let blocks = code.basis().sector_blocks(&rho.matrix);
        labels
            .iter()
            .zip(blocks.iter())
            .map(|(&lbl, b)| (lbl, crate::linalg::trace(b).re))
            .collect()
    };
    let mut records = vec![CycleRecord {
        t: 0,
        eps_l: logical_error(&rho, &reference)?,
        sector_weights: weights_of(&rho),
    }];
    for t in 1..=config.cycles {
        rho = depolarize_all(&rho, config.p)?;
        let weights = if config.qec_enabled {
            let out = match &confusion {
                None => code.syndrome_correct(&rho)?,
                Some(c) => code.syndrome_correct_faulty(&rho, c)?,
            };
            rho = out.rho;
            labels.iter().copied().zip(out.sector_weights).collect()
        } else {
            weights_of(&rho)
        };
        records.push(CycleRecord {
            t,
            eps_l: logical_error(&rho, &reference)?,
            sector_weights: weights,
        });
    }
    Ok(records)
}

/// `gamma_L = 2 (eps_L(1) - eps_L(0))`.
pub fn error_rate(records: &[CycleRecord]) -> Result<f64> {
    let at = |t| {
        records
            .iter()
            .find(|r| r.t == t)
            .map(|r| r.eps_l)
            .ok_or_else(|| Error::invalid(format!("no record for t = {t}")))
    };
    Ok(2.0 * (at(1)? - at(0)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentialFit {
    pub gamma: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `eps_L(t) = (1 - exp(-gamma t)) / 2`.
pub fn fit_exponential(records: &[CycleRecord]) -> Result<ExponentialFit> {
    if records.len() < 2 {
        return Err(Error::invalid("need at least two records to fit"));
    }
    let sse = |g: f64| -> f64 {
        records
            .iter()
            .map(|r| {
                let model = 0.5 * (1.0 - (-g * r.t as f64).exp());
                (r.eps_l - model).powi(2)
            })
            .sum()
    };
    // golden-section search on ln(gamma)
    let (mut a, mut b) = ((1e-9f64).ln(), (50.0f64).ln());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (sse(c.exp()), sse(d.exp()));
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = sse(c.exp());
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = sse(d.exp());
        }
    }
    let gamma = (0.5 * (a + b)).exp();
    let mean = records.iter().map(|r| r.eps_l).sum::<f64>() / records.len() as f64;
    let sst: f64 = records.iter().map(|r| (r.eps_l - mean).powi(2)).sum();
    let r_squared = if sst == 0.0 {
        1.0
    } else {
        1.0 - sse(gamma) / sst
    };
    Ok(ExponentialFit { gamma, r_squared })
}

/// Readout error level: a fixed probability or tied to the physical `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutLevel {
    Fixed(f64),
    FollowP,
}

impl ReadoutLevel {
    pub fn resolve(&self, p: f64) -> f64 {
        match self {
            ReadoutLevel::Fixed(v) => *v,
            ReadoutLevel::FollowP => p,
        }
    }
}

impl std::str::FromStr for ReadoutLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim() == "p" {
            return Ok(ReadoutLevel::FollowP);
        }
        s.trim()
            .parse::<f64>()
            .map(ReadoutLevel::Fixed)
            .map_err(|_| Error::invalid(format!("readout level '{s}' is neither a number nor 'p'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub ns: Vec<usize>,
    pub ps: Vec<f64>,
    pub theta: f64,
    pub phi: f64,
    pub p_m: ReadoutLevel,
    pub p_i: ReadoutLevel,
    /// QEC settings to include; `[true, false]` adds the uncorrected rows.
    pub qec: Vec<bool>,
    pub xi: Option<f64>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            ns: vec![4, 6, 8],
            ps: (1..=15).map(|k| k as f64 / 20.0).collect(),
            theta: std::f64::consts::FRAC_PI_2,
            phi: 0.0,
            p_m: ReadoutLevel::Fixed(0.0),
            p_i: ReadoutLevel::Fixed(0.0),
            qec: vec![true],
            xi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRecord {
    pub n: usize,
    pub p: f64,
    pub theta: f64,
    pub phi: f64,
    pub p_m: f64,
    pub p_i: f64,
    pub qec: bool,
    pub gamma_l: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub records: Vec<SweepRecord>,
}

/// Evaluates `gamma_L` at every grid point. Points run in parallel on the
/// current rayon pool; record order is fixed (N, then qec, then p).
pub fn sweep(spec: &SweepSpec, max_n: usize, cache_dir: Option<&Path>) -> Result<SweepResult> {
    if spec.ns.is_empty() || spec.ps.is_empty() || spec.qec.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    let mut codes = BTreeMap::new();
    for &n in &spec.ns {
        if let std::collections::btree_map::Entry::Vacant(e) = codes.entry(n) {
            e.insert(code_for(n, max_n, cache_dir)?);
        }
    }
    let mut points = Vec::new();
    for &n in &spec.ns {
        for &qec in &spec.qec {
            for &p in &spec.ps {
                points.push(RunConfig {
                    n,
                    p,
                    theta: spec.theta,
                    phi: spec.phi,
                    cycles: 1,
                    qec_enabled: qec,
                    p_m: spec.p_m.resolve(p),
                    p_i: spec.p_i.resolve(p),
                    xi: spec.xi,
                });
            }
        }
    }
    let records = points
        .par_iter()
        .map(|cfg| {
            let outcome = run_cycles(cfg, &codes[&cfg.n]).and_then(|r| error_rate(&r));
            if let Err(e) = &outcome {
                log::warn!("sweep point N={} p={} failed: {e}", cfg.n, cfg.p);
            }
            SweepRecord {
                n: cfg.n,
                p: cfg.p,
                theta: cfg.theta,
                phi: cfg.phi,
                p_m: cfg.p_m,
                p_i: cfg.p_i,
                qec: cfg.qec_enabled,
                gamma_l: outcome.as_ref().ok().copied(),
                error: outcome.err().map(|e| e.to_string()),
            }
        })
        .collect();
    Ok(SweepResult { records })
}

impl SweepResult {
    pub fn gamma(&self, n: usize, p: f64, qec: bool) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.n == n && r.qec == qec && (r.p - p).abs() < 1e-12)
            .and_then(|r| r.gamma_l)
    }

    /// Header `N,p,theta,phi,p_m,p_i,qec,gamma_L`.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "N,p,theta,phi,p_m,p_i,qec,gamma_L")?;
        for r in &self.records {
            let gamma = r.gamma_l.map_or("nan".to_string(), |g| format!("{g:.16e}"));
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{}",
                r.n, r.p, r.theta, r.phi, r.p_m, r.p_i, r.qec, gamma
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub p: f64,
    pub slope: f64,
    pub intercept: f64,
    #[serde(rename = "N_used")]
    pub n_used: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Threshold {
    pub fits: Vec<LinearFit>,
    pub p_low: Option<f64>,
    pub p_high: f64,
}

/// Fits `gamma_L = a + b/N` through the two largest `N` at each `p` of the
/// QEC rows; `p_low` is the largest `p` with `a <= tol`.
pub fn extrapolate(result: &SweepResult, tol: f64) -> Result<Threshold> {
    let rows: Vec<&SweepRecord> = result.records.iter().filter(|r| r.qec).collect();
    let mut by_p: BTreeMap<u64, Vec<&SweepRecord>> = BTreeMap::new();
    for r in &rows {
        by_p.entry(r.p.to_bits()).or_default().push(r);
    }
    let mut fits = Vec::new();
    for group in by_p.values() {
        let mut pts: Vec<(usize, f64)> = group
            .iter()
            .filter_map(|r| r.gamma_l.map(|g| (r.n, g)))
            .collect();
        pts.sort_by_key(|x| x.0);
        pts.dedup_by_key(|x| x.0);
        if pts.len() < 2 {
            return Err(Error::invalid(format!(
                "p = {} has fewer than two N values to extrapolate",
                group[0].p
            )));
        }
        let (n1, g1) = pts[pts.len() - 2];
        let (n2, g2) = pts[pts.len() - 1];
        let (x1, x2) = (1.0 / n1 as f64, 1.0 / n2 as f64);
        let slope = (g2 - g1) / (x2 - x1);
        fits.push(LinearFit {
            p: group[0].p,
            slope,
            intercept: g2 - slope * x2,
            n_used: [n1, n2],
        });
    }
    if fits.is_empty() {
        return Err(Error::invalid("no QEC rows to extrapolate"));
    }
    fits.sort_by(|a, b| a.p.total_cmp(&b.p));
    let p_low = fits
        .iter()
        .filter(|f| f.intercept <= tol)
        .map(|f| f.p)
        .fold(None, |acc: Option<f64>, p| {
            Some(acc.map_or(p, |a| a.max(p)))
        });
    Ok(Threshold {
        fits,
        p_low,
        p_high: P_HIGH,
    })
}

/// Header `t,eps_L,weight_smax,weight_rest`.
pub fn write_cycles_csv(records: &[CycleRecord], mut w: impl Write) -> Result<()> {
    writeln!(w, "t,eps_L,weight_smax,weight_rest")?;
    for r in records {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e}",
            r.t,
            r.eps_l,
            r.weight_smax(),
            r.weight_rest()
        )?;
    }
    Ok(())
}
