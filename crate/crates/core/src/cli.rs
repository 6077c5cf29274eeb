//! Command-line front end.
//!
//! Every subcommand shares one flag set. A JSON file passed with `--config`
//! may supply any flag under its long name (dashes become underscores);
//! flags given on the command line win.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::analysis::{self, BandSpec, ErrorPanelSpec};
use crate::basis::{check_register, CollectiveOps, SpinBasis, DEFAULT_MAX_N};
use crate::cache::{cache_path, load_or_build, write_basis};
use crate::engine::{self, ReadoutLevel, RunConfig, SweepSpec};
use crate::error::{Error, Result};
use crate::ops::Axis;
use crate::qec::build_code;
use crate::states::{coherent_amplitudes, QGridSpec};

#[derive(Debug, Parser)]
#[command(name = "spinor-qec", version, about = "Spinor code simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Build, validate and cache the total-spin basis.
    Basis,
    /// Run QEC cycles and emit the logical error per cycle.
    Simulate,
    /// Logical error rate over an (N, p) grid.
    Sweep,
    /// Sweep, then extrapolate the error rate in 1/N.
    Threshold,
    /// Single-qubit deformation factors, or their fit with --fit.
    Deform,
    /// Approximate Knill-Laflamme bound for depolarizing errors.
    Klcheck,
    /// Q-functions of the error-projected coherent state.
    Qfunc,
}

#[derive(Debug, Clone, Default, clap::Args, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct Flags {
    /// Qubit counts, e.g. `8` or `4,6,8`.
    #[arg(long, global = true)]
    n: Option<NumList>,
    /// Error probabilities: `0.1`, `0.1,0.2` or `start:stop:step`.
    #[arg(long, global = true)]
    p: Option<NumList>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    theta: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    phi: Option<f64>,
    #[arg(long, global = true)]
    cycles: Option<usize>,
    /// Syndrome measurement error probability, or `p` to follow p.
    #[arg(long, global = true)]
    pm: Option<Level>,
    /// Ancilla initialization error probability, or `p` to follow p.
    #[arg(long = "pi-err", global = true)]
    #[serde(rename = "pi_err")]
    pi_err: Option<Level>,
    /// Squeezing angle applied to the initial state.
    #[arg(long, global = true, allow_hyphen_values = true)]
    xi: Option<f64>,
    #[arg(long = "no-qec", global = true)]
    #[serde(rename = "no_qec")]
    no_qec: bool,
    /// Add uncorrected rows to a sweep.
    #[arg(long = "include-no-qec", global = true)]
    #[serde(rename = "include_no_qec")]
    include_no_qec: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long = "cache-dir", global = true)]
    #[serde(rename = "cache_dir")]
    cache_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[arg(long = "max-n", global = true)]
    #[serde(rename = "max_n")]
    max_n: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Qubit index acted on by single-qubit errors (1 is the leftmost).
    #[arg(long, global = true)]
    site: Option<usize>,
    /// Degeneracy index of the error sector for qfunc.
    #[arg(long = "error-l", global = true)]
    #[serde(rename = "error_l")]
    error_l: Option<usize>,
    #[arg(long = "n-theta", global = true)]
    #[serde(rename = "n_theta")]
    n_theta: Option<usize>,
    #[arg(long = "n-phi", global = true)]
    #[serde(rename = "n_phi")]
    n_phi: Option<usize>,
    #[arg(long = "band-exponent", global = true)]
    #[serde(rename = "band_exponent")]
    band_exponent: Option<f64>,
    /// Intercept tolerance for the lower threshold edge.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Quantization axis for deform.
    #[arg(long, global = true)]
    axis: Option<Axis>,
    /// deform: emit the fit JSON instead of the table.
    #[arg(long, global = true)]
    fit: bool,
    /// klcheck: emit the matrix-element table instead of the JSON summary.
    #[arg(long, global = true)]
    table: bool,
}

/// A list of numbers given as `a`, `a,b,c` or `start:stop:step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum NumList {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl std::str::FromStr for NumList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        NumList::Text(s.to_string())
            .values()
            .map_err(|e| e.to_string())?;
        Ok(NumList::Text(s.to_string()))
    }
}

impl NumList {
    fn values(&self) -> Result<Vec<f64>> {
        match self {
            NumList::One(v) => Ok(vec![*v]),
            NumList::Many(v) => Ok(v.clone()),
            NumList::Text(s) => parse_list(s),
        }
    }

    fn usizes(&self) -> Result<Vec<usize>> {
        self.values()?
            .into_iter()
            .map(|v| {
                if v >= 0.0 && v.fract() == 0.0 {
                    Ok(v as usize)
                } else {
                    Err(Error::invalid(format!(
                        "expected a non-negative integer, got {v}"
                    )))
                }
            })
            .collect()
    }
}

fn parse_num(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::invalid(format!("'{s}' is not finite")));
    }
    Ok(v)
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [one] => one.split(',').map(parse_num).collect(),
        [start, stop, step] => {
            let (start, stop, step) = (parse_num(start)?, parse_num(stop)?, parse_num(step)?);
            if step <= 0.0 || stop < start {
                return Err(Error::invalid(format!("bad range '{s}'")));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            // snap to 12 decimals so 0.1 + 2 * 0.05 prints as 0.2
            Ok((0..count)
                .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
                .collect())
        }
        _ => Err(Error::invalid(format!("bad list '{s}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(untagged)]
enum Level {
    Num(f64),
    Text(#[serde(deserialize_with = "de_level")] ReadoutLevel),
}

fn de_level<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<ReadoutLevel, D::Error> {
    let s = String::deserialize(d)?;
    s.parse().map_err(serde::de::Error::custom)
}

impl std::str::FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.parse::<ReadoutLevel>()
            .map(Level::Text)
            .map_err(|e| e.to_string())
    }
}

impl Level {
    fn level(self) -> ReadoutLevel {
        match self {
            Level::Num(v) => ReadoutLevel::Fixed(v),
            Level::Text(l) => l,
        }
    }
}

impl Flags {
    /// Fills every unset field from `file`.
    fn merge(self, file: Flags) -> Flags {
        Flags {
            n: self.n.or(file.n),
            p: self.p.or(file.p),
            theta: self.theta.or(file.theta),
            phi: self.phi.or(file.phi),
            cycles: self.cycles.or(file.cycles),
            pm: self.pm.or(file.pm),
            pi_err: self.pi_err.or(file.pi_err),
            xi: self.xi.or(file.xi),
            no_qec: self.no_qec || file.no_qec,
            include_no_qec: self.include_no_qec || file.include_no_qec,
            out: self.out.or(file.out),
            cache_dir: self.cache_dir.or(file.cache_dir),
            jobs: self.jobs.or(file.jobs),
            max_n: self.max_n.or(file.max_n),
            config: self.config,
            site: self.site.or(file.site),
            error_l: self.error_l.or(file.error_l),
            n_theta: self.n_theta.or(file.n_theta),
            n_phi: self.n_phi.or(file.n_phi),
            band_exponent: self.band_exponent.or(file.band_exponent),
            tol: self.tol.or(file.tol),
            axis: self.axis.or(file.axis),
            fit: self.fit || file.fit,
            table: self.table || file.table,
        }
    }

    fn max_n(&self) -> usize {
        self.max_n.unwrap_or(DEFAULT_MAX_N)
    }

    fn ns(&self, default: &[usize]) -> Result<Vec<usize>> {
        let ns = match &self.n {
            Some(l) => l.usizes()?,
            None => default.to_vec(),
        };
        if ns.is_empty() {
            return Err(Error::invalid("empty --n list"));
        }
        for &n in &ns {
            check_register(n, self.max_n())?;
        }
        Ok(ns)
    }

    fn single_n(&self, default: usize) -> Result<usize> {
        match self.ns(&[default])?.as_slice() {
            [n] => Ok(*n),
            _ => Err(Error::invalid("this subcommand takes a single --n")),
        }
    }

    fn ps(&self, default: &[f64]) -> Result<Vec<f64>> {
        let ps = match &self.p {
            Some(l) => l.values()?,
            None => default.to_vec(),
        };
        if ps.is_empty() {
            return Err(Error::invalid("empty --p list"));
        }
        for &p in &ps {
            check_probability("p", p)?;
        }
        Ok(ps)
    }

    fn single_p(&self, default: f64) -> Result<f64> {
        match self.ps(&[default])?.as_slice() {
            [p] => Ok(*p),
            _ => Err(Error::invalid("this subcommand takes a single --p")),
        }
    }

    fn site(&self, n: usize) -> Result<usize> {
        let site = self.site.unwrap_or(1);
        if site == 0 || site > n {
            return Err(Error::invalid(format!("--site {site} outside 1..={n}")));
        }
        Ok(site)
    }
}

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::invalid(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_level(name: &str, l: ReadoutLevel) -> Result<()> {
    match l {
        ReadoutLevel::Fixed(v) => check_probability(name, v),
        ReadoutLevel::FollowP => Ok(()),
    }
}

/// Runs the CLI and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let flags = match &cli.flags.config {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let file: Flags = serde_json::from_str(&text)
                .map_err(|e| Error::invalid(format!("config {}: {e}", path.display())))?;
            cli.flags.clone().merge(file)
        }
        None => cli.flags.clone(),
    };
    match cli.command {
        Command::Basis => cmd_basis(&flags),
        Command::Simulate => cmd_simulate(&flags),
        Command::Sweep => cmd_sweep(&flags),
        Command::Threshold => cmd_threshold(&flags),
        Command::Deform => cmd_deform(&flags),
        Command::Klcheck => cmd_klcheck(&flags),
        Command::Qfunc => cmd_qfunc(&flags),
    }
}

/// Writes `body` to `--out`, or stdout when absent.
fn emit(flags: &Flags, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    match &flags.out {
        Some(path) => {
            let mut buf = Vec::new();
            body(&mut buf)?;
            fs::write(path, buf)?;
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            body(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct BasisSummary {
    n: usize,
    cache: String,
    sectors: Vec<(i32, usize)>,
    report: crate::basis::BasisReport,
}

fn cmd_basis(flags: &Flags) -> Result<()> {
    let ns = flags.ns(&[4])?;
    let dir = flags
        .out
        .clone()
        .or_else(|| flags.cache_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir)?;
    let mut summaries = Vec::new();
    for n in ns {
        let ops = CollectiveOps::build_with_limit(n, flags.max_n())?;
        let basis = SpinBasis::from_ops(&ops)?;
        let report = basis.validate(&ops)?;
        if let Some(detail) = report.failure() {
            return Err(Error::invariant(format!("basis N = {n}"), detail));
        }
        let path = cache_path(&dir, n, Axis::Z);
        write_basis(&basis, &path)?;
        summaries.push(BasisSummary {
            n,
            cache: path.display().to_string(),
            sectors: basis.sectors().iter().map(|s| (s.s, s.l)).collect(),
            report,
        });
    }
    let mut stdout = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut stdout, &summaries)?;
    writeln!(stdout)?;
    Ok(())
}

fn run_config(flags: &Flags) -> Result<RunConfig> {
    let n = flags.single_n(8)?;
    let p = flags.single_p(0.1)?;
    let pm = flags.pm.map_or(ReadoutLevel::Fixed(0.0), Level::level);
    let pi = flags.pi_err.map_or(ReadoutLevel::Fixed(0.0), Level::level);
    check_level("p_m", pm)?;
    check_level("p_i", pi)?;
    let config = RunConfig {
        n,
        p,
        theta: flags.theta.unwrap_or(std::f64::consts::FRAC_PI_2),
        phi: flags.phi.unwrap_or(0.0),
        cycles: flags.cycles.unwrap_or(30),
        qec_enabled: !flags.no_qec,
        p_m: pm.resolve(p),
        p_i: pi.resolve(p),
        xi: flags.xi,
    };
    config.validate()?;
    Ok(config)
}

fn cmd_simulate(flags: &Flags) -> Result<()> {
    let config = run_config(flags)?;
    let code = engine::code_for(config.n, flags.max_n(), flags.cache_dir.as_deref())?;
    let records = engine::run_cycles(&config, &code)?;
    emit(flags, |w| {
        writeln!(w, "# {}", serde_json::to_string(&config)?)?;
        engine::write_cycles_csv(&records, w)
    })
}

fn sweep_spec(flags: &Flags) -> Result<SweepSpec> {
    let defaults = SweepSpec::default();
    let p_m = flags.pm.map_or(defaults.p_m, Level::level);
    let p_i = flags.pi_err.map_or(defaults.p_i, Level::level);
    check_level("p_m", p_m)?;
    check_level("p_i", p_i)?;
    let qec = match (flags.no_qec, flags.include_no_qec) {
        (true, _) => vec![false],
        (false, true) => vec![true, false],
        (false, false) => vec![true],
    };
    let theta = flags.theta.unwrap_or(defaults.theta);
    let phi = flags.phi.unwrap_or(defaults.phi);
    if !theta.is_finite() || !phi.is_finite() {
        return Err(Error::invalid("angles must be finite"));
    }
    Ok(SweepSpec {
        ns: flags.ns(&defaults.ns)?,
        ps: flags.ps(&defaults.ps)?,
        theta,
        phi,
        p_m,
        p_i,
        qec,
        xi: flags.xi,
    })
}

fn run_sweep(flags: &Flags, spec: &SweepSpec) -> Result<engine::SweepResult> {
    let jobs = flags.jobs.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    pool.install(|| engine::sweep(spec, flags.max_n(), flags.cache_dir.as_deref()))
}

fn cmd_sweep(flags: &Flags) -> Result<()> {
    let spec = sweep_spec(flags)?;
    let result = run_sweep(flags, &spec)?;
    emit(flags, |w| result.write_csv(w))
}

fn cmd_threshold(flags: &Flags) -> Result<()> {
    if flags.no_qec {
        return Err(Error::invalid("threshold needs QEC rows"));
    }
    let spec = sweep_spec(flags)?;
    let tol = flags.tol.unwrap_or(1e-4);
    let result = run_sweep(flags, &spec)?;
    let threshold = engine::extrapolate(&result, tol)?;
    emit(flags, |w| {
        serde_json::to_writer_pretty(&mut *w, &threshold)?;
        writeln!(w)?;
        Ok(())
    })
}

fn cmd_deform(flags: &Flags) -> Result<()> {
    let n = flags.single_n(8)?;
    let axis = flags.axis.unwrap_or(Axis::Z);
    let sites: Vec<usize> = match flags.site {
        Some(_) => vec![flags.site(n)?],
        None => (1..=n).collect(),
    };
    let basis = load_or_build(n, flags.max_n(), flags.cache_dir.as_deref())?;
    let table = analysis::deformation_table(&basis, axis, &sites)?;
    if flags.fit {
        let fit = analysis::fit_deformation(&table)?;
        emit(flags, |w| {
            serde_json::to_writer_pretty(&mut *w, &fit)?;
            writeln!(w)?;
            Ok(())
        })
    } else {
        emit(flags, |w| table.write_csv(w))
    }
}

fn cmd_klcheck(flags: &Flags) -> Result<()> {
    let n = flags.single_n(8)?;
    let p = flags.single_p(0.1)?;
    let site = flags.site(n)?;
    let band = BandSpec {
        exponent: flags.band_exponent.unwrap_or(BandSpec::default().exponent),
    };
    if !(band.exponent >= 0.0 && band.exponent.is_finite()) {
        return Err(Error::invalid(
            "--band-exponent must be a non-negative number",
        ));
    }
    let basis = load_or_build(n, flags.max_n(), flags.cache_dir.as_deref())?;
    let report = analysis::kl_bound_check(&basis, p, band, site)?;
    if flags.table {
        emit(flags, |w| report.write_csv(w))
    } else {
        emit(flags, |w| {
            serde_json::to_writer_pretty(&mut *w, &report.bound_json())?;
            writeln!(w)?;
            Ok(())
        })
    }
}

fn cmd_qfunc(flags: &Flags) -> Result<()> {
    let n = flags.single_n(8)?;
    let site = flags.site(n)?;
    let dir: &Path = flags
        .out
        .as_deref()
        .ok_or_else(|| Error::invalid("qfunc needs --out <directory>"))?;
    let theta = flags.theta.unwrap_or(std::f64::consts::FRAC_PI_4);
    let phi = flags.phi.unwrap_or(0.0);
    let grid = QGridSpec {
        n_theta: flags.n_theta.unwrap_or(QGridSpec::default().n_theta),
        n_phi: flags.n_phi.unwrap_or(QGridSpec::default().n_phi),
    };
    if grid.n_theta < 2 || grid.n_phi < 1 {
        return Err(Error::invalid("grid needs n_theta >= 2 and n_phi >= 1"));
    }
    let (alpha, beta) = coherent_amplitudes(theta, phi);
    let code = build_code(load_or_build(n, flags.max_n(), flags.cache_dir.as_deref())?)?;
    let panels = analysis::error_panels(
        &code,
        &ErrorPanelSpec {
            alpha,
            beta,
            site,
            error_l: flags.error_l,
            grid,
        },
    )?;
    fs::create_dir_all(dir)?;
    let mut stdout = std::io::stdout().lock();
    for panel in &panels {
        let mut buf = Vec::new();
        panel.grid.write_csv(&mut buf)?;
        fs::write(dir.join(format!("qfunc_{}.csv", panel.label)), buf)?;
        let (i, j) = panel.grid.argmax();
        writeln!(
            stdout,
            "{} axis={} s={} l={} peak_theta={:.16e} peak_phi={:.16e} peak_Q={:.16e}",
            panel.label,
            panel.axis.map_or("-".to_string(), |a| a.to_string()),
            panel.s,
            panel.l,
            panel.grid.theta_samples[i],
            panel.grid.phi_samples[j],
            panel.grid.get(i, j)
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_list("0.1:0.3:0.1").unwrap(), vec![0.1, 0.2, 0.3]);
        assert_eq!(parse_list("4,6,8").unwrap(), vec![4.0, 6.0, 8.0]);
        assert_eq!(parse_list("0.05:0.75:0.05").unwrap().len(), 15);
        assert!(parse_list("1:0:0.1").is_err());
        assert!(parse_list("a").is_err());
    }

    #[test]
    fn config_file_merge() {
        let file: Flags =
            serde_json::from_str(r#"{"n": [4, 6], "p": 0.2, "pm": "p", "cycles": 3}"#).unwrap();
        let cli = Flags {
            p: Some(NumList::One(0.3)),
            ..Default::default()
        };
        let merged = cli.merge(file);
        assert_eq!(merged.ns(&[8]).unwrap(), vec![4, 6]);
        assert_eq!(merged.ps(&[0.1]).unwrap(), vec![0.3]);
        assert_eq!(merged.pm.unwrap().level(), ReadoutLevel::FollowP);
        assert_eq!(merged.cycles, Some(3));
        assert!(serde_json::from_str::<Flags>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(main_with_args(["spinor-qec", "frobnicate"]), 2);
        assert_eq!(main_with_args(["spinor-qec", "simulate", "--p", "x"]), 2);
        assert_eq!(main_with_args(["spinor-qec", "simulate", "--n", "3"]), 2);
        assert_eq!(main_with_args(["spinor-qec", "simulate", "--n", "14"]), 4);
    }
}
