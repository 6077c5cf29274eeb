//! Acceptance criteria. Runs without the libtest harness so every criterion
//! prints its PASS/FAIL line; exits nonzero if any criterion fails.

use std::f64::consts::FRAC_PI_2;
use std::process::Command;
use std::time::Instant;

use spinor_qec::analysis::{
    deformation_table, fit_deformation, kl_bound_check, kl_matrix_phase_flip, kl_phase_flip_brute,
    BandSpec,
};
use spinor_qec::basis::{CollectiveOps, SpinBasis};
use spinor_qec::engine::{
    error_rate, extrapolate, fit_exponential, run_cycles, sweep, RunConfig, SweepSpec,
};
use spinor_qec::qec::{build_code, SpinorCode};
use spinor_qec::states::{coherent_amplitudes, decode_bloch, encode_coherent, logical_error};
use spinor_qec::Axis;

fn report(id: u32, pass: bool, detail: String) -> bool {
    println!(
        "{} criterion {id}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn choose(n: i64, k: i64) -> i64 {
    if k < 0 || k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn code(n: usize) -> SpinorCode {
    build_code(SpinBasis::build(n).unwrap()).unwrap()
}

fn gamma(code: &SpinorCode, config: RunConfig) -> f64 {
    error_rate(&run_cycles(&config, code).unwrap()).unwrap()
}

fn one_cycle(n: usize, p: f64) -> RunConfig {
    RunConfig {
        n,
        p,
        theta: FRAC_PI_2,
        phi: 0.0,
        cycles: 1,
        ..Default::default()
    }
}

fn criterion_01_basis_validity() -> bool {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut degeneracies_ok = true;
    for n in [2, 4, 6, 8, 10] {
        let ops = CollectiveOps::build(n).unwrap();
        let basis = SpinBasis::from_ops(&ops).unwrap();
        let r = basis.validate(&ops).unwrap();
        worst = worst
            .max(r.unitarity_defect)
            .max(r.max_s2_residual)
            .max(r.max_m_residual);
        for (&s, &l) in basis.degeneracies() {
            let (n, w) = (n as i64, n as i64 / 2 - s as i64);
            degeneracies_ok &= l as i64 == choose(n, w) - choose(n, w - 1);
        }
        degeneracies_ok &= r.degeneracies_match && r.dimension_sum == 1 << n;
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        1,
        worst < 1e-9 && degeneracies_ok && secs < 60.0,
        format!("max residual {worst:.3e}, degeneracies ok = {degeneracies_ok}, {secs:.1} s"),
    )
}

fn criterion_02_deformation_exactness() -> bool {
    let mut top = 0.0f64;
    let mut fit_residual = 0.0f64;
    let mut completeness = 0.0f64;
    let mut x_equiv = 0.0f64;
    for n in [4, 6, 8] {
        let basis = SpinBasis::build(n).unwrap();
        let sites: Vec<usize> = (1..=n).collect();
        let z = deformation_table(&basis, Axis::Z, &sites).unwrap();
        top = top.max(z.top_linear_defect());
        completeness = completeness.max(z.completeness_defect());
        let fit = fit_deformation(&z).unwrap();
        println!(
            "  N = {n}: quartic residual {:.3e}, b = {:.12}, c = {:.12}",
            fit.residual, fit.b, fit.c
        );
        fit_residual = fit_residual.max(fit.residual);
        let x = deformation_table(&basis.rotated(Axis::X), Axis::X, &sites).unwrap();
        assert_eq!(x.entries.len(), z.entries.len());
        for (a, b) in x.entries.iter().zip(&z.entries) {
            assert_eq!((a.s, a.l, a.site, a.m), (b.s, b.l, b.site, b.m));
            x_equiv = x_equiv.max((a.value - b.value).norm());
        }
    }
    report(
        2,
        top < 1e-12 && fit_residual < 1e-8 && completeness < 1e-9 && x_equiv < 1e-9,
        format!(
            "top linear {top:.3e}, quartic residual {fit_residual:.3e}, completeness {completeness:.3e}, x-basis {x_equiv:.3e}"
        ),
    )
}

fn criterion_03_no_qec_line() -> bool {
    let mut worst = 0.0f64;
    let angles = [
        (0.0, 0.0),
        (FRAC_PI_2, 0.0),
        (1.0, 2.0),
        (2.5, -0.7),
        (std::f64::consts::PI, 0.3),
    ];
    for n in [4, 6, 8] {
        let c = code(n);
        for k in 1..=14 {
            let p = k as f64 / 20.0;
            for &(theta, phi) in &angles {
                let cfg = RunConfig {
                    theta,
                    phi,
                    qec_enabled: false,
                    ..one_cycle(n, p)
                };
                worst = worst.max((gamma(&c, cfg) - 4.0 * p / 3.0).abs());
            }
        }
    }
    report(
        3,
        worst < 1e-10,
        format!("max |gamma_L - 4p/3| = {worst:.3e}"),
    )
}

fn criterion_04_crossover() -> bool {
    let mut worst = 0.0f64;
    for n in [4, 6, 8] {
        let c = code(n);
        let ideal = gamma(&c, one_cycle(n, 0.75));
        let faulty = gamma(
            &c,
            RunConfig {
                p_m: 0.75,
                p_i: 0.75,
                ..one_cycle(n, 0.75)
            },
        );
        println!("  N = {n}: ideal {ideal:.12}, faulty readout {faulty:.12}");
        worst = worst.max((ideal - 1.0).abs()).max((faulty - ideal).abs());
    }
    report(
        4,
        worst < 1e-6,
        format!("max deviation from gamma_L = 1: {worst:.3e}"),
    )
}

fn criterion_05_ordering_below_threshold() -> bool {
    let start = Instant::now();
    let result = sweep(&SweepSpec::default(), 12, None).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let mut ordered = true;
    for p in [0.1, 0.2, 0.3, 0.5] {
        let g: Vec<f64> = [4, 6, 8]
            .iter()
            .map(|&n| result.gamma(n, p, true).unwrap())
            .collect();
        println!(
            "  p = {p}: gamma_L(4, 6, 8) = {:.6}, {:.6}, {:.6}",
            g[0], g[1], g[2]
        );
        ordered &= g[2] < g[1] && g[1] < g[0];
    }
    report(
        5,
        ordered && secs < 600.0,
        format!(
            "strict ordering = {ordered}, sweep of {} points in {secs:.1} s",
            result.records.len()
        ),
    )
}

fn criterion_06_exponential_form() -> bool {
    let cfg = RunConfig {
        cycles: 30,
        ..one_cycle(8, 0.1)
    };
    let fit = fit_exponential(&run_cycles(&cfg, &code(8)).unwrap()).unwrap();
    report(
        6,
        fit.r_squared > 0.99,
        format!("gamma = {:.6}, R^2 = {:.6}", fit.gamma, fit.r_squared),
    )
}

fn criterion_07_logical_error_metric() -> bool {
    let mut worst = 0.0f64;
    for n in [2, 4, 8] {
        let (a, b) = coherent_amplitudes(FRAC_PI_2, 0.0);
        let reference = decode_bloch(&encode_coherent(n, a, b).unwrap().density()).unwrap();
        for delta in [0.1, 0.5, 1.0] {
            let (a, b) = coherent_amplitudes(FRAC_PI_2, delta);
            let rho = encode_coherent(n, a, b).unwrap().density();
            let eps = logical_error(&rho, &reference).unwrap();
            worst = worst.max((eps - (delta / 2.0).sin().abs()).abs());
        }
    }
    report(
        7,
        worst < 1e-10,
        format!("max |eps_L - |sin(delta/2)|| = {worst:.3e}"),
    )
}

fn criterion_08_phase_flip_kl() -> bool {
    let mut worst = 0.0f64;
    for n in [2, 4, 6, 8] {
        let basis = SpinBasis::build(n).unwrap();
        let half = n as i32 / 2;
        for p in [0.05, 0.1, 0.3] {
            for site in 1..=n {
                for m in -half..=half {
                    for mp in -half..=half {
                        let brute = kl_phase_flip_brute(&basis, p, m, mp, site).unwrap();
                        let analytic = if m == mp {
                            kl_matrix_phase_flip(n, p, m).unwrap()
                        } else {
                            nalgebra::Matrix2::zeros()
                        };
                        for i in 0..2 {
                            for j in 0..2 {
                                let d = brute[(i, j)]
                                    - spinor_qec::linalg::C64::new(analytic[(i, j)], 0.0);
                                worst = worst.max(d.norm());
                            }
                        }
                    }
                }
            }
        }
    }
    report(
        8,
        worst < 1e-10,
        format!("max brute-force vs analytic deviation {worst:.3e}"),
    )
}

fn criterion_09_approximate_kl_bound() -> bool {
    let mut all_pass = true;
    let mut envelope_ok = true;
    for p in [0.05, 0.1, 0.2] {
        let mut sup = std::collections::BTreeMap::new();
        for n in [4, 6, 8, 10] {
            let basis = SpinBasis::build(n).unwrap();
            let r = kl_bound_check(&basis, p, BandSpec::default(), 1).unwrap();
            println!(
                "  N = {n}, p = {p}: observed {:.4e}, epsilon_N {:.4e}",
                r.observed_sup, r.epsilon_n
            );
            all_pass &= r.pass();
            sup.insert(n, r.observed_sup);
        }
        envelope_ok &= sup[&8] <= 1.1 * sup[&4];
    }
    report(
        9,
        all_pass && envelope_ok,
        format!("bound holds everywhere = {all_pass}, N=8 within envelope of N=4 = {envelope_ok}"),
    )
}

fn criterion_10_faulty_readout_degrades() -> bool {
    let c = code(8);
    let ideal = gamma(&c, one_cycle(8, 0.1));
    let faulty = gamma(
        &c,
        RunConfig {
            p_m: 0.1,
            p_i: 0.1,
            ..one_cycle(8, 0.1)
        },
    );
    report(
        10,
        faulty > ideal,
        format!("gamma_L ideal {ideal:.6}, faulty readout {faulty:.6}"),
    )
}

fn criterion_11_extrapolated_threshold() -> bool {
    let result = sweep(&SweepSpec::default(), 12, None).unwrap();
    let th = extrapolate(&result, 1e-4).unwrap();
    let first = th.fits.iter().find(|f| (f.p - 0.05).abs() < 1e-12).unwrap();
    let fit_set_ok = first.n_used == [6, 8];
    let low_ok = first.intercept <= 1e-3;
    let mut monotone = true;
    for w in th.fits.windows(2) {
        if w[1].intercept <= w[0].intercept {
            println!(
                "  intercept not increasing: a({}) = {:.6e} -> a({}) = {:.6e}",
                w[0].p, w[0].intercept, w[1].p, w[1].intercept
            );
            monotone = false;
        }
    }
    let high_ok = th.p_high == 0.75;
    report(
        11,
        fit_set_ok && low_ok && monotone && high_ok,
        format!(
            "a(0.05) = {:.3e} from N = {:?}, monotone = {monotone}, p_low = {:?}, p_high = {}",
            first.intercept, first.n_used, th.p_low, th.p_high
        ),
    )
}

fn criterion_12_sweep_determinism() -> bool {
    let dir = tempfile::tempdir().unwrap();
    let run = |jobs: &str| {
        let out = dir.path().join(format!("sweep_{jobs}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_spinor-qec"))
            .args(["sweep", "--include-no-qec", "--jobs", jobs, "--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out).unwrap()
    };
    let (a, b) = (run("1"), run("4"));
    report(
        12,
        !a.is_empty() && a == b,
        format!(
            "--jobs 1 and --jobs 4 outputs identical = {} ({} bytes)",
            a == b,
            a.len()
        ),
    )
}

fn main() {
    let criteria: [(u32, fn() -> bool); 12] = [
        (1, criterion_01_basis_validity),
        (2, criterion_02_deformation_exactness),
        (3, criterion_03_no_qec_line),
        (4, criterion_04_crossover),
        (5, criterion_05_ordering_below_threshold),
        (6, criterion_06_exponential_form),
        (7, criterion_07_logical_error_metric),
        (8, criterion_08_phase_flip_kl),
        (9, criterion_09_approximate_kl_bound),
        (10, criterion_10_faulty_readout_degrades),
        (11, criterion_11_extrapolated_threshold),
        (12, criterion_12_sweep_determinism),
    ];
    let mut failed = Vec::new();
    for (id, run) in criteria {
        let pass = std::panic::catch_unwind(run).unwrap_or_else(|_| {
            println!("FAIL criterion {id}: panicked");
            false
        });
        if !pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} of 12 criteria pass", 12 - failed.len());
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
