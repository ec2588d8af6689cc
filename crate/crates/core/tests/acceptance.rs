//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use momentlab::filters::{filter_limit_verdict, FilterSpec, IndexSet, Verdict};
use momentlab::lattice::OSequenceLadder;
use momentlab::modulars::{check_axioms, random_corpus, Modular, ModularSpec, Measure};
use momentlab::moment_ops::{bound_checks, consfubini_residual, derivative_fd_deviation, ode_residual, ode_solve, transform};
use momentlab::profiles::{Profile, ALL_PROFILES};
use momentlab::quadrature::{Grid, GridFunction};
use momentlab::stochastic::{mc_ito_moments, smoothed_convergence_experiment, RegularProcessSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn grid(t0: f64, end: f64, h: f64) -> Grid {
    Grid::spanning(t0, end, h).unwrap()
}

fn integral_identity() -> Outcome {
    let g = grid(0.0, 6.0, 1e-3);
    let mut worst: f64 = 0.0;
    let mut slowest: f64 = 0.0;
    for p in [Profile::Indicator, Profile::Bump, Profile::Sin] {
        for n in [2u32, 3, 5, 10] {
            let start = Instant::now();
            let f = p.build(&g, 2.0, 3.0).unwrap();
            worst = worst.max(consfubini_residual(&f, n).unwrap());
            slowest = slowest.max(start.elapsed().as_secs_f64());
        }
    }
    outcome(worst <= 1e-4 && slowest < 1.0, format!("worst residual {worst:.3e} (<= 1e-4), slowest case {slowest:.3}s (< 1s)"))
}

fn derivative_identity() -> Outcome {
    let dev = |h: f64| {
        let g = grid(0.0, 6.0, h);
        let f = Profile::Bump.build(&g, 2.0, 3.0).unwrap();
        derivative_fd_deviation(&transform(&f, 5, &g).unwrap())
    };
    let (coarse, fine) = (dev(1e-3), dev(5e-4));
    let ratio = coarse / fine;
    outcome(coarse <= 1e-3 && ratio >= 3.0, format!("deviation {coarse:.3e} (<= 1e-3), halving ratio {ratio:.2} (>= 3)"))
}

fn lipschitz_bound() -> Outcome {
    let g = grid(0.0, 6.0, 1e-3);
    let mut violations = 0;
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    for p in [Profile::Indicator, Profile::Bump, Profile::Sin, Profile::SmoothBump] {
        let f = p.build(&g, 1.5, 3.0).unwrap();
        for n in [2u32, 5, 10] {
            let r = bound_checks(&transform(&f, n, &g).unwrap(), 10_000, 42);
            violations += r.lipschitz_violations;
            pairs += r.pairs_checked;
            worst = worst.max(r.worst_lipschitz_ratio);
        }
    }
    outcome(violations == 0 && pairs == 120_000, format!("{violations} violations in {pairs} pairs, worst ratio {worst:.3e}"))
}

fn tail_bound() -> Outcome {
    let g = grid(0.0, 6.0, 1e-3);
    let mut ok = true;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut mass_ok = true;
    for p in ALL_PROFILES {
        let f = p.build(&g, 1.5, 3.0).unwrap();
        for n in 2u32..=10 {
            let r = bound_checks(&transform(&f, n, &g).unwrap(), 10, 0);
            ok &= r.tail_ok && r.tail_nodes_checked > 0;
            worst_excess = worst_excess.max(r.worst_tail_excess);
            let closed = r.m_f * 3.0 / 2f64.powi(n as i32 - 1);
            mass_ok &= (r.equi_ac_tail - closed).abs() <= 1e-12 * closed.max(1.0) && r.tail_mass_beyond_2b.is_some_and(|m| m <= closed * (1.0 + 1e-12));
        }
    }
    outcome(ok && mass_ok, format!("worst excess over M_f(b/s)^n {worst_excess:.3e}, tail mass beyond 2b bounded: {mass_ok}"))
}

fn sup_error(n: u32) -> f64 {
    let input = grid(0.0, 6.0, 1e-3);
    let window = grid(0.5, 6.0, 1e-3);
    let f = Profile::Bump.build(&input, 2.0, 3.0).unwrap();
    let t = transform(&f, n, &window).unwrap();
    window.nodes().zip(t.output().values()).map(|(s, v)| (v - f.eval(s)).abs()).fold(0.0, f64::max)
}

fn uniform_convergence() -> Outcome {
    let (e5, e200) = (sup_error(5), sup_error(200));
    outcome(e200 < e5 && e200 < 1e-2, format!("sup error n=5 {e5:.5}, n=200 {e200:.5} (< 1e-2)"))
}

fn l1_error(n: u32) -> f64 {
    let g = grid(0.0, 6.0, 1e-3);
    let f = Profile::Bump.build(&g, 2.0, 3.0).unwrap();
    let t = transform(&f, n, &g).unwrap();
    let err = t.output().sub(&f).unwrap();
    ModularSpec::l1(Measure::Lebesgue).eval(&err).unwrap() + t.tail_integral_from(6.0).unwrap()
}

fn modular_decay() -> Outcome {
    let (e5, e100) = (l1_error(5), l1_error(100));
    outcome(e100 < 1e-2 && e100 < e5 / 5.0, format!("L1 error n=5 {e5:.5}, n=100 {e100:.5} (< 1e-2 and < {:.5})", e5 / 5.0))
}

fn modular_axioms() -> Outcome {
    let start = Instant::now();
    let g = grid(0.0, 6.0, 1e-3);
    let corpus = random_corpus(g, 50, 42);
    let w_prime = GridFunction::from_fn(g, Some((1.5, 3.0)), |t| 2.0 * (t - 1.5) * (3.0 - t) * (4.5 - 2.0 * t)).unwrap();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for rho in [ModularSpec::l1(Measure::Lebesgue), ModularSpec::weighted_deriv(w_prime).unwrap()] {
        let r = check_axioms(&rho, &corpus, 1e-12).unwrap();
        ok &= r.rho0_ok && r.rho1_ok && r.rho2_ok && r.monotone_ok;
        worst = worst.max(r.worst_violation);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(ok && worst <= 1e-12 && secs < 5.0, format!("worst violation {worst:.3e} (<= 1e-12), {secs:.2}s (< 5s)"))
}

fn statistical_convergence() -> Outcome {
    let ladder = OSequenceLadder::new(vec![0.1, 0.01, 0.001], 0.001).unwrap();
    let squares = IndexSet::Squares;
    let x = |k: usize| if squares.contains(k) { 1.0 } else { 1.0 / k as f64 };
    let density = filter_limit_verdict(x, 0.0, &ladder, &FilterSpec::density(1_000_000, 0.999).unwrap());
    let cofinite = filter_limit_verdict(x, 0.0, &ladder, &FilterSpec::cofinite(1_000_000).unwrap());
    let cofinite_fails = cofinite.rungs.iter().all(|r| r.verdict != Verdict::InFilter) && !cofinite.pass;
    outcome(
        density.pass && cofinite_fails,
        format!(
            "density verdicts {:?}, cofinite verdicts {:?}",
            density.rungs.iter().map(|r| r.verdict).collect::<Vec<_>>(),
            cofinite.rungs.iter().map(|r| r.verdict).collect::<Vec<_>>()
        ),
    )
}

fn ito_variance() -> Outcome {
    let start = Instant::now();
    let c = mc_ito_moments(&RegularProcessSpec::Constant { c: 1.0 }, &grid(0.0, 2.0, 1e-3), 10_000, 42).unwrap();
    let b = mc_ito_moments(&RegularProcessSpec::Bridge { a: 1.5, t_end: 3.0 }, &grid(0.0, 3.0, 1e-3), 10_000, 42).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let within = (c.estimate_second_moment - 2.0).abs() <= 3.0 * c.standard_error;
    outcome(
        within && b.bound_satisfied_within_3se && secs < 10.0,
        format!(
            "constant: E S^2 = {:.4} +- {:.4} (target 2); bridge: {:.4} +- {:.4} vs KT = {}; {secs:.2}s (< 10s)",
            c.estimate_second_moment, c.standard_error, b.estimate_second_moment, b.standard_error, b.bound_kt
        ),
    )
}

fn smoothed_convergence() -> Outcome {
    let start = Instant::now();
    let g = grid(0.0, 3.0, 2e-3);
    let run = || smoothed_convergence_experiment(1.5, 3.0, &[10, 40, 80], &g, 500, 42, false).unwrap();
    let r = run();
    let secs = start.elapsed().as_secs_f64();
    let repeat = run() == r;
    let (first, last) = (&r.rows[0], &r.rows[2]);
    outcome(
        r.improves_beyond_se() && repeat && secs < 60.0,
        format!(
            "L2 error n=10 {:.4e} (se {:.1e}), n=80 {:.4e} (se {:.1e}); repeatable {repeat}; {secs:.2}s (< 60s)",
            first.l2_error, first.se, last.l2_error, last.se
        ),
    )
}

fn ode() -> Outcome {
    let h = 1e-3;
    let g4 = grid(0.0, 4.0, h);
    let e4 = grid(h, 4.0, h);
    let one = Profile::Indicator.build(&g4, 0.0, 4.0).unwrap();
    let lin = Profile::Ramp.build(&g4, 0.0, 4.0).unwrap();
    let phi1 = ode_solve(1.0, &one, 0.0, &e4).unwrap();
    let phi2 = ode_solve(2.0, &lin, 0.0, &e4).unwrap();
    let exact1 = e4.nodes().zip(phi1.values()).map(|(_, v)| (v - 1.0).abs()).fold(0.0, f64::max);
    let exact2 = e4.nodes().zip(phi2.values()).map(|(s, v)| (v - 2.0 * s / 3.0).abs()).fold(0.0, f64::max);

    let g6 = grid(0.0, 6.0, h);
    let e6 = grid(h, 6.0, h);
    let bump = Profile::Bump.build(&g6, 2.0, 3.0).unwrap();
    let phi3 = ode_solve(3.0, &bump, 0.0, &e6).unwrap();
    let residual = ode_residual(1.0, &one, &phi1)
        .max_abs()
        .max(ode_residual(2.0, &lin, &phi2).max_abs())
        .max(ode_residual(3.0, &bump, &phi3).max_abs());
    let exact = exact1.max(exact2);
    outcome(residual <= 1e-3 && exact <= 1e-12, format!("max residual {residual:.3e} (<= 1e-3), closed-form error {exact:.3e} (<= 1e-12)"))
}

/// Exit code, stdout and the sorted files of `out/`.
type CliRun = (i32, Vec<u8>, Vec<(String, Vec<u8>)>);

fn run_cli(dir: &Path, threads: &str, args: &[&str]) -> CliRun {
    std::fs::create_dir_all(dir).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_momentlab"))
        .args(args)
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .unwrap();
    let mut files = Vec::new();
    if let Ok(entries) = std::fs::read_dir(dir.join("out")) {
        for e in entries {
            let e = e.unwrap();
            files.push((e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).unwrap()));
        }
    }
    files.sort();
    (out.status.code().unwrap_or(-1), out.stdout, files)
}

fn reproducibility() -> Outcome {
    let runs: &[&[&str]] = &[
        &["kernel", "--n", "3"],
        &["transform", "--profile", "sin", "--n-list", "5,50"],
        &["identity", "--profile", "bump", "--n", "3"],
        &["bounds"],
        &["ode", "--nu", "3"],
        &["weak"],
        &["filter"],
        &["modular", "--modular", "weighted-deriv"],
        &["modular", "--check", "decay"],
        &["brownian", "--paths", "3"],
        &["ito", "--trials", "2000"],
        &["ito", "--process", "smoothed", "--trials", "500", "--dump-trials"],
        &["smooth-converge", "--dump-trials"],
        &["figure1", "--seed", "42", "--a", "1.5", "--T", "3", "--h", "1e-3"],
    ];
    let root = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    for (k, args) in runs.iter().enumerate() {
        let mut full: Vec<&str> = args.to_vec();
        full.extend(["--out", "out"]);
        let results: Vec<_> = [("a", "1"), ("b", "1"), ("c", "4")]
            .iter()
            .map(|(tag, threads)| run_cli(&root.path().join(format!("{k}{tag}")), threads, &full))
            .collect();
        if results.windows(2).any(|w| w[0] != w[1]) || results[0].1.is_empty() {
            mismatches.push(args.join(" "));
        }
    }
    outcome(mismatches.is_empty(), format!("{} configurations x 3 runs (threads 1, 1, 4); differing: {mismatches:?}", runs.len()))
}

fn main() {
    type Check = fn() -> Outcome;
    let criteria: [(&str, Check); 12] = [
        ("integral identity", integral_identity),
        ("derivative identity", derivative_identity),
        ("Lipschitz bound", lipschitz_bound),
        ("tail bound", tail_bound),
        ("uniform convergence", uniform_convergence),
        ("modular decay", modular_decay),
        ("modular axioms", modular_axioms),
        ("statistical convergence", statistical_convergence),
        ("Ito variance bound", ito_variance),
        ("smoothed convergence", smoothed_convergence),
        ("ODE", ode),
        ("reproducibility", reproducibility),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {:>2} {} {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
