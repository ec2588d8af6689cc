//! Command-line experiment runner.
//!
//! Every subcommand accepts the same flat set of flags; unused flags are
//! ignored but still echoed in the resolved configuration of the JSON report.
//! Exit status: 0 when every contract of the report holds, 1 when one fails,
//! 2 for invalid configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::filters::{filter_limit_verdict, FilterSpec, IndexSet};
use crate::lattice::OSequenceLadder;
use crate::modulars::{
    check_axioms, decays_below, finiteness_scan, random_corpus, vitali_decay, write_decay_csv, Measure, ModularSpec,
    DEFAULT_ALPHA_GRID,
};
use crate::moment_ops::{
    approximation_error_family, bound_checks, consfubini_residual, derivative_fd_deviation, kernel_eval, ode_residual,
    ode_solve, transform, weak_convergence_experiment,
};
use crate::profiles::Profile;
use crate::quadrature::{fmt_f64, Grid, GridFunction};
use crate::stochastic::{
    bridge_process, holder_witness, ito_samples, mc_ito_moments, simulate_brownian_stream,
    smoothed_convergence_experiment, RegularProcessSpec,
};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "momentlab", version, about = "Moment-kernel operator experiments", args_override_self = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel M_n(w) = n w^n on (0, 1)
    Kernel(RunArgs),
    /// T_n f on a grid, one `s,f,Tn_f` table per n
    Transform(RunArgs),
    /// Integral identity residual
    Identity(RunArgs),
    /// Lipschitz, tail and uniform-error bounds
    Bounds(RunArgs),
    /// s φ' + ν φ = ν f
    Ode(RunArgs),
    /// Weak convergence against a smooth test function
    Weak(RunArgs),
    /// Filter convergence of a scalar sequence
    Filter(RunArgs),
    /// Modular axioms, finiteness scan or decay along T_n f − f
    Modular(RunArgs),
    /// Seeded Brownian paths
    Brownian(RunArgs),
    /// Monte Carlo moments of Itô sums
    Ito(RunArgs),
    /// Smoothed stochastic integrals against the Itô sum
    SmoothConverge(RunArgs),
    /// Bridge trajectory with T_50 f and T_80 f, and a ten-path overlay
    Figure1(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Kernel(_) => "kernel",
            Command::Transform(_) => "transform",
            Command::Identity(_) => "identity",
            Command::Bounds(_) => "bounds",
            Command::Ode(_) => "ode",
            Command::Weak(_) => "weak",
            Command::Filter(_) => "filter",
            Command::Modular(_) => "modular",
            Command::Brownian(_) => "brownian",
            Command::Ito(_) => "ito",
            Command::SmoothConverge(_) => "smooth-converge",
            Command::Figure1(_) => "figure1",
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Kernel(a)
            | Command::Transform(a)
            | Command::Identity(a)
            | Command::Bounds(a)
            | Command::Ode(a)
            | Command::Weak(a)
            | Command::Filter(a)
            | Command::Modular(a)
            | Command::Brownian(a)
            | Command::Ito(a)
            | Command::SmoothConverge(a)
            | Command::Figure1(a) => a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterChoice {
    Cofinite,
    Density,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SequenceChoice {
    /// 1 on perfect squares, 1/k elsewhere
    Squares,
    /// 1/k
    Harmonic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ProcessChoice {
    Constant,
    Bridge,
    Smoothed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModularChoice {
    L1,
    LogL1,
    WeightedDeriv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModularCheck {
    Axioms,
    Finiteness,
    Decay,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub n: Option<u32>,
    #[arg(long, value_delimiter = ',')]
    pub n_list: Option<Vec<u32>>,
    /// Left end of the support (1.5)
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<f64>,
    /// Right end of the support, also the horizon T of the stochastic commands (3)
    #[arg(long, alias = "T")]
    pub b: Option<f64>,
    /// Grid step
    #[arg(long)]
    pub h: Option<f64>,
    /// End of the evaluation window (2b)
    #[arg(long)]
    pub smax: Option<f64>,
    /// Kernel argument
    #[arg(long, allow_negative_numbers = true)]
    pub w: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub nu: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub c: f64,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    pub horizon: usize,
    #[arg(long, default_value_t = crate::filters::DEFAULT_DENSITY_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_enum, default_value_t = FilterChoice::Density)]
    pub filter: FilterChoice,
    #[arg(long, value_enum, default_value_t = SequenceChoice::Squares)]
    pub sequence: SequenceChoice,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.01, 0.001])]
    pub ladder: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ProcessChoice::Bridge)]
    pub process: ProcessChoice,
    #[arg(long, value_enum, default_value_t = ModularChoice::L1)]
    pub modular: ModularChoice,
    #[arg(long, value_enum, default_value_t = ModularCheck::Axioms)]
    pub check: ModularCheck,
    /// Size of the random corpus for the modular axioms
    #[arg(long, default_value_t = 50)]
    pub corpus: usize,
    /// Node pairs sampled by the Lipschitz check
    #[arg(long, default_value_t = 10_000)]
    pub pairs: usize,
    #[arg(long, default_value_t = 1)]
    pub paths: usize,
    /// Contract tolerance (per-command default)
    #[arg(long)]
    pub tol: Option<f64>,
    /// Also write per-trial values
    #[arg(long)]
    pub dump_trials: bool,
    #[arg(long, default_value = "bump")]
    pub profile: String,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Directory for CSV files
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// File of `key=value` lines, read as flags placed before the command line ones
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// The configuration actually used, echoed in every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub subcommand: String,
    pub n: u32,
    pub n_list: Vec<u32>,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub smax: f64,
    pub w: Option<f64>,
    pub nu: f64,
    pub c: f64,
    pub trials: usize,
    pub horizon: usize,
    pub threshold: f64,
    pub filter: FilterChoice,
    pub sequence: SequenceChoice,
    pub ladder: Vec<f64>,
    pub process: ProcessChoice,
    pub modular: ModularChoice,
    pub check: ModularCheck,
    pub corpus: usize,
    pub pairs: usize,
    pub paths: usize,
    pub tol: f64,
    pub dump_trials: bool,
    pub profile: Profile,
    pub seed: u64,
    pub output_dir: Option<String>,
    pub format: Format,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub fn resolve(cmd: &Command) -> Result<RunConfig> {
    let name = cmd.name();
    let args = cmd.args();
    let a = args.a.unwrap_or(1.5);
    let b = args.b.unwrap_or(3.0);
    let h = args.h.unwrap_or(if name == "smooth-converge" { 2e-3 } else { 1e-3 });
    let smax = args.smax.unwrap_or(2.0 * b);
    let n = args.n.unwrap_or(match name {
        "identity" => 3,
        "ito" => 10,
        _ => 5,
    });
    let default_list: Vec<u32> = match name {
        "transform" => vec![5, 50, 80],
        "identity" => vec![n],
        "bounds" => vec![2, 5, 10],
        "weak" => vec![2, 5, 10, 50, 100],
        "modular" => vec![5, 10, 20, 40, 100, 200, 400],
        "smooth-converge" => vec![10, 40, 80],
        "figure1" => vec![50, 80],
        _ => vec![n],
    };
    let n_list = match (&args.n_list, args.n) {
        (Some(list), _) => list.clone(),
        (None, Some(n)) if name != "figure1" => vec![n],
        _ => default_list,
    };
    let trials = args.trials.unwrap_or(match name {
        "smooth-converge" => 500,
        _ => 10_000,
    });
    let tol = args.tol.unwrap_or(match name {
        "identity" => 1e-4,
        "ode" => 1e-3,
        "modular" if args.check == ModularCheck::Axioms => 1e-12,
        "modular" => 1e-2,
        _ => 0.0,
    });
    let format = args.format.unwrap_or(Format::Json);
    let profile: Profile = args.profile.parse()?;

    if !(h > 0.0 && h.is_finite()) {
        return Err(invalid(format!("h must be positive, got {h}")));
    }
    if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b) {
        return Err(invalid(format!("need 0 <= a < b, got a = {a}, b = {b}")));
    }
    if !(smax.is_finite() && smax >= b) {
        return Err(invalid(format!("smax must be >= b, got {smax}")));
    }
    if n == 0 || n_list.contains(&0) {
        return Err(invalid("n must be >= 1"));
    }
    if !(tol >= 0.0) {
        return Err(invalid("tol must be non-negative"));
    }
    if args.paths == 0 || args.paths > 1000 {
        return Err(invalid("paths must be in 1..=1000"));
    }
    if args.dump_trials && args.out.is_none() {
        return Err(invalid("--dump-trials needs --out"));
    }
    Ok(RunConfig {
        subcommand: name.to_string(),
        n,
        n_list,
        a,
        b,
        h,
        smax,
        w: args.w,
        nu: args.nu,
        c: args.c,
        trials,
        horizon: args.horizon,
        threshold: args.threshold,
        filter: args.filter,
        sequence: args.sequence,
        ladder: args.ladder.clone(),
        process: args.process,
        modular: args.modular,
        check: args.check,
        corpus: args.corpus,
        pairs: args.pairs,
        paths: args.paths,
        tol,
        dump_trials: args.dump_trials,
        profile,
        seed: args.seed,
        output_dir: args.out.as_ref().map(|p| p.display().to_string()),
        format,
    })
}

/// What a subcommand produced.
pub struct Outcome {
    pub pass: bool,
    pub report: Value,
    /// Table printed on stdout with `--format csv`.
    pub table: String,
    /// Files written under the output directory.
    pub files: Vec<(String, String)>,
}

#[derive(Serialize)]
struct Envelope<'a> {
    subcommand: &'a str,
    config: &'a RunConfig,
    pass: bool,
    files: Vec<&'a str>,
    report: &'a Value,
}

fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

fn num_row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(fmt_f64).collect()
}

fn function_table(first: &str, columns: &[(&str, &GridFunction)]) -> String {
    let grid = *columns[0].1.grid();
    let mut header = vec![first];
    header.extend(columns.iter().map(|(name, _)| *name));
    csv_table(
        &header,
        (0..grid.n_points()).map(|i| num_row(std::iter::once(grid.node(i)).chain(columns.iter().map(|(_, f)| f.values()[i])))),
    )
}

fn json<T: Serialize>(value: &T) -> Value {
    serde_json::to_value(value).expect("reports serialize")
}

/// Input grid `[0, smax]` for the operator commands.
fn input_grid(cfg: &RunConfig) -> Result<Grid> {
    Grid::spanning(0.0, cfg.smax, cfg.h)
}

/// Evaluation grid: the input grid, without `s = 0` when the support starts at 0.
fn eval_grid(cfg: &RunConfig) -> Result<Grid> {
    if cfg.a == 0.0 {
        Grid::spanning(cfg.h, cfg.smax, cfg.h)
    } else {
        input_grid(cfg)
    }
}

fn profile_function(cfg: &RunConfig) -> Result<GridFunction> {
    cfg.profile.build(&input_grid(cfg)?, cfg.a, cfg.b)
}

fn require_min_n(cfg: &RunConfig, min: u32) -> Result<()> {
    if cfg.n_list.is_empty() {
        return Err(invalid("n_list is empty"));
    }
    if cfg.n_list.iter().any(|&n| n < min) {
        return Err(invalid(format!("every n must be >= {min}")));
    }
    Ok(())
}

fn run_kernel(cfg: &RunConfig) -> Result<Outcome> {
    let rows: Vec<(f64, f64)> = match cfg.w {
        Some(w) => vec![(w, kernel_eval(cfg.n, w))],
        None => (0..=25).map(|i| i as f64 * 0.05).map(|w| (w, kernel_eval(cfg.n, w))).collect(),
    };
    Ok(Outcome {
        pass: true,
        report: json(&rows.iter().map(|(w, v)| json!({"w": w, "value": v})).collect::<Vec<_>>()),
        table: csv_table(&["w", "value"], rows.iter().map(|&(w, v)| num_row([w, v]))),
        files: Vec::new(),
    })
}

fn run_transform(cfg: &RunConfig) -> Result<Outcome> {
    let f = profile_function(cfg)?;
    let eval = eval_grid(cfg)?;
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let mut long = Vec::new();
    let mut pass = true;
    for &n in &cfg.n_list {
        let t = transform(&f, n, &eval)?;
        let sup_error = eval.nodes().zip(t.output().values()).map(|(s, v)| (v - f.eval(s)).abs()).fold(0.0, f64::max);
        let closed = eval
            .nodes()
            .zip(t.output().values())
            .map(|(s, v)| cfg.profile.transform(cfg.a, cfg.b, n, s).map(|c| (c - v).abs()))
            .try_fold(0.0_f64, |acc, d| d.map(|d| acc.max(d)));
        let closed_tol = 1e-12 + cfg.profile.interpolation_bound(cfg.a, cfg.b, cfg.h);
        if let Some(d) = closed {
            pass &= d <= closed_tol;
        }
        rows.push(json!({
            "n": n,
            "m_f": t.m_f(),
            "sup_error": sup_error,
            "value_at_smax": t.value_at(cfg.smax),
            "closed_form_deviation": closed,
            "closed_form_tolerance": closed_tol,
        }));
        let input = GridFunction::from_fn(eval, None, |s| f.eval(s))?;
        files.push((format!("transform_n{n}.csv"), function_table("s", &[("f", &input), ("Tn_f", t.output())])));
        for (i, s) in eval.nodes().enumerate() {
            let mut row = vec![n.to_string()];
            row.extend(num_row([s, input.values()[i], t.output().values()[i]]));
            long.push(row);
        }
    }
    Ok(Outcome { pass, report: Value::Array(rows), table: csv_table(&["n", "s", "f", "Tn_f"], long), files })
}

fn run_identity(cfg: &RunConfig) -> Result<Outcome> {
    require_min_n(cfg, 2)?;
    let f = profile_function(cfg)?;
    let mut rows = Vec::new();
    for &n in &cfg.n_list {
        let residual = consfubini_residual(&f, n)?;
        let expected = n as f64 / (n as f64 - 1.0) * cfg.profile.integral(cfg.a, cfg.b);
        rows.push((n, residual, expected, residual <= cfg.tol));
    }
    Ok(Outcome {
        pass: rows.iter().all(|r| r.3),
        report: json(
            &rows
                .iter()
                .map(|&(n, residual, expected, ok)| {
                    json!({"n": n, "residual": residual, "closed_form_total": expected, "tolerance": cfg.tol, "ok": ok})
                })
                .collect::<Vec<_>>(),
        ),
        table: csv_table(&["n", "residual"], rows.iter().map(|&(n, r, _, _)| vec![n.to_string(), fmt_f64(r)])),
        files: Vec::new(),
    })
}

fn run_bounds(cfg: &RunConfig) -> Result<Outcome> {
    let f = profile_function(cfg)?;
    let eval = eval_grid(cfg)?;
    let mut reports = Vec::new();
    let mut derivs = Vec::new();
    for &n in &cfg.n_list {
        let t = transform(&f, n, &eval)?;
        derivs.push(derivative_fd_deviation(&t));
        reports.push(bound_checks(&t, cfg.pairs, cfg.seed));
    }
    let pass = reports.iter().all(|r| r.lipschitz_ok && r.tail_ok && r.equi_ac_ok);
    let table = csv_table(
        &["n", "lipschitz_violations", "worst_tail_excess", "uniform_error", "derivative_deviation"],
        reports.iter().zip(&derivs).map(|(r, d)| {
            vec![
                r.n.to_string(),
                r.lipschitz_violations.to_string(),
                fmt_f64(r.worst_tail_excess),
                fmt_f64(r.uniform_error),
                fmt_f64(*d),
            ]
        }),
    );
    let report = reports
        .iter()
        .zip(&derivs)
        .map(|(r, d)| json!({"bounds": r, "derivative_deviation": d}))
        .collect();
    Ok(Outcome { pass, report: Value::Array(report), table, files: Vec::new() })
}

fn run_ode(cfg: &RunConfig) -> Result<Outcome> {
    let f = profile_function(cfg)?;
    let eval = Grid::spanning(cfg.h, cfg.smax, cfg.h)?;
    let phi = ode_solve(cfg.nu, &f, cfg.c, &eval)?;
    let residual = ode_residual(cfg.nu, &f, &phi);
    let interior = |s: f64| (s - cfg.a).abs() > 1.5 * cfg.h && (s - cfg.b).abs() > 1.5 * cfg.h;
    let max_residual = eval.nodes().zip(residual.values()).filter(|(s, _)| interior(*s)).map(|(_, r)| r.abs()).fold(0.0, f64::max);
    let max_residual_all = residual.max_abs();
    // integer ν with c = 0 is T_ν f
    let closed = (cfg.c == 0.0 && cfg.nu.fract() == 0.0 && cfg.nu >= 1.0)
        .then(|| {
            eval.nodes()
                .zip(phi.values())
                .map(|(s, v)| cfg.profile.transform(cfg.a, cfg.b, cfg.nu as u32, s).map(|c| (c - v).abs() / c.abs().max(1.0)))
                .try_fold(0.0_f64, |acc, d| d.map(|d| acc.max(d)))
        })
        .flatten();
    let closed_tol = 1e-12 + cfg.profile.interpolation_bound(cfg.a, cfg.b, cfg.h);
    let pass = max_residual <= cfg.tol && closed.is_none_or(|d| d <= closed_tol);
    let input = GridFunction::from_fn(eval, None, |s| f.eval(s))?;
    let table = function_table("s", &[("f", &input), ("phi", &phi), ("residual", &residual)]);
    Ok(Outcome {
        pass,
        report: json!({
            "max_residual": max_residual,
            "max_residual_all_nodes": max_residual_all,
            "closed_form_deviation": closed,
            "closed_form_tolerance": closed_tol,
            "tolerance": cfg.tol,
        }),
        files: vec![("ode.csv".into(), table.clone())],
        table,
    })
}

fn run_weak(cfg: &RunConfig) -> Result<Outcome> {
    require_min_n(cfg, 1)?;
    let f = profile_function(cfg)?;
    let grid = *f.grid();
    let (lo, hi) = (0.5 * cfg.a, cfg.smax);
    let peak = ((hi - lo) / 2.0).powi(4);
    let w = GridFunction::from_fn(grid, Some((lo, hi)), |t| ((t - lo) * (hi - t)).powi(2) / peak)?;
    let rows = weak_convergence_experiment(&f, &w, &cfg.n_list)?;
    let pass = match (rows.first(), rows.last()) {
        (Some(first), Some(last)) => last.delta_weak <= first.delta_weak,
        _ => true,
    };
    let table = csv_table(
        &["n", "delta_weak", "delta_stieltjes"],
        rows.iter().map(|r| vec![r.n.to_string(), fmt_f64(r.delta_weak), fmt_f64(r.delta_stieltjes)]),
    );
    Ok(Outcome { pass, report: json(&rows), files: vec![("weak.csv".into(), table.clone())], table })
}

fn ladder(cfg: &RunConfig) -> Result<OSequenceLadder> {
    let last = *cfg.ladder.last().ok_or_else(|| invalid("ladder is empty"))?;
    OSequenceLadder::new(cfg.ladder.clone(), last)
}

fn run_filter(cfg: &RunConfig) -> Result<Outcome> {
    let spec = match cfg.filter {
        FilterChoice::Cofinite => FilterSpec::cofinite(cfg.horizon)?,
        FilterChoice::Density => FilterSpec::density(cfg.horizon, cfg.threshold)?,
    };
    let ladder = ladder(cfg)?;
    let squares = IndexSet::Squares;
    let report = match cfg.sequence {
        SequenceChoice::Squares => {
            filter_limit_verdict(|k| if squares.contains(k) { 1.0 } else { 1.0 / k as f64 }, 0.0, &ladder, &spec)
        }
        SequenceChoice::Harmonic => filter_limit_verdict(|k| 1.0 / k as f64, 0.0, &ladder, &spec),
    };
    let table = csv_table(
        &["epsilon", "set_size", "verdict"],
        report.rungs.iter().map(|r| vec![fmt_f64(r.epsilon), r.set_size.to_string(), json(&r.verdict).as_str().unwrap_or("").to_string()]),
    );
    Ok(Outcome { pass: report.pass, report: json(&report), table, files: Vec::new() })
}

fn run_modular(cfg: &RunConfig) -> Result<Outcome> {
    let grid = match cfg.modular {
        ModularChoice::LogL1 => Grid::spanning(cfg.h, cfg.smax, cfg.h)?,
        _ => input_grid(cfg)?,
    };
    let rho = match cfg.modular {
        ModularChoice::L1 => ModularSpec::l1(Measure::Lebesgue),
        ModularChoice::LogL1 => ModularSpec::l1(Measure::LogScale),
        ModularChoice::WeightedDeriv => {
            let (a, b) = (cfg.a, cfg.b);
            ModularSpec::weighted_deriv(GridFunction::from_fn(grid, Some((a, b)), |t| {
                2.0 * (t - a) * (b - t) * (a + b - 2.0 * t)
            })?)?
        }
    };
    match cfg.check {
        ModularCheck::Axioms => {
            if cfg.corpus == 0 {
                return Err(invalid("corpus must be nonempty"));
            }
            let corpus = random_corpus(grid, cfg.corpus, cfg.seed);
            let r = check_axioms(&rho, &corpus, cfg.tol)?;
            let pass = r.rho0_ok && r.rho1_ok && r.rho2_ok && r.monotone_ok;
            let table = csv_table(
                &["axiom", "worst"],
                [("rho0", r.worst_rho0), ("rho1", r.worst_rho1), ("rho2", r.worst_rho2), ("monotone", r.worst_monotone)]
                    .iter()
                    .map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]),
            );
            Ok(Outcome { pass, report: json!({"modular": rho.description, "axioms": r}), table, files: Vec::new() })
        }
        ModularCheck::Finiteness => {
            let rows = finiteness_scan(&rho, &grid, (cfg.a, cfg.b), &ladder(cfg)?)?;
            let pass = rows.iter().all(|r| r.rho.is_finite()) && rows.windows(2).all(|w| w[1].rho <= w[0].rho);
            let table = csv_table(&["epsilon", "rho"], rows.iter().map(|r| num_row([r.epsilon, r.rho])));
            Ok(Outcome { pass, report: json!({"modular": rho.description, "rows": rows}), table, files: Vec::new() })
        }
        ModularCheck::Decay => {
            let f = cfg.profile.build(&grid, cfg.a, cfg.b)?;
            let eval = if cfg.a == 0.0 { Grid::spanning(cfg.h, cfg.smax, cfg.h)? } else { grid };
            let f = if eval.same_as(&grid) { f } else { cfg.profile.build(&eval, cfg.a.max(cfg.h), cfg.b)? };
            let family = approximation_error_family(&f, &cfg.n_list, &eval)?;
            let series = vitali_decay(&family, &rho, &DEFAULT_ALPHA_GRID)?;
            let pass = decays_below(&series[0], cfg.tol);
            let mut buf = Vec::new();
            write_decay_csv(&series, &mut buf).map_err(|e| invalid(e.to_string()))?;
            let table = String::from_utf8(buf).expect("ascii output");
            Ok(Outcome {
                pass,
                report: json!({"modular": rho.description, "threshold": cfg.tol, "series": series}),
                files: vec![("decay.csv".into(), table.clone())],
                table,
            })
        }
    }
}

/// Grid `[0, T]` for the stochastic commands.
fn path_grid(cfg: &RunConfig) -> Result<Grid> {
    Grid::spanning(0.0, cfg.b, cfg.h)
}

fn run_brownian(cfg: &RunConfig) -> Result<Outcome> {
    let grid = path_grid(cfg)?;
    let paths = (0..cfg.paths as u64).map(|k| simulate_brownian_stream(cfg.seed, k, &grid)).collect::<Result<Vec<_>>>()?;
    let fns: Vec<GridFunction> = paths.iter().map(|p| p.as_grid_function()).collect();
    let names: Vec<String> = (0..paths.len()).map(|k| format!("B{k}")).collect();
    let columns: Vec<(&str, &GridFunction)> = names.iter().map(String::as_str).zip(&fns).collect();
    let table = function_table("t", &columns);
    let rows: Vec<Value> = paths
        .iter()
        .map(|p| json!({"stream": p.stream(), "terminal": p.values()[grid.n_points() - 1], "holder_witness": holder_witness(p)}))
        .collect();
    let pass = rows.iter().all(|r| r["holder_witness"].as_f64().is_some_and(f64::is_finite));
    Ok(Outcome {
        pass,
        report: json!({"n_points": grid.n_points(), "paths": rows}),
        files: vec![("brownian.csv".into(), table.clone())],
        table,
    })
}

fn process_spec(cfg: &RunConfig) -> RegularProcessSpec {
    match cfg.process {
        ProcessChoice::Constant => RegularProcessSpec::Constant { c: cfg.c },
        ProcessChoice::Bridge => RegularProcessSpec::Bridge { a: cfg.a, t_end: cfg.b },
        ProcessChoice::Smoothed => RegularProcessSpec::SmoothedBridge { a: cfg.a, t_end: cfg.b, n: cfg.n },
    }
}

fn run_ito(cfg: &RunConfig) -> Result<Outcome> {
    let grid = path_grid(cfg)?;
    let spec = process_spec(cfg);
    let report = mc_ito_moments(&spec, &grid, cfg.trials, cfg.seed)?;
    let mut files = Vec::new();
    if cfg.dump_trials {
        let samples = ito_samples(&spec, &grid, cfg.trials, cfg.seed)?;
        let t = csv_table(&["trial", "value"], samples.iter().enumerate().map(|(k, v)| vec![k.to_string(), fmt_f64(*v)]));
        files.push(("trials.csv".into(), t));
    }
    let table = csv_table(
        &["trials", "mean", "second_moment", "standard_error", "bound_kt"],
        [vec![
            report.trials.to_string(),
            fmt_f64(report.estimate_mean),
            fmt_f64(report.estimate_second_moment),
            fmt_f64(report.standard_error),
            fmt_f64(report.bound_kt),
        ]],
    );
    Ok(Outcome { pass: report.bound_satisfied_within_3se, report: json(&report), table, files })
}

fn run_smooth_converge(cfg: &RunConfig) -> Result<Outcome> {
    let grid = path_grid(cfg)?;
    let mut report = smoothed_convergence_experiment(cfg.a, cfg.b, &cfg.n_list, &grid, cfg.trials, cfg.seed, cfg.dump_trials)?;
    let mut files = Vec::new();
    if let Some(records) = report.trial_values.take() {
        let mut header = vec!["trial".to_string(), "reference".to_string()];
        header.extend(cfg.n_list.iter().map(|n| format!("n{n}")));
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows = records.iter().map(|r| {
            let mut row = vec![r.trial.to_string(), fmt_f64(r.reference)];
            row.extend(r.smoothed.iter().map(|&v| fmt_f64(v)));
            row
        });
        files.push(("trials.csv".into(), csv_table(&header, rows)));
    }
    let improves = report.improves_beyond_se();
    let table = csv_table(
        &["n", "l2_error", "se", "clamped_l2_error"],
        report.rows.iter().map(|r| vec![r.n.to_string(), fmt_f64(r.l2_error), fmt_f64(r.se), fmt_f64(r.clamped_l2_error)]),
    );
    Ok(Outcome {
        pass: improves && report.decreasing_within_se,
        report: json!({"experiment": report, "improves_beyond_se": improves}),
        table,
        files,
    })
}

fn run_figure1(cfg: &RunConfig) -> Result<Outcome> {
    let grid = path_grid(cfg)?;
    let path = simulate_brownian_stream(cfg.seed, 0, &grid)?;
    let f = bridge_process(&path, cfg.a, cfg.b)?;
    let brownian = path.as_grid_function();
    let mut files = vec![("bridge.csv".to_string(), function_table("t", &[("B", &brownian), ("f", &f)]))];
    let mut sup = Vec::new();
    for n in [50u32, 80] {
        let t = transform(&f, n, &grid)?;
        sup.push(json!({"n": n, "sup_error": t.output().sub(&f)?.max_abs()}));
        files.push((format!("t{n}.csv"), function_table("t", &[("f", &f), ("Tn_f", t.output())])));
    }
    let overlay = (0..10u64)
        .map(|k| bridge_process(&simulate_brownian_stream(cfg.seed, k, &grid)?, cfg.a, cfg.b))
        .collect::<Result<Vec<_>>>()?;
    let names: Vec<String> = (0..10).map(|k| format!("f{k}")).collect();
    let columns: Vec<(&str, &GridFunction)> = names.iter().map(String::as_str).zip(&overlay).collect();
    files.push(("overlay10.csv".into(), function_table("t", &columns)));
    let table = files[1].1.clone();
    Ok(Outcome { pass: true, report: json!({"n_points": grid.n_points(), "transforms": sup}), table, files })
}

pub fn dispatch(cmd: &Command, cfg: &RunConfig) -> Result<Outcome> {
    match cmd {
        Command::Kernel(_) => run_kernel(cfg),
        Command::Transform(_) => run_transform(cfg),
        Command::Identity(_) => run_identity(cfg),
        Command::Bounds(_) => run_bounds(cfg),
        Command::Ode(_) => run_ode(cfg),
        Command::Weak(_) => run_weak(cfg),
        Command::Filter(_) => run_filter(cfg),
        Command::Modular(_) => run_modular(cfg),
        Command::Brownian(_) => run_brownian(cfg),
        Command::Ito(_) => run_ito(cfg),
        Command::SmoothConverge(_) => run_smooth_converge(cfg),
        Command::Figure1(_) => run_figure1(cfg),
    }
}

fn write_files(dir: &Path, files: &[(String, String)]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, contents) in files {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}

/// Splices the `key=value` lines of `--config FILE` in front of the other flags.
pub fn expand_config(args: Vec<String>) -> std::result::Result<Vec<String>, String> {
    let Some(pos) = args.iter().position(|a| a == "--config" || a.starts_with("--config=")) else {
        return Ok(args);
    };
    let path = match args[pos].strip_prefix("--config=") {
        Some(p) => p.to_string(),
        None => args.get(pos + 1).cloned().ok_or("--config needs a file")?,
    };
    let text = fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let mut flags = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
        let (k, v) = line.split_once('=').ok_or_else(|| format!("{path}: expected key=value, got `{line}`"))?;
        let k = k.trim().replace('_', "-");
        match v.trim() {
            "true" => flags.push(format!("--{k}")),
            "false" => {}
            v => flags.push(format!("--{k}={v}")),
        }
    }
    let insert_at = 2.min(args.len());
    let mut out = args;
    out.splice(insert_at..insert_at, flags);
    Ok(out)
}

/// Runs the CLI on the process streams and returns the exit code.
pub fn run(argv: Vec<String>) -> i32 {
    run_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

/// Runs the CLI, writing the report to `stdout` and diagnostics to `stderr`.
pub fn run_with(argv: Vec<String>, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let argv = match expand_config(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let text = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(stderr, "{text}");
                2
            } else {
                let _ = write!(stdout, "{text}");
                0
            };
        }
    };
    let cmd = &cli.command;
    let outcome = resolve(cmd).and_then(|cfg| dispatch(cmd, &cfg).map(|o| (cfg, o)));
    let (cfg, outcome) = match outcome {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return 2;
        }
    };
    let written_dir = match (cmd, &cfg.output_dir) {
        (_, Some(dir)) => Some(PathBuf::from(dir)),
        (Command::Figure1(_), None) => Some(PathBuf::from(".")),
        _ => None,
    };
    if let Some(dir) = &written_dir {
        if let Err(e) = write_files(dir, &outcome.files) {
            let _ = writeln!(stderr, "error: writing to {}: {e}", dir.display());
            return 2;
        }
    }
    let bare_kernel = matches!(cmd, Command::Kernel(_)) && cfg.w.is_some() && cmd.args().format.is_none();
    let printed = if bare_kernel {
        writeln!(stdout, "{}", outcome.report[0]["value"])
    } else {
        match cfg.format {
            Format::Csv => stdout.write_all(outcome.table.as_bytes()),
            Format::Json => {
                let env = Envelope {
                    subcommand: cmd.name(),
                    config: &cfg,
                    pass: outcome.pass,
                    files: if written_dir.is_some() { outcome.files.iter().map(|(n, _)| n.as_str()).collect() } else { Vec::new() },
                    report: &outcome.report,
                };
                writeln!(stdout, "{}", serde_json::to_string_pretty(&env).expect("reports serialize"))
            }
        }
    };
    if printed.is_err() {
        return 2;
    }
    if outcome.pass {
        0
    } else {
        1
    }
}
