//! Seeded Brownian paths, Itô sums and Monte Carlo experiments on them.
//!
//! Path `k` of an experiment with seed `s` is driven by the ChaCha8 stream
//! `(s, k)`: increment `i` consumes exactly the 64-bit words `4i .. 4i + 4`
//! of that stream (two `u64` draws through Box–Muller, cosine branch). Any
//! increment can therefore be regenerated on its own, and results do not
//! depend on how trials are scheduled across threads. Trial results are
//! collected in trial order and reduced with a compensated sum.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::LatticeVector;
use crate::moment_ops::transform;
use crate::quadrature::{stieltjes_integral, Grid, GridFunction, StieltjesRule};
use crate::stats;

const TWO_POW_53: f64 = 9_007_199_254_740_992.0;

/// Standard normal draws from one ChaCha8 stream, two words per draw.
struct NormalStream {
    rng: ChaCha8Rng,
}

impl NormalStream {
    fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng }
    }

    fn next(&mut self) -> f64 {
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 / TWO_POW_53;
        let u2 = (self.rng.next_u64() >> 11) as f64 / TWO_POW_53;
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// The standard normal behind increment `step` of path `stream`.
pub fn increment_normal(seed: u64, stream: u64, step: u64) -> f64 {
    let mut s = NormalStream::new(seed, stream);
    s.rng.set_word_pos(4 * step as u128);
    s.next()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    grid: Grid,
    values: Vec<f64>,
    seed: u64,
    stream: u64,
}

/// Path 0 of `seed`.
pub fn simulate_brownian(seed: u64, grid: &Grid) -> Result<BrownianPath> {
    simulate_brownian_stream(seed, 0, grid)
}

/// `B(t_{i+1}) = B(t_i) + √h Z_i`, `B(0) = 0`.
pub fn simulate_brownian_stream(seed: u64, stream: u64, grid: &Grid) -> Result<BrownianPath> {
    if grid.t0() != 0.0 {
        return Err(Error::InvalidGrid(format!("Brownian paths start at t0 = 0, got {}", grid.t0())));
    }
    let sqrt_h = grid.h().sqrt();
    let mut normals = NormalStream::new(seed, stream);
    let mut values = Vec::with_capacity(grid.n_points());
    let mut b = 0.0;
    values.push(b);
    for _ in 1..grid.n_points() {
        b += sqrt_h * normals.next();
        values.push(b);
    }
    Ok(BrownianPath { grid: *grid, values, seed, stream })
}

impl BrownianPath {
    /// A path given by explicit node values (used for deterministic checks).
    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if grid.t0() != 0.0 {
            return Err(Error::InvalidGrid("Brownian paths start at t0 = 0".into()));
        }
        if values.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!("{} values for {} points", values.len(), grid.n_points())));
        }
        if values[0] != 0.0 {
            return Err(Error::InvalidParameter("a Brownian path starts at 0".into()));
        }
        Ok(Self { grid, values, seed: 0, stream: 0 })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn as_grid_function(&self) -> GridFunction {
        GridFunction::new(self.grid, self.values.clone(), None).expect("path values are finite")
    }
}

/// The values `B(t_i)` of several paths as one sample ensemble.
pub fn ensemble_at(paths: &[BrownianPath], node: usize) -> Result<LatticeVector> {
    LatticeVector::new(paths.iter().map(|p| p.values[node]).collect())
}

/// Lags (in grid steps) scanned by [`holder_witness`]: every lag up to 16,
/// then a geometric progression with ratio 1.25 up to the full grid.
pub fn holder_lags(n_points: usize) -> Vec<usize> {
    let max = n_points - 1;
    let mut lags: Vec<usize> = (1..=16.min(max)).collect();
    let mut next = 16.0_f64;
    loop {
        next *= 1.25;
        let k = next.round() as usize;
        if k > max {
            break;
        }
        if lags.last() != Some(&k) {
            lags.push(k);
        }
    }
    if lags.last() != Some(&max) {
        lags.push(max);
    }
    lags
}

/// `max |B(t + δ) − B(t)| / δ^{1/4}` over all start nodes and the lags of
/// [`holder_lags`]; a lower estimate of the path's Hölder-¼ constant.
pub fn holder_witness(path: &BrownianPath) -> f64 {
    let v = &path.values;
    let h = path.grid.h();
    holder_lags(v.len())
        .into_iter()
        .map(|k| {
            let scale = (k as f64 * h).powf(0.25);
            v.windows(k + 1).map(|w| (w[k] - w[0]).abs()).fold(0.0, f64::max) / scale
        })
        .fold(0.0, f64::max)
}

/// `f(t) = (t − T)(B(t) − B(a))` on `[a, T]`, zero elsewhere.
pub fn bridge_process(path: &BrownianPath, a: f64, t_end: f64) -> Result<GridFunction> {
    if !(1.0 < a && a < t_end) {
        return Err(Error::InvalidParameter(format!("need 1 < a < T, got a = {a}, T = {t_end}")));
    }
    let grid = path.grid;
    let ia = grid.index_of(a)?;
    let it = grid.index_of(t_end)?;
    let (a, t_end) = (grid.node(ia), grid.node(it));
    let b_a = path.values[ia];
    let values = (0..grid.n_points())
        .map(|i| if i < ia || i > it { 0.0 } else { (grid.node(i) - t_end) * (path.values[i] - b_a) })
        .collect();
    GridFunction::new(grid, values, Some((a, t_end)))
}

/// Left-point sum `Σ Y(t_i)(B(t_{i+1}) − B(t_i))`.
///
/// `Y(t_i)` must not depend on increments after `t_i`; every process built
/// by [`build_process`] satisfies this.
pub fn ito_sum(y: &GridFunction, path: &BrownianPath) -> Result<f64> {
    stieltjes_integral(y, &path.as_grid_function(), StieltjesRule::LeftPoint)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegularProcessSpec {
    Constant { c: f64 },
    Bridge { a: f64, t_end: f64 },
    /// `T_n` applied path-wise to the bridge.
    SmoothedBridge { a: f64, t_end: f64, n: u32 },
}

impl RegularProcessSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RegularProcessSpec::Constant { c } if !c.is_finite() => {
                Err(Error::InvalidParameter("constant must be finite".into()))
            }
            RegularProcessSpec::Bridge { a, t_end } | RegularProcessSpec::SmoothedBridge { a, t_end, .. }
                if !(1.0 < a && a < t_end) =>
            {
                Err(Error::InvalidParameter(format!("need 1 < a < T, got a = {a}, T = {t_end}")))
            }
            RegularProcessSpec::SmoothedBridge { n: 0, .. } => Err(Error::InvalidParameter("n must be >= 1".into())),
            _ => Ok(()),
        }
    }

    /// Declared `K = sup_t E(Y(t)²)`.
    ///
    /// For the bridge `E f(t)² = (t − T)²(t − a)`, maximal at `t = (2a + T)/3`
    /// with value `4(T − a)³/27`. `T_n f(s)` averages `f` against a measure
    /// of mass at most one, so the same `K` bounds the smoothed bridge.
    pub fn k_bound(&self) -> f64 {
        match *self {
            RegularProcessSpec::Constant { c } => c * c,
            RegularProcessSpec::Bridge { a, t_end } | RegularProcessSpec::SmoothedBridge { a, t_end, .. } => {
                4.0 * (t_end - a).powi(3) / 27.0
            }
        }
    }
}

/// The process `Y` of `spec` along one path.
pub fn build_process(spec: &RegularProcessSpec, path: &BrownianPath) -> Result<GridFunction> {
    match *spec {
        RegularProcessSpec::Constant { c } => GridFunction::from_fn(path.grid, None, |_| c),
        RegularProcessSpec::Bridge { a, t_end } => bridge_process(path, a, t_end),
        RegularProcessSpec::SmoothedBridge { a, t_end, n } => {
            let f = bridge_process(path, a, t_end)?;
            Ok(transform(&f, n, &path.grid)?.into_output())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub spec: RegularProcessSpec,
    pub seed: u64,
    pub trials: usize,
    pub estimate_mean: f64,
    pub mean_standard_error: f64,
    pub estimate_second_moment: f64,
    /// Standard error of the second-moment estimate.
    pub standard_error: f64,
    pub k_bound: f64,
    pub t_end: f64,
    pub bound_kt: f64,
    pub bound_satisfied_within_3se: bool,
}

pub const MIN_TRIALS: usize = 100;

fn require_trials(trials: usize) -> Result<()> {
    if trials < MIN_TRIALS {
        return Err(Error::InvalidParameter(format!("need at least {MIN_TRIALS} trials, got {trials}")));
    }
    Ok(())
}

/// Itô sums of `spec` over `trials` independent paths, one per trial.
pub fn ito_samples(spec: &RegularProcessSpec, grid: &Grid, trials: usize, seed: u64) -> Result<Vec<f64>> {
    spec.validate()?;
    (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let path = simulate_brownian_stream(seed, trial, grid)?;
            ito_sum(&build_process(spec, &path)?, &path)
        })
        .collect()
}

/// Mean and second moment of the Itô sum, checked against `E S² <= K T`.
pub fn mc_ito_moments(spec: &RegularProcessSpec, grid: &Grid, trials: usize, seed: u64) -> Result<MonteCarloReport> {
    require_trials(trials)?;
    let samples = ito_samples(spec, grid, trials, seed)?;
    let squares: Vec<f64> = samples.iter().map(|s| s * s).collect();
    let second = stats::mean(&squares);
    let se = stats::standard_error(&squares);
    let k_bound = spec.k_bound();
    let t_end = grid.end();
    let bound_kt = k_bound * t_end;
    Ok(MonteCarloReport {
        spec: *spec,
        seed,
        trials,
        estimate_mean: stats::mean(&samples),
        mean_standard_error: stats::standard_error(&samples),
        estimate_second_moment: second,
        standard_error: se,
        k_bound,
        t_end,
        bound_kt,
        bound_satisfied_within_3se: second <= bound_kt + 3.0 * se,
    })
}

/// `min(x, M)` for `x > 0`, `max(x, −M)` otherwise.
pub fn clamp_truncate(x: f64, m: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::InvalidParameter(format!("clamp level must be positive, got {m}")));
    }
    Ok(if x > 0.0 { x.min(m) } else { x.max(-m) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedRow {
    pub n: u32,
    /// Mean of `(∫ T_n f dB − ∫ f dB)²` over trials.
    pub l2_error: f64,
    pub se: f64,
    /// Same with the smoothed integral clamped at `clamp_level`.
    pub clamped_l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub reference: f64,
    pub smoothed: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedReport {
    pub a: f64,
    pub t_end: f64,
    pub h: f64,
    pub seed: u64,
    pub trials: usize,
    /// Largest `|∫ f dB|` over the sampled trials.
    pub clamp_level: f64,
    pub rows: Vec<SmoothedRow>,
    /// Each row's error is at most the previous one plus that row's SE.
    pub decreasing_within_se: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial_values: Option<Vec<TrialRecord>>,
}

impl SmoothedReport {
    /// Whether the last row improves on the first by more than the larger of their SEs.
    pub fn improves_beyond_se(&self) -> bool {
        match (self.rows.first(), self.rows.last()) {
            (Some(first), Some(last)) if self.rows.len() >= 2 => {
                first.l2_error - last.l2_error > first.se.max(last.se)
            }
            _ => false,
        }
    }
}

/// Mean-square distance between `∫ T_n f dB` (left-point sums of the
/// path-wise transform) and the Itô sum of the bridge `f`, for each `n`.
pub fn smoothed_convergence_experiment(
    a: f64,
    t_end: f64,
    n_list: &[u32],
    grid: &Grid,
    trials: usize,
    seed: u64,
    keep_trials: bool,
) -> Result<SmoothedReport> {
    RegularProcessSpec::Bridge { a, t_end }.validate()?;
    smoothed_convergence_with(|path| bridge_process(path, a, t_end), a, t_end, n_list, grid, trials, seed, keep_trials)
}

/// [`smoothed_convergence_experiment`] with a caller-supplied adapted
/// process (it must carry a support hint starting above 0).
#[allow(clippy::too_many_arguments)]
pub fn smoothed_convergence_with(
    build: impl Fn(&BrownianPath) -> Result<GridFunction> + Sync,
    a: f64,
    t_end: f64,
    n_list: &[u32],
    grid: &Grid,
    trials: usize,
    seed: u64,
    keep_trials: bool,
) -> Result<SmoothedReport> {
    if n_list.iter().any(|&n| n < 2) {
        return Err(Error::InvalidParameter("every n must be >= 2".into()));
    }
    if grid.index_of(t_end)? != grid.n_points() - 1 {
        return Err(Error::GridMismatch(format!("grid must end at T = {t_end}, ends at {}", grid.end())));
    }
    require_trials(trials)?;

    let records: Vec<TrialRecord> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let path = simulate_brownian_stream(seed, trial, grid)?;
            let f = build(&path)?;
            let brownian = path.as_grid_function();
            let reference = stieltjes_integral(&f, &brownian, StieltjesRule::LeftPoint)?;
            let smoothed = n_list
                .iter()
                .map(|&n| stieltjes_integral(transform(&f, n, grid)?.output(), &brownian, StieltjesRule::LeftPoint))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrialRecord { trial, reference, smoothed })
        })
        .collect::<Result<_>>()?;

    let clamp_level = records.iter().map(|r| r.reference.abs()).fold(0.0, f64::max);
    let rows: Vec<SmoothedRow> = n_list
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let sq: Vec<f64> = records.iter().map(|r| (r.smoothed[k] - r.reference).powi(2)).collect();
            let clamped: Vec<f64> = records
                .iter()
                .map(|r| {
                    let y = if clamp_level > 0.0 {
                        clamp_truncate(r.smoothed[k], clamp_level).expect("positive level")
                    } else {
                        r.smoothed[k]
                    };
                    (y - r.reference).powi(2)
                })
                .collect();
            SmoothedRow {
                n,
                l2_error: stats::mean(&sq),
                se: stats::standard_error(&sq),
                clamped_l2_error: stats::mean(&clamped),
            }
        })
        .collect();
    let decreasing_within_se = rows.windows(2).all(|w| w[1].l2_error <= w[0].l2_error + w[1].se.max(w[0].se));
    Ok(SmoothedReport {
        a,
        t_end,
        h: grid.h(),
        seed,
        trials,
        clamp_level,
        rows,
        decreasing_within_se,
        trial_values: keep_trials.then_some(records),
    })
}
