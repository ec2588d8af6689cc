//! Modular functionals on grid functions and empirical checks of the modular
//! axioms, absolute continuity and Vitali-type decay.
//!
//! Every diagnostic here samples finitely many sets and scalings, so a pass
//! is evidence, not proof: the definitions quantify over all (o)-sequences
//! and all sets of small measure.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::OSequenceLadder;
use crate::quadrature::{integrate, Grid, GridFunction, Rule};

/// A functional `ρ` on grid functions.
pub trait Modular {
    fn eval(&self, f: &GridFunction) -> Result<f64>;

    /// Measure of the interval `[lo, hi]` underlying the modular.
    fn interval_measure(&self, lo: f64, hi: f64) -> f64 {
        hi - lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Measure {
    /// `dt`
    Lebesgue,
    /// `dt / t`
    LogScale,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModularKind {
    /// `ρ(f) = ∫ |f| dμ`
    L1 { measure: Measure },
    /// `ρ(f) = ∫ |f| |w'| dt`, `w'` compactly supported.
    WeightedDeriv { w_prime: GridFunction },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModularSpec {
    pub kind: ModularKind,
    pub description: String,
}

impl ModularSpec {
    pub fn l1(measure: Measure) -> Self {
        let description = match measure {
            Measure::Lebesgue => "L1 modular, Lebesgue measure",
            Measure::LogScale => "L1 modular, measure dt/t",
        };
        Self { kind: ModularKind::L1 { measure }, description: description.into() }
    }

    pub fn weighted_deriv(w_prime: GridFunction) -> Result<Self> {
        if w_prime.support().is_none() {
            return Err(Error::InvalidParameter("w' needs a compact support hint".into()));
        }
        Ok(Self { kind: ModularKind::WeightedDeriv { w_prime }, description: "weighted modular ∫|g||w'|".into() })
    }
}

impl Modular for ModularSpec {
    fn eval(&self, f: &GridFunction) -> Result<f64> {
        eval_modular(self, f)
    }

    fn interval_measure(&self, lo: f64, hi: f64) -> f64 {
        match self.kind {
            ModularKind::L1 { measure: Measure::LogScale } => (hi / lo).ln(),
            _ => hi - lo,
        }
    }
}

pub fn eval_modular(rho: &ModularSpec, f: &GridFunction) -> Result<f64> {
    match &rho.kind {
        ModularKind::L1 { measure: Measure::Lebesgue } => integrate(&f.abs(), Rule::Trapezoid),
        ModularKind::L1 { measure: Measure::LogScale } => {
            if f.grid().t0() <= 0.0 {
                return Err(Error::Domain("the dt/t measure needs a grid with t0 > 0".into()));
            }
            integrate(&f.map_with_t(|t, v| v.abs() / t), Rule::Trapezoid)
        }
        ModularKind::WeightedDeriv { w_prime } => integrate(&f.abs().mul(&w_prime.abs())?, Rule::Trapezoid),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxiomReport {
    pub rho0_ok: bool,
    pub rho1_ok: bool,
    pub rho2_ok: bool,
    pub monotone_ok: bool,
    pub worst_violation: f64,
    pub worst_rho0: f64,
    pub worst_rho1: f64,
    pub worst_rho2: f64,
    pub worst_monotone: f64,
    pub samples_used: usize,
    pub tolerance: f64,
}

pub const CONVEX_WEIGHTS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Checks `ρ(0) = 0`, `ρ(−f) = ρ(f)`, `ρ(αf + (1−α)g) <= ρ(f) + ρ(g)` and
/// monotonicity on every pair of the corpus.
///
/// Monotonicity is sampled on the comparable pairs `min(|f|, |g|) <= |g|`,
/// together with `ρ(f) = ρ(|f|)`.
pub fn check_axioms(rho: &impl Modular, corpus: &[GridFunction], tolerance: f64) -> Result<AxiomReport> {
    let first = corpus.first().ok_or_else(|| Error::InvalidParameter("corpus must be nonempty".into()))?;
    let grid = *first.grid();
    if let Some(bad) = corpus.iter().find(|f| !f.grid().same_as(&grid)) {
        return Err(Error::GridMismatch(format!("{:?} vs {:?}", bad.grid(), grid)));
    }
    let mut samples = 0;
    let worst_rho0 = rho.eval(&GridFunction::zeros(grid))?.abs();
    samples += 1;

    let values: Vec<f64> = corpus.iter().map(|f| rho.eval(f)).collect::<Result<_>>()?;
    let mut worst_rho1: f64 = 0.0;
    let mut worst_rho2: f64 = 0.0;
    let mut worst_monotone: f64 = 0.0;
    for (f, &rf) in corpus.iter().zip(&values) {
        worst_rho1 = worst_rho1.max((rho.eval(&f.scale(-1.0))? - rf).abs());
        worst_monotone = worst_monotone.max((rho.eval(&f.abs())? - rf).abs());
        samples += 2;
        for (g, &rg) in corpus.iter().zip(&values) {
            for alpha in CONVEX_WEIGHTS {
                let combo = f.linear_combination(alpha, g, 1.0 - alpha)?;
                worst_rho2 = worst_rho2.max(rho.eval(&combo)? - rf - rg);
                samples += 1;
            }
            let lower = f.abs().min_with(&g.abs())?;
            worst_monotone = worst_monotone.max(rho.eval(&lower)? - rg);
            samples += 1;
        }
    }
    let worst_rho2 = worst_rho2.max(0.0);
    let worst_monotone = worst_monotone.max(0.0);
    let worst_violation = worst_rho0.max(worst_rho1).max(worst_rho2).max(worst_monotone);
    Ok(AxiomReport {
        rho0_ok: worst_rho0 <= tolerance,
        rho1_ok: worst_rho1 <= tolerance,
        rho2_ok: worst_rho2 <= tolerance,
        monotone_ok: worst_monotone <= tolerance,
        worst_violation,
        worst_rho0,
        worst_rho1,
        worst_rho2,
        worst_monotone,
        samples_used: samples,
        tolerance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FinitenessRow {
    pub epsilon: f64,
    pub rho: f64,
}

/// `ρ(ε_p 1_A)` along the ladder, `A = [lo, hi]` with grid-node endpoints.
pub fn finiteness_scan(
    rho: &impl Modular,
    grid: &Grid,
    interval: (f64, f64),
    ladder: &OSequenceLadder,
) -> Result<Vec<FinitenessRow>> {
    let indicator = GridFunction::from_fn(*grid, Some(interval), |_| 1.0)?;
    ladder
        .values()
        .iter()
        .map(|&epsilon| Ok(FinitenessRow { epsilon, rho: rho.eval(&indicator.scale(epsilon))? }))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallSetRow {
    pub lo: f64,
    pub hi: f64,
    pub measure: f64,
    pub sup_rho: f64,
    /// Largest `sup_rho` over all sampled sets of measure `<= measure`.
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExhaustionRow {
    pub m: usize,
    pub lo: f64,
    pub hi: f64,
    pub sup_rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquiAcReport {
    pub alpha: f64,
    pub tolerance: f64,
    pub small_sets: Vec<SmallSetRow>,
    pub exhaustion: Vec<ExhaustionRow>,
    pub small_sets_ok: bool,
    pub exhaustion_ok: bool,
    pub pass: bool,
    pub note: String,
}

const MONOTONE_SLACK: f64 = 1e-12;

fn non_increasing_to(values: &[f64], tolerance: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK) && values.last().is_none_or(|&v| v <= tolerance)
}

/// Tables of `sup_z ρ(α f_z 1_B)` over small sets `B` (ordered by decreasing
/// measure, with the running envelope over sets of no larger measure) and
/// of `sup_z ρ(α f_z 1_{G∖B_m})` over the exhaustion `B_m`.
///
/// The complement of `B_m = [c, d]` inside the grid is split into
/// `[t0, c]` and `[d, end]`; the modular is evaluated on each piece and the
/// two values added, which is exact for the integral modulars of this module.
pub fn equi_ac_diagnostic(
    family: &[GridFunction],
    rho: &impl Modular,
    alpha: f64,
    small_sets: &[(f64, f64)],
    exhaustion: &[(f64, f64)],
    tolerance: f64,
) -> Result<EquiAcReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let sup_over = |piece: &dyn Fn(&GridFunction) -> Result<f64>| -> Result<f64> {
        family.iter().try_fold(0.0_f64, |acc, f| Ok(acc.max(piece(&f.scale(alpha))?)))
    };

    let mut small_rows = small_sets
        .iter()
        .map(|&(lo, hi)| {
            let sup_rho = sup_over(&|f| rho.eval(&f.restrict(lo, hi)?))?;
            Ok(SmallSetRow { lo, hi, measure: rho.interval_measure(lo, hi), sup_rho, envelope: sup_rho })
        })
        .collect::<Result<Vec<_>>>()?;
    small_rows.sort_by(|x, y| y.measure.total_cmp(&x.measure));
    let envelopes: Vec<f64> = small_rows
        .iter()
        .map(|r| small_rows.iter().filter(|o| o.measure <= r.measure).map(|o| o.sup_rho).fold(0.0, f64::max))
        .collect();
    for (row, env) in small_rows.iter_mut().zip(envelopes) {
        row.envelope = env;
    }

    let exhaustion_rows = exhaustion
        .iter()
        .enumerate()
        .map(|(m, &(lo, hi))| {
            let sup_rho = sup_over(&|f| {
                let grid = f.grid();
                let left = if lo > grid.t0() { rho.eval(&f.restrict(grid.t0(), lo)?)? } else { 0.0 };
                let right = if hi < grid.end() { rho.eval(&f.restrict(hi, grid.end())?)? } else { 0.0 };
                Ok(left + right)
            })?;
            Ok(ExhaustionRow { m: m + 1, lo, hi, sup_rho })
        })
        .collect::<Result<Vec<_>>>()?;

    let small_values: Vec<f64> = small_rows.iter().map(|r| r.envelope).collect();
    let exhaustion_values: Vec<f64> = exhaustion_rows.iter().map(|r| r.sup_rho).collect();
    let small_sets_ok = non_increasing_to(&small_values, tolerance);
    let exhaustion_ok = non_increasing_to(&exhaustion_values, tolerance);
    Ok(EquiAcReport {
        alpha,
        tolerance,
        small_sets: small_rows,
        exhaustion: exhaustion_rows,
        small_sets_ok,
        exhaustion_ok,
        pass: small_sets_ok && exhaustion_ok,
        note: "finite sample of sets; absolute continuity is not fully verified".into(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub alpha: f64,
    pub n: Vec<u32>,
    pub rho: Vec<f64>,
}

pub const DEFAULT_ALPHA_GRID: [f64; 3] = [1.0, 1.0 / 3.0, 1.0 / 9.0];

/// `n ↦ ρ(α f_n)` for every `α` in `alpha_grid`.
pub fn vitali_decay(family: &[(u32, GridFunction)], rho: &impl Modular, alpha_grid: &[f64]) -> Result<Vec<DecaySeries>> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("family must be nonempty".into()));
    }
    alpha_grid
        .iter()
        .map(|&alpha| {
            let rho_values = family.iter().map(|(_, f)| rho.eval(&f.scale(alpha))).collect::<Result<Vec<_>>>()?;
            Ok(DecaySeries { alpha, n: family.iter().map(|(n, _)| *n).collect(), rho: rho_values })
        })
        .collect()
}

/// Whether the series has decayed: its second half is non-increasing, the
/// last value is below the first and below `threshold`.
pub fn decays_below(series: &DecaySeries, threshold: f64) -> bool {
    let values = &series.rho;
    let (Some(&first), Some(&last)) = (values.first(), values.last()) else { return false };
    let tail = &values[values.len() / 2..];
    tail.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK) && last < threshold && (last < first || last == 0.0)
}

/// CSV `n,alpha,rho_value`.
pub fn write_decay_csv<W: std::io::Write>(series: &[DecaySeries], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "alpha", "rho_value"])?;
    for s in series {
        for (n, v) in s.n.iter().zip(&s.rho) {
            w.write_record([n.to_string(), crate::quadrature::fmt_f64(s.alpha), crate::quadrature::fmt_f64(*v)])?;
        }
    }
    w.flush()
}

/// Seeded test corpus: `A sin(ωt) + c` plus uniform noise of amplitude 0.05.
pub fn random_corpus(g: Grid, count: usize, seed: u64) -> Vec<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = move || (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
    (0..count)
        .map(|_| {
            let (amp, freq, shift) = (4.0 * u() - 2.0, 10.0 * u(), u() - 0.5);
            let noise: Vec<f64> = (0..g.n_points()).map(|_| u() - 0.5).collect();
            let values = g.nodes().zip(noise).map(|(t, e)| amp * (freq * t).sin() + shift + 0.1 * e).collect();
            GridFunction::new(g, values, None).expect("finite values")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moment_ops::approximation_error_family;

    fn grid(t0: f64, end: f64, h: f64) -> Grid {
        Grid::spanning(t0, end, h).unwrap()
    }

    /// `ρ(f) = ∫ f`, which is not a modular.
    struct SignedIntegral;

    impl Modular for SignedIntegral {
        fn eval(&self, f: &GridFunction) -> Result<f64> {
            integrate(f, Rule::Trapezoid)
        }
    }

    #[test]
    fn eval_examples() {
        let g = grid(0.0, 2.0, 1e-3);
        let rho = ModularSpec::l1(Measure::Lebesgue);
        assert_eq!(eval_modular(&rho, &GridFunction::zeros(g)).unwrap(), 0.0);
        let one = GridFunction::from_fn(g, Some((0.0, 1.0)), |_| 1.0).unwrap();
        assert!((eval_modular(&rho, &one).unwrap() - 1.0).abs() < 1e-12);

        let e = std::f64::consts::E;
        let lg = Grid::with_points(1.0, e, 1719).unwrap();
        assert!(lg.h() > 9.9e-4 && lg.h() < 1.01e-3);
        let ones = GridFunction::from_fn(lg, None, |_| 1.0).unwrap();
        let log = ModularSpec::l1(Measure::LogScale);
        assert!((eval_modular(&log, &ones).unwrap() - 1.0).abs() < 1e-4);
        assert_eq!(eval_modular(&log, &GridFunction::zeros(lg)).unwrap(), 0.0);
    }

    #[test]
    fn log_scale_needs_positive_grid() {
        let g = grid(0.0, 1.0, 0.1);
        let err = eval_modular(&ModularSpec::l1(Measure::LogScale), &GridFunction::zeros(g)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn weighted_deriv_needs_compact_support() {
        let g = grid(0.0, 1.0, 0.1);
        assert!(ModularSpec::weighted_deriv(GridFunction::zeros(g)).is_err());
    }

    #[test]
    fn modular_ignores_sign() {
        let g = grid(0.0, 3.0, 1e-2);
        let w = GridFunction::from_fn(g, Some((0.5, 2.5)), |t| (t - 0.5) * (2.5 - t)).unwrap();
        let specs = [ModularSpec::l1(Measure::Lebesgue), ModularSpec::weighted_deriv(w).unwrap()];
        for f in random_corpus(g, 10, 9) {
            for rho in &specs {
                let v = eval_modular(rho, &f).unwrap();
                assert_eq!(v, eval_modular(rho, &f.abs()).unwrap());
                assert_eq!(v, eval_modular(rho, &f.scale(-1.0)).unwrap());
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn l1_satisfies_axioms_on_random_corpus() {
        let g = grid(0.0, 2.0, 1e-2);
        let corpus = random_corpus(g, 12, 4);
        let report = check_axioms(&ModularSpec::l1(Measure::Lebesgue), &corpus, 1e-12).unwrap();
        assert!(report.rho0_ok && report.rho1_ok && report.rho2_ok && report.monotone_ok, "{report:?}");
        assert!(report.worst_violation <= 1e-12);
        assert_eq!(report.samples_used, 1 + 12 * 2 + 12 * 12 * 6);
    }

    #[test]
    fn signed_integral_fails_symmetry() {
        let g = grid(0.0, 1.0, 1e-2);
        let witness = GridFunction::from_fn(g, None, |t| t + 0.2).unwrap();
        let report = check_axioms(&SignedIntegral, &[witness], 1e-12).unwrap();
        assert!(!report.rho1_ok);
        assert!(report.worst_rho1 > 1.0);
    }

    #[test]
    fn axioms_reject_bad_corpus() {
        let empty: Vec<GridFunction> = vec![];
        let rho = ModularSpec::l1(Measure::Lebesgue);
        assert!(check_axioms(&rho, &empty, 1e-12).is_err());
        let mixed = vec![GridFunction::zeros(grid(0.0, 1.0, 0.1)), GridFunction::zeros(grid(0.0, 1.0, 0.05))];
        assert!(matches!(check_axioms(&rho, &mixed, 1e-12), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn finiteness_scan_examples() {
        let g = grid(0.0, 4.0, 1e-3);
        let ladder = OSequenceLadder::new(vec![1.0, 0.1, 0.01], 0.01).unwrap();
        let rows = finiteness_scan(&ModularSpec::l1(Measure::Lebesgue), &g, (0.0, 2.0), &ladder).unwrap();
        for (row, expected) in rows.iter().zip([2.0, 0.2, 0.02]) {
            assert!((row.rho - expected).abs() < 1e-12);
            assert!((row.rho - row.epsilon * rows[0].rho).abs() <= 1e-12);
        }
        let ind = GridFunction::from_fn(g, Some((0.0, 2.0)), |_| 1.0).unwrap();
        assert_eq!(eval_modular(&ModularSpec::l1(Measure::Lebesgue), &ind.scale(0.0)).unwrap(), 0.0);

        let e = std::f64::consts::E;
        let lg = Grid::with_points(1.0, e, 1719).unwrap();
        let rows = finiteness_scan(&ModularSpec::l1(Measure::LogScale), &lg, (1.0, lg.end()), &ladder).unwrap();
        for (row, expected) in rows.iter().zip([1.0, 0.1, 0.01]) {
            assert!((row.rho - expected).abs() < 1e-4);
        }
    }

    fn shrinking_indicators(g: Grid, height: impl Fn(f64) -> f64) -> Vec<GridFunction> {
        [1u32, 2, 4, 5, 8, 10, 20]
            .iter()
            .map(|&k| {
                let k = k as f64;
                GridFunction::from_fn(g, Some((0.0, 1.0 / k)), |_| height(k)).unwrap()
            })
            .collect()
    }

    #[test]
    fn equi_ac_single_indicator_has_zero_tail() {
        let g = grid(0.0, 5.0, 1e-3);
        let family = vec![GridFunction::from_fn(g, Some((0.0, 1.0)), |_| 1.0).unwrap()];
        let exhaustion: Vec<(f64, f64)> = (1..=4).map(|m| (0.0, m as f64)).collect();
        let report =
            equi_ac_diagnostic(&family, &ModularSpec::l1(Measure::Lebesgue), 1.0, &[(0.0, 0.1)], &exhaustion, 1e-9)
                .unwrap();
        assert!(report.exhaustion.iter().all(|r| r.sup_rho == 0.0));
        assert!(report.exhaustion_ok);
    }

    #[test]
    fn equi_ac_bounded_family_is_dominated_by_measure() {
        let g = grid(0.0, 2.0, 1e-3);
        let family = shrinking_indicators(g, |_| 1.0);
        let rho = ModularSpec::l1(Measure::Lebesgue);
        let mut small = Vec::new();
        for sigma in [0.2, 0.05, 0.01, 0.002] {
            small.push((0.0, sigma));
            small.push((0.5 - sigma / 2.0, 0.5 + sigma / 2.0));
            small.push((1.0 - sigma, 1.0));
        }
        let small: Vec<(f64, f64)> =
            small.into_iter().map(|(lo, hi)| ((lo * 1e3_f64).round() / 1e3, (hi * 1e3_f64).round() / 1e3)).collect();
        let report = equi_ac_diagnostic(&family, &rho, 1.0, &small, &[(0.0, 1.0), (0.0, 2.0)], 0.002 + 1e-9).unwrap();
        for row in &report.small_sets {
            assert!(row.sup_rho <= row.measure + 1e-12, "{row:?}");
        }
        assert!(report.small_sets_ok);
        assert!(report.pass);
    }

    #[test]
    fn equi_ac_detects_concentrating_family() {
        let g = grid(0.0, 2.0, 1e-3);
        let family = shrinking_indicators(g, |k| k);
        let small: Vec<(f64, f64)> = [0.5, 0.2, 0.1, 0.05].iter().map(|&s| (0.0, s)).collect();
        let report = equi_ac_diagnostic(&family, &ModularSpec::l1(Measure::Lebesgue), 1.0, &small, &[], 0.1).unwrap();
        for row in &report.small_sets {
            assert!((row.sup_rho - 1.0).abs() < 1e-12);
            assert!((row.envelope - 1.0).abs() < 1e-12);
        }
        assert!(!report.small_sets_ok);
        assert!(!report.pass);
        assert!(equi_ac_diagnostic(&family, &ModularSpec::l1(Measure::Lebesgue), 0.0, &small, &[], 0.1).is_err());
    }

    #[test]
    fn vitali_decay_of_shrinking_indicators() {
        let g = grid(0.0, 1.0, 1e-3);
        let family: Vec<(u32, GridFunction)> = [1u32, 2, 4, 5, 8, 10, 20, 40, 100]
            .iter()
            .map(|&n| (n, GridFunction::from_fn(g, Some((0.0, 1.0 / n as f64)), |_| 1.0).unwrap()))
            .collect();
        let series = vitali_decay(&family, &ModularSpec::l1(Measure::Lebesgue), &[1.0]).unwrap();
        for (n, v) in series[0].n.iter().zip(&series[0].rho) {
            assert!((v - 1.0 / *n as f64).abs() < 1e-12);
        }
        assert!(decays_below(&series[0], 0.011));

        let zeros: Vec<(u32, GridFunction)> = (1..5).map(|n| (n, GridFunction::zeros(g))).collect();
        let series = vitali_decay(&zeros, &ModularSpec::l1(Measure::Lebesgue), &DEFAULT_ALPHA_GRID).unwrap();
        assert_eq!(series.len(), 3);
        assert!(series.iter().all(|s| s.rho.iter().all(|&v| v == 0.0)));
        assert!(vitali_decay(&[], &ModularSpec::l1(Measure::Lebesgue), &[1.0]).is_err());
    }

    #[test]
    fn vitali_decay_of_moment_operator_errors() {
        // f = (t-a)²(b-t)² on [a, b] = [1.5, 3]: uniformly continuous with a > 1.
        let g = grid(0.0, 6.0, 1e-3);
        let f = GridFunction::from_fn(g, Some((1.5, 3.0)), |t| ((t - 1.5) * (3.0 - t)).powi(2)).unwrap();
        let family = approximation_error_family(&f, &[5, 10, 20, 40, 100, 200], &g).unwrap();
        let series = vitali_decay(&family, &ModularSpec::l1(Measure::Lebesgue), &DEFAULT_ALPHA_GRID).unwrap();
        assert!(decays_below(&series[0], 1e-2), "{:?}", series[0]);
        for s in &series {
            assert!(s.rho.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn decay_csv_shape() {
        let series = vec![DecaySeries { alpha: 1.0, n: vec![1, 2], rho: vec![0.5, 0.25] }];
        let mut buf = Vec::new();
        write_decay_csv(&series, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("n,alpha,rho_value"));
        assert_eq!(text.lines().count(), 3);
    }
}
